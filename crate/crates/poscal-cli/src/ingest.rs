//! Dataset ingestion: delimited files or JSON lines, with numeric columns or
//! a hashed bag-of-words featurizer for text.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use poscal::{Dataset, Matrix, SplitTag};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// On-disk dataset layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Csv,
    Tsv,
    Jsonl,
}

/// How raw records turn into feature vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Featurizer {
    /// Every non-label column is parsed as a real number.
    Numeric,
    /// Non-label columns are joined with spaces, lowercased, split on
    /// whitespace, and token counts are hashed into `dim` buckets.
    HashedBow { dim: usize },
}

/// A dataset plus the label-name mapping discovered while loading it
/// (first-appearance order).
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub label_names: Vec<String>,
}

/// 64-bit FNV-1a over the token's UTF-8 bytes. Fixed constants
/// (offset 0xcbf29ce484222325, prime 0x100000001b3) keep feature indices
/// stable across platforms and versions.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Lowercases, splits on whitespace, and accumulates token counts into
/// `dim` buckets via `fnv1a64(token) % dim`. Collisions simply share a
/// bucket.
pub fn hashed_bow(text: &str, dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for token in text.to_lowercase().split_whitespace() {
        let idx = (fnv1a64(token.as_bytes()) % dim as u64) as usize;
        out[idx] += 1.0;
    }
    out
}

/// Loads a dataset file, mapping label values to contiguous indices by first
/// appearance.
pub fn load_dataset(
    path: &Path,
    format: DataFormat,
    label_column: &str,
    featurizer: &Featurizer,
) -> Result<LoadedDataset, CliError> {
    if let Featurizer::HashedBow { dim } = featurizer {
        if *dim == 0 {
            return Err(CliError::config("hashed bag-of-words dimension must be >= 1"));
        }
    }
    let (rows, labels, label_names) = match format {
        DataFormat::Csv => read_delimited(path, b',', label_column, featurizer)?,
        DataFormat::Tsv => read_delimited(path, b'\t', label_column, featurizer)?,
        DataFormat::Jsonl => read_jsonl(path, label_column, featurizer)?,
    };
    if label_names.len() < 2 {
        return Err(CliError::config(format!(
            "found {} distinct label(s); need at least two classes",
            label_names.len()
        )));
    }
    let features = Matrix::from_rows(&rows).map_err(CliError::Core)?;
    let dataset = Dataset::new(features, labels, label_names.len(), SplitTag::Train)?;
    Ok(LoadedDataset {
        dataset,
        label_names,
    })
}

fn read_delimited(
    path: &Path,
    delimiter: u8,
    label_column: &str,
    featurizer: &Featurizer,
) -> Result<(Vec<Vec<f64>>, Vec<usize>, Vec<String>), CliError> {
    let file = File::open(path).map_err(|e| CliError::ingestion(0, format!("{}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CliError::ingestion(1, e.to_string()))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| {
            CliError::config(format!("label column `{label_column}` not found in header"))
        })?;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            CliError::ingestion(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let label_value = record
            .get(label_idx)
            .ok_or_else(|| CliError::ingestion(line, "record shorter than header"))?;
        labels.push(intern_label(label_value, &mut label_names));

        let fields: Vec<&str> = record
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != label_idx)
            .map(|(_, v)| v)
            .collect();
        rows.push(featurize_fields(&fields, featurizer, line)?);
    }
    Ok((rows, labels, label_names))
}

fn read_jsonl(
    path: &Path,
    label_column: &str,
    featurizer: &Featurizer,
) -> Result<(Vec<Vec<f64>>, Vec<usize>, Vec<String>), CliError> {
    let file = File::open(path).map_err(|e| CliError::ingestion(0, format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let text = line.map_err(|e| CliError::ingestion(line_no, e.to_string()))?;
        if text.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::ingestion(line_no, e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| CliError::ingestion(line_no, "expected a JSON object"))?;
        let label_value = obj
            .get(label_column)
            .ok_or_else(|| CliError::ingestion(line_no, format!("missing label field `{label_column}`")))?;
        labels.push(intern_label(&scalar_to_string(label_value, line_no)?, &mut label_names));

        // Non-label fields in sorted key order (serde_json objects are
        // BTree-backed, so iteration is already sorted).
        match featurizer {
            Featurizer::Numeric => {
                let mut row = Vec::new();
                for (key, v) in obj {
                    if key == label_column {
                        continue;
                    }
                    let num = v.as_f64().ok_or_else(|| {
                        CliError::ingestion(line_no, format!("field `{key}` is not a number"))
                    })?;
                    row.push(num);
                }
                if let Some(first) = rows.first() {
                    let expected: usize = Vec::len(first);
                    if row.len() != expected {
                        return Err(CliError::ingestion(
                            line_no,
                            format!("{} feature fields, expected {expected}", row.len()),
                        ));
                    }
                }
                rows.push(row);
            }
            Featurizer::HashedBow { dim } => {
                let mut text_parts = Vec::new();
                for (key, v) in obj {
                    if key == label_column {
                        continue;
                    }
                    if let Some(s) = v.as_str() {
                        text_parts.push(s.to_string());
                    }
                }
                rows.push(hashed_bow(&text_parts.join(" "), *dim));
            }
        }
    }
    Ok((rows, labels, label_names))
}

fn featurize_fields(
    fields: &[&str],
    featurizer: &Featurizer,
    line: usize,
) -> Result<Vec<f64>, CliError> {
    match featurizer {
        Featurizer::Numeric => fields
            .iter()
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::ingestion(line, format!("`{v}` is not a number")))
            })
            .collect(),
        Featurizer::HashedBow { dim } => Ok(hashed_bow(&fields.join(" "), *dim)),
    }
}

fn intern_label(value: &str, names: &mut Vec<String>) -> usize {
    match names.iter().position(|n| n == value) {
        Some(i) => i,
        None => {
            names.push(value.to_string());
            names.len() - 1
        }
    }
}

fn scalar_to_string(value: &Value, line: usize) -> Result<String, CliError> {
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err(CliError::ingestion(line, "label must be a scalar value")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str, ext: &str) -> tempfile::TempPath {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.into_temp_path()
    }

    #[test]
    fn numeric_csv_three_rows() {
        let path = write_temp("x1,x2,label\n1.0,2.0,yes\n3.0,4.0,no\n5.0,6.0,yes\n", ".csv");
        let loaded =
            load_dataset(&path, DataFormat::Csv, "label", &Featurizer::Numeric).unwrap();
        assert_eq!(loaded.dataset.num_samples(), 3);
        assert_eq!(loaded.dataset.num_features(), 2);
        assert_eq!(loaded.dataset.num_classes(), 2);
        // First appearance order: yes -> 0, no -> 1.
        assert_eq!(loaded.label_names, vec!["yes", "no"]);
        assert_eq!(loaded.dataset.labels(), &[0, 1, 0]);
    }

    #[test]
    fn hashed_bow_counting_semantics() {
        let vec = hashed_bow("a a b", 8);
        let ia = (fnv1a64(b"a") % 8) as usize;
        let ib = (fnv1a64(b"b") % 8) as usize;
        if ia == ib {
            assert_eq!(vec[ia], 3.0);
        } else {
            assert_eq!(vec[ia], 2.0);
            assert_eq!(vec[ib], 1.0);
        }
        assert_eq!(vec.iter().sum::<f64>(), 3.0);
    }

    #[test]
    fn hashed_bow_lowercases() {
        assert_eq!(hashed_bow("Word word WORD", 16), hashed_bow("word word word", 16));
    }

    #[test]
    fn unknown_label_column_is_config_error() {
        let path = write_temp("a,b\n1,2\n", ".csv");
        let err = load_dataset(&path, DataFormat::Csv, "label", &Featurizer::Numeric).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn parse_failure_reports_line_number() {
        let path = write_temp("x,label\n1.0,a\nnot_a_number,b\n", ".csv");
        let err = load_dataset(&path, DataFormat::Csv, "label", &Featurizer::Numeric).unwrap_err();
        match err {
            CliError::Ingestion { line, .. } => assert_eq!(line, 3),
            other => panic!("expected ingestion error, got {other:?}"),
        }
    }

    #[test]
    fn jsonl_text_ingestion() {
        let path = write_temp(
            "{\"text\":\"good fine great\",\"label\":\"pos\"}\n{\"text\":\"bad awful\",\"label\":\"neg\"}\n",
            ".jsonl",
        );
        let loaded = load_dataset(
            &path,
            DataFormat::Jsonl,
            "label",
            &Featurizer::HashedBow { dim: 32 },
        )
        .unwrap();
        assert_eq!(loaded.dataset.num_features(), 32);
        assert_eq!(loaded.label_names, vec!["pos", "neg"]);
    }

    #[test]
    fn single_class_rejected() {
        let path = write_temp("x,label\n1.0,a\n2.0,a\n", ".csv");
        let err = load_dataset(&path, DataFormat::Csv, "label", &Featurizer::Numeric).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
