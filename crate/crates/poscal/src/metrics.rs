//! Task-performance and calibration metrics: expected calibration error,
//! accuracy, F1, and Matthews correlation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::binning::{reliability_table, ReliabilityTable};
use crate::data::{BinningConfig, PredictionMatrix};
use crate::error::{Error, Result};
use crate::math;

/// Expected calibration error:
/// `(1/K) * sum_k sum_b (|B_kb| / n) * |q_kb - mean_pred_kb|`.
///
/// Lower is better; empty cells carry zero weight.
pub fn ece(table: &ReliabilityTable) -> Result<f64> {
    let n = table.num_samples();
    if n == 0 {
        return Err(Error::invalid("ECE needs at least one sample"));
    }
    let mut sum = 0.0;
    for class in 0..table.num_classes() {
        for bin in 0..table.num_bins() {
            let count = table.count(class, bin);
            if count > 0 {
                sum += count as f64 / n as f64
                    * math::abs(table.empirical(class, bin) - table.mean_pred(class, bin));
            }
        }
    }
    Ok(sum / table.num_classes() as f64)
}

/// Index of the row maximum, ties broken toward the lowest class index.
pub fn argmax_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Fraction of rows whose argmax equals the label.
pub fn accuracy(preds: &PredictionMatrix, labels: &[usize]) -> Result<f64> {
    check_labels(preds, labels)?;
    let correct = labels
        .iter()
        .enumerate()
        .filter(|&(i, &y)| argmax_row(preds.row(i)) == y)
        .count();
    Ok(correct as f64 / labels.len() as f64)
}

/// F1 averaging mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum F1Mode {
    /// Unweighted mean of per-class F1 scores.
    Macro,
    /// F1 of class 1; binary tasks only.
    PositiveClass,
}

/// F1 score with the 0/0 := 0 convention, as `2TP / (2TP + FP + FN)`.
pub fn f1(preds: &PredictionMatrix, labels: &[usize], mode: F1Mode) -> Result<f64> {
    check_labels(preds, labels)?;
    let k = preds.cols();
    match mode {
        F1Mode::Macro => {
            let cm = confusion(preds, labels);
            let sum: f64 = (0..k).map(|class| class_f1(&cm, k, class)).sum();
            Ok(sum / k as f64)
        }
        F1Mode::PositiveClass => {
            if k != 2 {
                return Err(Error::invalid(format!(
                    "positive-class F1 needs a binary task, got {k} classes"
                )));
            }
            let cm = confusion(preds, labels);
            Ok(class_f1(&cm, k, 1))
        }
    }
}

/// Matthews correlation coefficient for binary tasks. Returns 0 when any
/// factor of the denominator is 0.
pub fn matthews(preds: &PredictionMatrix, labels: &[usize]) -> Result<f64> {
    check_labels(preds, labels)?;
    if preds.cols() != 2 {
        return Err(Error::invalid(format!(
            "Matthews correlation needs a binary task, got {} classes",
            preds.cols()
        )));
    }
    let cm = confusion(preds, labels);
    // Class 1 is the positive class: cm[true][predicted].
    let tp = cm[1 * 2 + 1] as f64;
    let tn = cm[0] as f64;
    let fp = cm[0 * 2 + 1] as f64;
    let fn_ = cm[1 * 2] as f64;
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((tp * tn - fp * fn_) / math::sqrt(denom))
}

/// Per-class precision/recall/F1 with the class's sample count.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Aggregate metric record for one evaluation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Class-1 F1; binary tasks only.
    pub positive_f1: Option<f64>,
    /// Matthews correlation; binary tasks only.
    pub matthews: Option<f64>,
    pub ece: f64,
    pub per_class: Vec<ClassMetrics>,
}

/// Computes every metric in one pass over the predictions.
pub fn compute_metrics(
    preds: &PredictionMatrix,
    labels: &[usize],
    cfg: &BinningConfig,
) -> Result<MetricReport> {
    check_labels(preds, labels)?;
    let k = preds.cols();
    let cm = confusion(preds, labels);
    let per_class = (0..k)
        .map(|class| {
            let (precision, recall, f1) = class_prf(&cm, k, class);
            let support = (0..k).map(|p| cm[class * k + p] as usize).sum();
            ClassMetrics {
                class,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect::<Vec<_>>();
    let table = reliability_table(preds, labels, cfg)?;
    Ok(MetricReport {
        accuracy: accuracy(preds, labels)?,
        macro_f1: per_class.iter().map(|c| c.f1).sum::<f64>() / k as f64,
        positive_f1: (k == 2).then(|| per_class[1].f1),
        matthews: if k == 2 { Some(matthews(preds, labels)?) } else { None },
        ece: ece(&table)?,
        per_class,
    })
}

/// `cm[true_class * k + predicted_class]`.
fn confusion(preds: &PredictionMatrix, labels: &[usize]) -> Vec<u64> {
    let k = preds.cols();
    let mut cm = vec![0u64; k * k];
    for (i, &y) in labels.iter().enumerate() {
        cm[y * k + argmax_row(preds.row(i))] += 1;
    }
    cm
}

fn class_prf(cm: &[u64], k: usize, class: usize) -> (f64, f64, f64) {
    let tp = cm[class * k + class] as f64;
    let predicted: f64 = (0..k).map(|t| cm[t * k + class] as f64).sum();
    let actual: f64 = (0..k).map(|p| cm[class * k + p] as f64).sum();
    let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
    let recall = if actual > 0.0 { tp / actual } else { 0.0 };
    let fp = predicted - tp;
    let fn_ = actual - tp;
    let denom = 2.0 * tp + fp + fn_;
    let f1 = if denom > 0.0 { 2.0 * tp / denom } else { 0.0 };
    (precision, recall, f1)
}

fn class_f1(cm: &[u64], k: usize, class: usize) -> f64 {
    class_prf(cm, k, class).2
}

fn check_labels(preds: &PredictionMatrix, labels: &[usize]) -> Result<()> {
    if preds.rows() == 0 {
        return Err(Error::invalid("need at least one prediction row"));
    }
    if preds.rows() != labels.len() {
        return Err(Error::invalid(format!(
            "{} prediction rows but {} labels",
            preds.rows(),
            labels.len()
        )));
    }
    let k = preds.cols();
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::invalid(format!("label {bad} out of range for {k} classes")));
    }
    Ok(())
}
