//! Experiment orchestration: split the data, train the requested modes, fit
//! temperature scaling on the MLE model, evaluate everything on the test
//! split, and write the report files.

use std::path::Path;

use poscal::binning::{export_reliability, reliability_table, CalibrationReport};
use poscal::metrics::{compute_metrics, MetricReport};
use poscal::model::{forward, Architecture, ModelParams};
use poscal::postcal::{apply_temperature, fit_temperature};
use poscal::train::{train, TrainConfig, TrainMode};
use poscal::{softmax, Dataset, Error as CoreError, Logits, SplitTag};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::ingest::{load_dataset, DataFormat, Featurizer, LoadedDataset};
use crate::report::{
    write_calibration_csv, write_metrics_report, write_train_log_jsonl, FailureJson,
    MetricReportJson, MetricsReportFile, ModeDetail, ModeValues, SplitSpec, TrainSettingsJson,
    REPORT_VERSION,
};
use crate::synth::{generate_synthetic, SyntheticSpec};
use crate::{checkpoint, report};

/// Where the experiment's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    File {
        path: String,
        format: DataFormat,
        label_column: String,
        featurizer: Featurizer,
    },
    Synthetic(SyntheticSpec),
}

/// Which task-performance number goes into the report's left columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMetric {
    Accuracy,
    MacroF1,
    PositiveF1,
    Matthews,
}

impl TaskMetric {
    pub fn name(&self) -> &'static str {
        match self {
            TaskMetric::Accuracy => "accuracy",
            TaskMetric::MacroF1 => "macro_f1",
            TaskMetric::PositiveF1 => "positive_f1",
            TaskMetric::Matthews => "matthews",
        }
    }

    fn extract(&self, report: &MetricReport) -> Option<f64> {
        match self {
            TaskMetric::Accuracy => Some(report.accuracy),
            TaskMetric::MacroF1 => Some(report.macro_f1),
            TaskMetric::PositiveF1 => report.positive_f1,
            TaskMetric::Matthews => report.matthews,
        }
    }
}

/// Full experiment description. All randomness is pinned by `split_seed`,
/// `train.seed`, and (for synthetic sources) the generator seed.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub val_frac: f64,
    pub test_frac: f64,
    pub train: TrainConfig,
    pub modes: Vec<TrainMode>,
    pub metric: TaskMetric,
    pub split_seed: u64,
}

/// What an experiment produced, beyond the files on disk.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub report: MetricsReportFile,
    /// True when at least one mode diverged (partial results were written).
    pub diverged: bool,
}

pub fn mode_name(mode: TrainMode) -> &'static str {
    match mode {
        TrainMode::Mle => "mle",
        TrainMode::L1 => "l1",
        TrainMode::PosCal => "poscal",
    }
}

fn arch_name(arch: Architecture) -> String {
    match arch {
        Architecture::LogisticRegression => "logistic_regression".to_string(),
        Architecture::Mlp1Hidden { hidden_width } => format!("mlp1_hidden({hidden_width})"),
    }
}

fn distance_name(d: poscal::loss::DistanceKind) -> &'static str {
    match d {
        poscal::loss::DistanceKind::KlDivergence => "kl",
        poscal::loss::DistanceKind::MeanSquaredError => "mse",
    }
}

/// Deterministic shuffled split into train/validation/test.
pub fn split_dataset(
    data: &Dataset,
    val_frac: f64,
    test_frac: f64,
    split_seed: u64,
) -> Result<(Dataset, Dataset, Dataset), CliError> {
    if !(val_frac > 0.0 && test_frac > 0.0 && val_frac + test_frac < 1.0) {
        return Err(CliError::config(format!(
            "split fractions must be positive and sum below 1 (val {val_frac}, test {test_frac})"
        )));
    }
    let n = data.num_samples();
    let n_val = ((n as f64 * val_frac).round() as usize).max(1);
    let n_test = ((n as f64 * test_frac).round() as usize).max(1);
    if n_val + n_test >= n {
        return Err(CliError::config(format!(
            "{n} samples cannot be split into val {n_val} + test {n_test} + a nonempty train set"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(split_seed));
    let n_train = n - n_val - n_test;
    let train = data.subset(&indices[..n_train], SplitTag::Train)?;
    let val = data.subset(&indices[n_train..n_train + n_val], SplitTag::Validation)?;
    let test = data.subset(&indices[n_train + n_val..], SplitTag::Test)?;
    Ok((train, val, test))
}

fn load_source(source: &DataSource) -> Result<LoadedDataset, CliError> {
    match source {
        DataSource::File {
            path,
            format,
            label_column,
            featurizer,
        } => load_dataset(Path::new(path), *format, label_column, featurizer),
        DataSource::Synthetic(spec) => {
            let dataset = generate_synthetic(spec)?;
            let label_names = (0..spec.k).map(|c| c.to_string()).collect();
            Ok(LoadedDataset {
                dataset,
                label_names,
            })
        }
    }
}

struct ModeResult {
    mode: TrainMode,
    metrics: MetricReport,
    calibration: CalibrationReport,
}

fn evaluate_on_test(
    params: &ModelParams,
    test: &Dataset,
    binning: &poscal::BinningConfig,
) -> Result<(MetricReport, CalibrationReport, Logits), CliError> {
    let trace = forward(params, test.features())?;
    let preds = softmax(trace.logits());
    let metrics = compute_metrics(&preds, test.labels(), binning)?;
    let table = reliability_table(&preds, test.labels(), binning)?;
    let calibration = export_reliability(&table, &preds)?;
    let logits = trace.logits().clone();
    Ok((metrics, calibration, logits))
}

/// Runs the full experiment and writes its report files into `out_dir`:
/// `metrics.json`, plus per-mode `calibration_<mode>.csv`,
/// `trainlog_<mode>.jsonl`, and `checkpoint_<mode>.json` (and the tScal
/// calibration file when MLE is among the modes).
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome, CliError> {
    if cfg.modes.is_empty() {
        return Err(CliError::config("no training modes requested"));
    }
    std::fs::create_dir_all(out_dir)?;

    let loaded = load_source(&cfg.source)?;
    let k = loaded.dataset.num_classes();
    if matches!(cfg.metric, TaskMetric::PositiveF1 | TaskMetric::Matthews) && k != 2 {
        return Err(CliError::config(format!(
            "{} requires a binary task, data has {k} classes",
            cfg.metric.name()
        )));
    }
    let (train_set, val_set, test_set) =
        split_dataset(&loaded.dataset, cfg.val_frac, cfg.test_frac, cfg.split_seed)?;

    // Fixed mode order keeps reports deterministic regardless of flag order.
    let mut modes: Vec<TrainMode> = Vec::new();
    for mode in [TrainMode::Mle, TrainMode::L1, TrainMode::PosCal] {
        if cfg.modes.contains(&mode) {
            modes.push(mode);
        }
    }

    let mut results: Vec<ModeResult> = Vec::new();
    let mut failures: Vec<FailureJson> = Vec::new();
    let mut mle_params: Option<ModelParams> = None;

    for &mode in &modes {
        let train_cfg = TrainConfig {
            mode,
            ..cfg.train.clone()
        };
        match train(&train_set, &val_set, &train_cfg) {
            Ok((params, log)) => {
                write_train_log_jsonl(&log, &out_dir.join(format!("trainlog_{}.jsonl", mode_name(mode))))?;
                checkpoint::save_checkpoint(
                    &params,
                    &out_dir.join(format!("checkpoint_{}.json", mode_name(mode))),
                )?;
                let (metrics, calibration, _) =
                    evaluate_on_test(&params, &test_set, &cfg.train.binning)?;
                write_calibration_csv(
                    &calibration,
                    &out_dir.join(format!("calibration_{}.csv", mode_name(mode))),
                )?;
                if mode == TrainMode::Mle {
                    mle_params = Some(params);
                }
                results.push(ModeResult {
                    mode,
                    metrics,
                    calibration,
                });
            }
            Err(CoreError::Diverged { step }) => {
                failures.push(FailureJson {
                    mode: mode_name(mode).to_string(),
                    step,
                    message: format!("training diverged at step {step}"),
                });
            }
            Err(other) => return Err(other.into()),
        }
    }

    // Temperature scaling is a post-process on the MLE model: fitted on the
    // validation logits, reported on the test split.
    let mut temperature = None;
    let mut tscal_detail: Option<(MetricReport, CalibrationReport)> = None;
    if let Some(params) = &mle_params {
        let val_trace = forward(params, val_set.features())?;
        let temp = fit_temperature(val_trace.logits(), val_set.labels())?;
        temperature = Some(temp.value());
        let test_trace = forward(params, test_set.features())?;
        let preds = apply_temperature(test_trace.logits(), temp);
        let metrics = compute_metrics(&preds, test_set.labels(), &cfg.train.binning)?;
        let table = reliability_table(&preds, test_set.labels(), &cfg.train.binning)?;
        let calibration = export_reliability(&table, &preds)?;
        write_calibration_csv(&calibration, &out_dir.join("calibration_tscal.csv"))?;
        tscal_detail = Some((metrics, calibration));
    }

    let mut task_perf = ModeValues::default();
    let mut ece_row = ModeValues::default();
    let mut details = Vec::new();
    for result in &results {
        let task = cfg.metric.extract(&result.metrics);
        let ece = Some(result.metrics.ece);
        match result.mode {
            TrainMode::Mle => {
                task_perf.mle = task;
                ece_row.mle = ece;
            }
            TrainMode::L1 => {
                task_perf.l1 = task;
                ece_row.l1 = ece;
            }
            TrainMode::PosCal => {
                task_perf.poscal = task;
                ece_row.poscal = ece;
            }
        }
        details.push(ModeDetail {
            mode: mode_name(result.mode).to_string(),
            metrics: MetricReportJson::from(&result.metrics),
        });
        let _ = &result.calibration;
    }
    if let Some((metrics, _)) = &tscal_detail {
        // Post-calibration leaves the predicted classes untouched, so only
        // the ECE column gets a tScal entry.
        ece_row.tscal = Some(metrics.ece);
        details.push(ModeDetail {
            mode: "tscal".to_string(),
            metrics: MetricReportJson::from(metrics),
        });
    }

    let report = MetricsReportFile {
        format_version: REPORT_VERSION,
        source: serde_json::to_value(&cfg.source)?,
        split: SplitSpec {
            train_frac: 1.0 - cfg.val_frac - cfg.test_frac,
            val_frac: cfg.val_frac,
            test_frac: cfg.test_frac,
            split_seed: cfg.split_seed,
        },
        train_settings: TrainSettingsJson {
            epochs: cfg.train.epochs,
            learning_rate: cfg.train.learning_rate,
            batch_size: cfg.train.batch_size,
            lambda: cfg.train.lambda,
            q_updates_per_epoch: cfg.train.q_updates_per_epoch,
            num_bins: cfg.train.binning.num_bins(),
            epsilon: cfg.train.binning.epsilon(),
            distance: distance_name(cfg.train.distance).to_string(),
            l1_weight: cfg.train.l1_weight,
            seed: cfg.train.seed,
            eval_every_steps: cfg.train.eval_every_steps,
            patience: cfg.train.patience,
            architecture: arch_name(cfg.train.arch),
            q_sample_cap: cfg.train.q_sample_cap,
        },
        task_metric: cfg.metric.name().to_string(),
        label_map: loaded.label_names.clone(),
        task_perf,
        ece: ece_row,
        temperature,
        details,
        failures,
    };
    write_metrics_report(&report, &out_dir.join("metrics.json"))?;

    let diverged = !report.failures.is_empty();
    Ok(ExperimentOutcome { report, diverged })
}

/// Aggregate over a multi-seed study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub task_perf: ModeValues,
    pub ece: ModeValues,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReportFile {
    pub format_version: u32,
    pub seeds: Vec<u64>,
    pub task_metric: String,
    pub median_task_perf: ModeValues,
    pub median_ece: ModeValues,
    pub per_seed: Vec<SeedRow>,
}

/// Runs the experiment once per seed (reseeding the generator, the split,
/// and training), writes per-seed reports into `seed_<s>/` subdirectories,
/// and aggregates medians into `aggregate.json`.
pub fn run_study(
    cfg: &ExperimentConfig,
    seeds: &[u64],
    out_dir: &Path,
) -> Result<StudyReportFile, CliError> {
    if seeds.is_empty() {
        return Err(CliError::config("study needs at least one seed"));
    }
    std::fs::create_dir_all(out_dir)?;
    let mut per_seed = Vec::new();
    let mut any_diverged = false;
    for &seed in seeds {
        let mut sub = cfg.clone();
        sub.split_seed = seed;
        sub.train.seed = seed;
        if let DataSource::Synthetic(spec) = &mut sub.source {
            spec.seed = seed;
        }
        let outcome = run_experiment(&sub, &out_dir.join(format!("seed_{seed}")))?;
        any_diverged |= outcome.diverged;
        per_seed.push(SeedRow {
            seed,
            task_perf: outcome.report.task_perf,
            ece: outcome.report.ece,
        });
    }

    let report = StudyReportFile {
        format_version: REPORT_VERSION,
        seeds: seeds.to_vec(),
        task_metric: cfg.metric.name().to_string(),
        median_task_perf: ModeValues {
            mle: median(per_seed.iter().filter_map(|r| r.task_perf.mle)),
            l1: median(per_seed.iter().filter_map(|r| r.task_perf.l1)),
            tscal: None,
            poscal: median(per_seed.iter().filter_map(|r| r.task_perf.poscal)),
        },
        median_ece: ModeValues {
            mle: median(per_seed.iter().filter_map(|r| r.ece.mle)),
            l1: median(per_seed.iter().filter_map(|r| r.ece.l1)),
            tscal: median(per_seed.iter().filter_map(|r| r.ece.tscal)),
            poscal: median(per_seed.iter().filter_map(|r| r.ece.poscal)),
        },
        per_seed,
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    std::fs::write(out_dir.join("aggregate.json"), json)?;
    if any_diverged {
        // Partial results are on disk; surface the divergence to the caller.
        return Err(CliError::Core(CoreError::Diverged { step: 0 }));
    }
    Ok(report)
}

pub fn median(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

pub use report::read_metrics_report;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::GeneratorKind;

    #[test]
    fn median_odd_and_even() {
        assert_eq!(median([3.0, 1.0, 2.0].into_iter()), Some(2.0));
        assert_eq!(median([4.0, 1.0, 2.0, 3.0].into_iter()), Some(2.5));
        assert_eq!(median(std::iter::empty()), None);
    }

    #[test]
    fn split_fractions_validated() {
        let spec = SyntheticSpec {
            generator: GeneratorKind::GaussianBlobs,
            n: 50,
            p: 2,
            k: 2,
            overlap: 1.0,
            label_noise: 0.0,
            seed: 1,
        };
        let data = generate_synthetic(&spec).unwrap();
        assert!(split_dataset(&data, 0.0, 0.2, 1).is_err());
        assert!(split_dataset(&data, 0.5, 0.5, 1).is_err());
        let (train, val, test) = split_dataset(&data, 0.2, 0.2, 1).unwrap();
        assert_eq!(train.num_samples() + val.num_samples() + test.num_samples(), 50);
        assert_eq!(train.split_tag(), SplitTag::Train);
        assert_eq!(val.split_tag(), SplitTag::Validation);
        assert_eq!(test.split_tag(), SplitTag::Test);
    }

    #[test]
    fn split_is_deterministic_and_disjoint() {
        let spec = SyntheticSpec {
            generator: GeneratorKind::GaussianBlobs,
            n: 100,
            p: 2,
            k: 2,
            overlap: 1.0,
            label_noise: 0.0,
            seed: 2,
        };
        let data = generate_synthetic(&spec).unwrap();
        let (a1, b1, c1) = split_dataset(&data, 0.1, 0.2, 7).unwrap();
        let (a2, _, _) = split_dataset(&data, 0.1, 0.2, 7).unwrap();
        assert_eq!(a1.features().data(), a2.features().data());
        assert_eq!(a1.num_samples(), 70);
        assert_eq!(b1.num_samples(), 10);
        assert_eq!(c1.num_samples(), 20);
    }
}
