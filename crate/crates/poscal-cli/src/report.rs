//! Report files: the metrics report (JSON), calibration plot data (CSV), and
//! the training-event stream (JSON lines). Every writer here has a matching
//! reader so reports round-trip losslessly.

use std::fs;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use poscal::binning::{CalibrationReport, ClassCalibration};
use poscal::metrics::MetricReport;
use poscal::train::{StopReason, TrainLog};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetricsJson {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReportJson {
    pub accuracy: f64,
    pub macro_f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positive_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matthews: Option<f64>,
    pub ece: f64,
    pub per_class: Vec<ClassMetricsJson>,
}

impl From<&MetricReport> for MetricReportJson {
    fn from(r: &MetricReport) -> Self {
        MetricReportJson {
            accuracy: r.accuracy,
            macro_f1: r.macro_f1,
            positive_f1: r.positive_f1,
            matthews: r.matthews,
            ece: r.ece,
            per_class: r
                .per_class
                .iter()
                .map(|c| ClassMetricsJson {
                    class: c.class,
                    precision: c.precision,
                    recall: c.recall,
                    f1: c.f1,
                    support: c.support,
                })
                .collect(),
        }
    }
}

/// One value per training mode, mirroring the two-sided results tables:
/// task-performance columns carry MLE/L1/PosCal, calibration columns add
/// tScal.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModeValues {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tscal: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub poscal: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeDetail {
    pub mode: String,
    pub metrics: MetricReportJson,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureJson {
    pub mode: String,
    pub step: usize,
    pub message: String,
}

/// The experiment's metrics report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReportFile {
    pub format_version: u32,
    pub source: serde_json::Value,
    pub split: SplitSpec,
    pub train_settings: TrainSettingsJson,
    pub task_metric: String,
    pub label_map: Vec<String>,
    pub task_perf: ModeValues,
    pub ece: ModeValues,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    pub details: Vec<ModeDetail>,
    pub failures: Vec<FailureJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub split_seed: u64,
}

/// Serializable echo of the training configuration (mode excluded; the modes
/// trained are the report's columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettingsJson {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub lambda: f64,
    pub q_updates_per_epoch: usize,
    pub num_bins: usize,
    pub epsilon: f64,
    pub distance: String,
    pub l1_weight: f64,
    pub seed: u64,
    pub eval_every_steps: usize,
    pub patience: usize,
    pub architecture: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_sample_cap: Option<usize>,
}

pub fn write_metrics_report(report: &MetricsReportFile, path: &Path) -> Result<(), CliError> {
    let mut json = serde_json::to_string_pretty(report)?;
    json.push('\n');
    fs::write(path, json)?;
    Ok(())
}

pub fn read_metrics_report(path: &Path) -> Result<MetricsReportFile, CliError> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Writes calibration plot data as CSV with columns
/// `class,bin_lo,bin_hi,count,mean_pred,empirical`, class-major, bins
/// ascending.
pub fn write_calibration_csv(report: &CalibrationReport, path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["class", "bin_lo", "bin_hi", "count", "mean_pred", "empirical"])?;
    for class in &report.classes {
        for b in 0..report.num_bins {
            w.write_record(&[
                class.class.to_string(),
                format!("{}", report.bin_edges[b]),
                format!("{}", report.bin_edges[b + 1]),
                class.counts[b].to_string(),
                format!("{}", class.mean_pred[b]),
                format!("{}", class.empirical[b]),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads calibration plot data back into a [`CalibrationReport`]. The sample
/// count is recovered from the per-class bin counts.
pub fn read_calibration_csv(path: &Path) -> Result<CalibrationReport, CliError> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut classes: Vec<ClassCalibration> = Vec::new();
    let mut edges: Vec<f64> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            CliError::ingestion(e.position().map_or(0, |p| p.line() as usize), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| -> Result<&str, CliError> {
            record
                .get(i)
                .ok_or_else(|| CliError::ingestion(line, "short record"))
        };
        let parse_f = |s: &str| -> Result<f64, CliError> {
            s.parse::<f64>()
                .map_err(|_| CliError::ingestion(line, format!("`{s}` is not a number")))
        };
        let class: usize = field(0)?
            .parse()
            .map_err(|_| CliError::ingestion(line, "bad class index"))?;
        let bin_lo = parse_f(field(1)?)?;
        let bin_hi = parse_f(field(2)?)?;
        let count: u64 = field(3)?
            .parse()
            .map_err(|_| CliError::ingestion(line, "bad count"))?;
        let mean_pred = parse_f(field(4)?)?;
        let empirical = parse_f(field(5)?)?;

        if classes.len() <= class {
            classes.push(ClassCalibration {
                class,
                counts: Vec::new(),
                mean_pred: Vec::new(),
                empirical: Vec::new(),
            });
        }
        let entry = &mut classes[class];
        if class == 0 {
            if edges.is_empty() {
                edges.push(bin_lo);
            }
            edges.push(bin_hi);
        }
        entry.counts.push(count);
        entry.mean_pred.push(mean_pred);
        entry.empirical.push(empirical);
    }
    let num_bins = edges.len().saturating_sub(1);
    let num_samples = classes
        .first()
        .map_or(0, |c| c.counts.iter().sum::<u64>() as usize);
    Ok(CalibrationReport {
        num_bins,
        bin_edges: edges,
        num_samples,
        classes,
    })
}

/// One line of the training-event stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TrainEvent {
    Step {
        epoch: usize,
        step: usize,
        global_step: usize,
        xent: f64,
        cal: f64,
        total: f64,
    },
    QRefresh {
        epoch: usize,
        step: usize,
        global_step: usize,
    },
    Eval {
        global_step: usize,
        xent: f64,
        cal: f64,
        total: f64,
    },
    Stop {
        reason: String,
        global_step: usize,
    },
}

/// Flattens a training log into its event stream, in chronological order.
pub fn train_log_events(log: &TrainLog) -> Vec<TrainEvent> {
    let mut events = Vec::new();
    let mut evals = log.evals.iter().peekable();
    let mut refreshes = log.q_refreshes.iter().peekable();
    // The bootstrap refresh precedes every step.
    while refreshes.peek().is_some_and(|r| r.global_step == 0) {
        let r = refreshes.next().unwrap();
        events.push(TrainEvent::QRefresh {
            epoch: r.epoch,
            step: r.step_in_epoch,
            global_step: r.global_step,
        });
    }
    for step in &log.steps {
        events.push(TrainEvent::Step {
            epoch: step.epoch,
            step: step.step_in_epoch,
            global_step: step.global_step,
            xent: step.xent,
            cal: step.cal,
            total: step.total,
        });
        while refreshes.peek().is_some_and(|r| r.global_step == step.global_step) {
            let r = refreshes.next().unwrap();
            events.push(TrainEvent::QRefresh {
                epoch: r.epoch,
                step: r.step_in_epoch,
                global_step: r.global_step,
            });
        }
        while evals.peek().is_some_and(|e| e.global_step == step.global_step) {
            let e = evals.next().unwrap();
            events.push(TrainEvent::Eval {
                global_step: e.global_step,
                xent: e.val_xent,
                cal: e.val_cal,
                total: e.val_total,
            });
        }
    }
    let (reason, global_step) = match log.stop {
        StopReason::EpochsExhausted => (
            "epochs_exhausted".to_string(),
            log.steps.last().map_or(0, |s| s.global_step),
        ),
        StopReason::EarlyStopped { global_step } => ("early_stopped".to_string(), global_step),
    };
    events.push(TrainEvent::Stop {
        reason,
        global_step,
    });
    events
}

pub fn write_train_log_jsonl(log: &TrainLog, path: &Path) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    for event in train_log_events(log) {
        serde_json::to_writer(&mut w, &event)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_train_log_jsonl(path: &Path) -> Result<Vec<TrainEvent>, CliError> {
    let mut events = Vec::new();
    for (idx, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        events.push(
            serde_json::from_str(&text)
                .map_err(|e| CliError::ingestion(idx + 1, e.to_string()))?,
        );
    }
    Ok(events)
}
