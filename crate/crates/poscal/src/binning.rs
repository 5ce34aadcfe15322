//! Empirical posterior estimation per probability bin.
//!
//! The central object is the `B x K` empirical probability matrix `Q`: for
//! every class `j` and bin `b`, the fraction of samples whose predicted
//! probability for class `j` falls in bin `b` and whose true label is `j`.
//! The training loop refreshes `Q` on a schedule and the calibration loss
//! pulls predictions toward it. The same tallies, kept per class and bin with
//! the mean predicted probability, form the reliability tables behind ECE and
//! calibration histograms.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{bin_index, BinningConfig, PredictionMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// The `B x K` matrix of empirical posteriors, with the integer bin
/// occupancies it was computed from.
///
/// Occupied cells hold the exact ratio `positives / count`; empty cells fall
/// back to the bin midpoint `(b + 0.5) / B`, the perfectly calibrated value,
/// so they exert no systematic pull on the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalProbMatrix {
    q: Matrix,
    counts: Vec<u64>,
    num_bins: usize,
    num_classes: usize,
}

impl EmpiricalProbMatrix {
    /// Matrix with no observations: every cell at its bin midpoint.
    pub fn midpoint_prior(cfg: &BinningConfig, num_classes: usize) -> Self {
        let num_bins = cfg.num_bins();
        let mut q = Matrix::zeros(num_bins, num_classes);
        for b in 0..num_bins {
            let mid = cfg.bin_midpoint(b);
            for j in 0..num_classes {
                q.set(b, j, mid);
            }
        }
        EmpiricalProbMatrix {
            q,
            counts: vec![0; num_bins * num_classes],
            num_bins,
            num_classes,
        }
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Empirical posterior for bin `b`, class `j`.
    #[inline]
    pub fn q(&self, b: usize, j: usize) -> f64 {
        self.q.get(b, j)
    }

    /// Number of samples tallied into bin `b` for class `j`.
    #[inline]
    pub fn count(&self, b: usize, j: usize) -> u64 {
        self.counts[b * self.num_classes + j]
    }
}

/// Computes the empirical probability matrix from predictions and labels.
///
/// For each class `j` and bin `b`:
/// `q[b][j] = #{i : bin(p[i][j]) = b, y_i = j} / #{i : bin(p[i][j]) = b}`,
/// with the midpoint fallback for empty cells.
pub fn cal_emp_prob(
    preds: &PredictionMatrix,
    labels: &[usize],
    cfg: &BinningConfig,
) -> Result<EmpiricalProbMatrix> {
    check_shapes(preds, labels)?;
    let (n, k) = (preds.rows(), preds.cols());
    let num_bins = cfg.num_bins();
    let mut counts = vec![0u64; num_bins * k];
    let mut positives = vec![0u64; num_bins * k];
    for i in 0..n {
        for j in 0..k {
            let b = bin_index(preds.get(i, j), cfg)?;
            counts[b * k + j] += 1;
            if labels[i] == j {
                positives[b * k + j] += 1;
            }
        }
    }
    let mut q = Matrix::zeros(num_bins, k);
    for b in 0..num_bins {
        for j in 0..k {
            let c = counts[b * k + j];
            let value = if c > 0 {
                positives[b * k + j] as f64 / c as f64
            } else {
                cfg.bin_midpoint(b)
            };
            q.set(b, j, value);
        }
    }
    Ok(EmpiricalProbMatrix {
        q,
        counts,
        num_bins,
        num_classes: k,
    })
}

/// Per-(class, bin) calibration statistics: occupancy, mean predicted
/// probability, and empirical probability.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityTable {
    num_classes: usize,
    num_bins: usize,
    num_samples: usize,
    // All three are class-major: index = class * num_bins + bin.
    counts: Vec<u64>,
    mean_pred: Vec<f64>,
    empirical: Vec<f64>,
}

impl ReliabilityTable {
    /// Builds a table from raw per-cell statistics (class-major layout).
    ///
    /// Intended for constructing reference tables in tests and tools; the
    /// usual path is [`reliability_table`].
    pub fn from_parts(
        num_classes: usize,
        num_bins: usize,
        num_samples: usize,
        counts: Vec<u64>,
        mean_pred: Vec<f64>,
        empirical: Vec<f64>,
    ) -> Result<Self> {
        let cells = num_classes * num_bins;
        if counts.len() != cells || mean_pred.len() != cells || empirical.len() != cells {
            return Err(Error::invalid("reliability table arrays must be K*B long"));
        }
        Ok(ReliabilityTable {
            num_classes,
            num_bins,
            num_samples,
            counts,
            mean_pred,
            empirical,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn num_samples(&self) -> usize {
        self.num_samples
    }

    #[inline]
    pub fn count(&self, class: usize, bin: usize) -> u64 {
        self.counts[class * self.num_bins + bin]
    }

    /// Mean predicted probability of class `class` over samples in `bin`.
    #[inline]
    pub fn mean_pred(&self, class: usize, bin: usize) -> f64 {
        self.mean_pred[class * self.num_bins + bin]
    }

    /// Fraction of samples in the cell whose true label is `class`.
    #[inline]
    pub fn empirical(&self, class: usize, bin: usize) -> f64 {
        self.empirical[class * self.num_bins + bin]
    }
}

/// Tallies the reliability table for one prediction pass.
///
/// Empty cells report the bin midpoint for both the mean prediction and the
/// empirical probability; their count of zero keeps them out of every
/// weighted statistic downstream.
pub fn reliability_table(
    preds: &PredictionMatrix,
    labels: &[usize],
    cfg: &BinningConfig,
) -> Result<ReliabilityTable> {
    check_shapes(preds, labels)?;
    let (n, k) = (preds.rows(), preds.cols());
    let num_bins = cfg.num_bins();
    let mut counts = vec![0u64; k * num_bins];
    let mut pred_sums = vec![0.0f64; k * num_bins];
    let mut positives = vec![0u64; k * num_bins];
    for i in 0..n {
        for j in 0..k {
            let p = preds.get(i, j);
            let b = bin_index(p, cfg)?;
            let cell = j * num_bins + b;
            counts[cell] += 1;
            pred_sums[cell] += p;
            if labels[i] == j {
                positives[cell] += 1;
            }
        }
    }
    let mut mean_pred = vec![0.0f64; k * num_bins];
    let mut empirical = vec![0.0f64; k * num_bins];
    for j in 0..k {
        for b in 0..num_bins {
            let cell = j * num_bins + b;
            if counts[cell] > 0 {
                mean_pred[cell] = pred_sums[cell] / counts[cell] as f64;
                empirical[cell] = positives[cell] as f64 / counts[cell] as f64;
            } else {
                mean_pred[cell] = cfg.bin_midpoint(b);
                empirical[cell] = cfg.bin_midpoint(b);
            }
        }
    }
    Ok(ReliabilityTable {
        num_classes: k,
        num_bins,
        num_samples: n,
        counts,
        mean_pred,
        empirical,
    })
}

/// Plot-ready calibration data for one class: prediction histogram plus the
/// (mean predicted, empirical) pair per bin.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassCalibration {
    pub class: usize,
    pub counts: Vec<u64>,
    pub mean_pred: Vec<f64>,
    pub empirical: Vec<f64>,
}

/// Exportable calibration report backing prediction and reliability
/// histograms. Serialization lives in the CLI crate.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub num_bins: usize,
    /// `num_bins + 1` edges partitioning `[0, 1]`.
    pub bin_edges: Vec<f64>,
    pub num_samples: usize,
    pub classes: Vec<ClassCalibration>,
}

/// Flattens a reliability table into the calibration-report record.
///
/// `preds` must be the prediction pass the table was computed from; sample
/// counts are cross-checked.
pub fn export_reliability(
    table: &ReliabilityTable,
    preds: &PredictionMatrix,
) -> Result<CalibrationReport> {
    if preds.rows() != table.num_samples() || preds.cols() != table.num_classes() {
        return Err(Error::invalid(format!(
            "table built from {}x{} predictions, got {}x{}",
            table.num_samples(),
            table.num_classes(),
            preds.rows(),
            preds.cols()
        )));
    }
    let num_bins = table.num_bins();
    let bin_edges = (0..=num_bins).map(|e| e as f64 / num_bins as f64).collect();
    let classes = (0..table.num_classes())
        .map(|j| ClassCalibration {
            class: j,
            counts: (0..num_bins).map(|b| table.count(j, b)).collect(),
            mean_pred: (0..num_bins).map(|b| table.mean_pred(j, b)).collect(),
            empirical: (0..num_bins).map(|b| table.empirical(j, b)).collect(),
        })
        .collect();
    Ok(CalibrationReport {
        num_bins,
        bin_edges,
        num_samples: table.num_samples(),
        classes,
    })
}

fn check_shapes(preds: &PredictionMatrix, labels: &[usize]) -> Result<()> {
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
