//! Domain types shared by every module, plus the two elementary operations
//! (softmax and probability binning) everything else is built on.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

/// Which split of an experiment a dataset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Validation,
    Test,
}

/// A labelled classification dataset: `n` feature vectors in `R^p` with
/// class indices in `[0, k)`.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
    split_tag: SplitTag,
}

impl Dataset {
    /// Validates shapes, label range, and feature finiteness.
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        num_classes: usize,
        split_tag: SplitTag,
    ) -> Result<Self> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(Error::invalid("dataset needs at least one sample and one feature"));
        }
        if labels.len() != features.rows() {
            return Err(Error::invalid(format!(
                "{} labels for {} samples",
                labels.len(),
                features.rows()
            )));
        }
        if num_classes < 2 {
            return Err(Error::invalid("need at least two classes"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::invalid(format!(
                "label {bad} out of range for {num_classes} classes"
            )));
        }
        if !features.is_finite() {
            return Err(Error::invalid("features contain non-finite values"));
        }
        Ok(Dataset {
            features,
            labels,
            num_classes,
            split_tag,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.features.rows()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn split_tag(&self) -> SplitTag {
        self.split_tag
    }

    /// Same data under a different split tag.
    pub fn with_split_tag(mut self, tag: SplitTag) -> Self {
        self.split_tag = tag;
        self
    }

    /// Copies the given sample indices into a new dataset.
    pub fn subset(&self, indices: &[usize], tag: SplitTag) -> Result<Dataset> {
        let features = self.features.select_rows(indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset::new(features, labels, self.num_classes, tag)
    }
}

/// Pre-softmax scores, `n x k`. All entries are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits(Matrix);

impl Logits {
    pub fn new(values: Matrix) -> Result<Self> {
        if !values.is_finite() {
            return Err(Error::invalid("logits contain non-finite values"));
        }
        Ok(Logits(values))
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }
}

/// An `n x k` row-stochastic matrix of predicted posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix(Matrix);

/// Row sums may deviate from 1 by at most this much.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

impl PredictionMatrix {
    /// Validates that every entry lies in `[0, 1]` and every row sums to 1
    /// within [`ROW_SUM_TOLERANCE`].
    pub fn new(probs: Matrix) -> Result<Self> {
        for i in 0..probs.rows() {
            let mut sum = 0.0;
            for &p in probs.row(i) {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid(format!("probability {p} in row {i} outside [0,1]")));
                }
                sum += p;
            }
            if math::abs(sum - 1.0) > ROW_SUM_TOLERANCE {
                return Err(Error::invalid(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(PredictionMatrix(probs))
    }

    /// Constructor for outputs that are row-stochastic by construction.
    pub(crate) fn from_softmax_output(probs: Matrix) -> Self {
        PredictionMatrix(probs)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn rows(&self) -> usize {
        self.0.rows()
    }

    pub fn cols(&self) -> usize {
        self.0.cols()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0.get(row, col)
    }

    pub fn row(&self, row: usize) -> &[f64] {
        self.0.row(row)
    }
}

/// Equal-width binning of `[0, 1]` plus the probability clamp used inside
/// logarithms.
///
/// Bins are left-closed right-open except the last, which is closed at 1, so
/// bin preimages partition `[0, 1]` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct BinningConfig {
    num_bins: usize,
    epsilon: f64,
}

impl BinningConfig {
    pub fn new(num_bins: usize, epsilon: f64) -> Result<Self> {
        if num_bins < 2 {
            return Err(Error::invalid("need at least two bins"));
        }
        if !(epsilon > 0.0 && epsilon <= 0.01) {
            return Err(Error::invalid(format!("epsilon {epsilon} outside (0, 0.01]")));
        }
        Ok(BinningConfig { num_bins, epsilon })
    }

    pub fn num_bins(&self) -> usize {
        self.num_bins
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Lower edge of bin `b`.
    pub fn bin_lo(&self, b: usize) -> f64 {
        b as f64 / self.num_bins as f64
    }

    /// Upper edge of bin `b`.
    pub fn bin_hi(&self, b: usize) -> f64 {
        (b + 1) as f64 / self.num_bins as f64
    }

    /// Midpoint of bin `b`, `(b + 0.5) / B`.
    pub fn bin_midpoint(&self, b: usize) -> f64 {
        (b as f64 + 0.5) / self.num_bins as f64
    }
}

impl Default for BinningConfig {
    fn default() -> Self {
        BinningConfig {
            num_bins: 10,
            epsilon: 1e-6,
        }
    }
}

/// Numerically stable row-wise softmax (max-subtraction form).
///
/// Row sums land within [`ROW_SUM_TOLERANCE`] of 1 even for logits of
/// magnitude `1e4`, and the per-row argmax is preserved.
pub fn softmax(logits: &Logits) -> PredictionMatrix {
    let src = logits.matrix();
    let mut out = Matrix::zeros(src.rows(), src.cols());
    for i in 0..src.rows() {
        let row = src.row(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let out_row = out.row_mut(i);
        let mut sum = 0.0;
        for (o, &z) in out_row.iter_mut().zip(row) {
            let e = math::exp(z - max);
            *o = e;
            sum += e;
        }
        for o in out_row.iter_mut() {
            *o /= sum;
        }
    }
    PredictionMatrix::from_softmax_output(out)
}

/// Index of the bin containing `prob`: `min(floor(prob * B), B - 1)`.
///
/// `prob = 1.0` folds into the last bin.
pub fn bin_index(prob: f64, cfg: &BinningConfig) -> Result<usize> {
    if !(0.0..=1.0).contains(&prob) {
        return Err(Error::invalid(format!("probability {prob} outside [0,1]")));
    }
    // prob is nonnegative, so the cast truncates like floor.
    let raw = (prob * cfg.num_bins() as f64) as usize;
    Ok(raw.min(cfg.num_bins() - 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn logits_of(rows: &[Vec<f64>]) -> Logits {
        Logits::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn softmax_symmetric_row() {
        let p = softmax(&logits_of(&[vec![0.0, 0.0]]));
        assert_eq!(p.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_uniform_for_constant_rows() {
        for z in [-3.0, 0.0, 7.5] {
            let p = softmax(&logits_of(&[vec![z, z, z]]));
            for &v in p.row(0) {
                assert!((v - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn softmax_two_class_hand_value() {
        // exp-normalize of [1, 0]: [e/(e+1), 1/(e+1)].
        let p = softmax(&logits_of(&[vec![1.0, 0.0]]));
        assert!((p.get(0, 0) - 0.7310585786300049).abs() < 1e-12);
        assert!((p.get(0, 1) - 0.2689414213699951).abs() < 1e-12);
    }

    #[test]
    fn logits_reject_non_finite() {
        let m = Matrix::from_rows(&[vec![f64::NAN, 0.0]]).unwrap();
        assert!(Logits::new(m).is_err());
        let m = Matrix::from_rows(&[vec![f64::INFINITY, 0.0]]).unwrap();
        assert!(Logits::new(m).is_err());
    }

    #[test]
    fn bin_index_boundaries() {
        let cfg = BinningConfig::default();
        assert_eq!(bin_index(0.0, &cfg).unwrap(), 0);
        assert_eq!(bin_index(1.0, &cfg).unwrap(), 9);
        assert_eq!(bin_index(0.25, &cfg).unwrap(), 2);
        assert!(bin_index(-0.1, &cfg).is_err());
        assert!(bin_index(1.1, &cfg).is_err());
        assert!(bin_index(f64::NAN, &cfg).is_err());
    }

    #[test]
    fn prediction_matrix_validates_rows() {
        let bad = Matrix::from_rows(&[vec![0.9, 0.2]]).unwrap();
        assert!(PredictionMatrix::new(bad).is_err());
        let good = Matrix::from_rows(&[vec![0.9, 0.1]]).unwrap();
        assert!(PredictionMatrix::new(good).is_ok());
    }

    #[test]
    fn dataset_validation() {
        let feats = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(Dataset::new(feats.clone(), vec![0, 1], 2, SplitTag::Train).is_ok());
        assert!(Dataset::new(feats.clone(), vec![0, 2], 2, SplitTag::Train).is_err());
        assert!(Dataset::new(feats.clone(), vec![0], 2, SplitTag::Train).is_err());
        assert!(Dataset::new(feats, vec![0, 1], 1, SplitTag::Train).is_err());
    }
}
