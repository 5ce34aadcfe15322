//! The combined training objective: cross-entropy plus a weighted calibration
//! loss, and its exact gradient with respect to the logits.
//!
//! The calibration loss compares each predicted probability against the
//! empirical posterior of the bin it falls in, summing an elementwise
//! distance over every sample and class. Two distances are supported:
//! `p * ln(p / q)` (KL, with both arguments clamped away from 0 and 1 inside
//! the logarithm) and `(p - q)^2` (MSE).
//!
//! Gradients treat the empirical matrix as a constant: the bin assignment and
//! the looked-up `q` values are refreshed on a schedule by the training loop
//! and are not differentiated through. Losses are sums over samples, not
//! means; the learning rate absorbs the scale.

use alloc::format;
use alloc::vec::Vec;

use crate::binning::EmpiricalProbMatrix;
use crate::data::{bin_index, softmax, BinningConfig, Logits, PredictionMatrix};
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

/// Elementwise distance used by the calibration loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceKind {
    KlDivergence,
    MeanSquaredError,
}

/// Decomposition of one combined-loss evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    pub xent: f64,
    pub cal: f64,
    pub lambda: f64,
    /// Always `xent + lambda * cal`, computed with exactly that expression.
    pub total: f64,
}

/// Cross-entropy summed over samples: `-sum_i sum_j y_ij ln(p_ij)`, with the
/// probability clamped to `[epsilon, 1]` inside the logarithm.
pub fn xent_loss(preds: &PredictionMatrix, labels: &[usize], epsilon: f64) -> Result<f64> {
    check_labels(preds, labels)?;
    let mut sum = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let p = preds.get(i, y).clamp(epsilon, 1.0);
        sum -= math::ln(p);
    }
    Ok(sum)
}

/// Calibration loss: `sum_i sum_j d(p_ij, q_ij)` where `q_ij` is the
/// empirical posterior of class `j` in the bin `p_ij` falls into.
pub fn cal_loss(
    preds: &PredictionMatrix,
    q_lookup: &EmpiricalProbMatrix,
    cfg: &BinningConfig,
    kind: DistanceKind,
) -> Result<f64> {
    check_q_lookup(preds, q_lookup, cfg)?;
    let eps = cfg.epsilon();
    let mut sum = 0.0;
    for i in 0..preds.rows() {
        for j in 0..preds.cols() {
            let p = preds.get(i, j);
            let q = q_lookup.q(bin_index(p, cfg)?, j);
            sum += match kind {
                DistanceKind::KlDivergence => {
                    let pc = p.clamp(eps, 1.0 - eps);
                    let qc = q.clamp(eps, 1.0 - eps);
                    pc * math::ln(pc / qc)
                }
                DistanceKind::MeanSquaredError => {
                    let d = p - q;
                    d * d
                }
            };
        }
    }
    Ok(sum)
}

/// Combined loss `xent + lambda * cal`.
pub fn poscal_loss(
    preds: &PredictionMatrix,
    labels: &[usize],
    q_lookup: &EmpiricalProbMatrix,
    cfg: &BinningConfig,
    kind: DistanceKind,
    lambda: f64,
) -> Result<LossReport> {
    check_lambda(lambda)?;
    let xent = xent_loss(preds, labels, cfg.epsilon())?;
    let cal = cal_loss(preds, q_lookup, cfg, kind)?;
    Ok(LossReport {
        xent,
        cal,
        lambda,
        total: xent + lambda * cal,
    })
}

/// Exact gradient of the combined loss with respect to the logits.
///
/// The empirical matrix and the bin assignments are held constant, so the
/// gradient flows only through the predicted probabilities. With `lambda = 0`
/// this is the classical softmax cross-entropy gradient `p - y` per row.
pub fn poscal_grad_logits(
    logits: &Logits,
    labels: &[usize],
    q_lookup: &EmpiricalProbMatrix,
    cfg: &BinningConfig,
    kind: DistanceKind,
    lambda: f64,
) -> Result<Matrix> {
    check_lambda(lambda)?;
    let preds = softmax(logits);
    check_labels(&preds, labels)?;
    check_q_lookup(&preds, q_lookup, cfg)?;
    let (n, k) = (preds.rows(), preds.cols());
    let eps = cfg.epsilon();
    let mut grad = Matrix::zeros(n, k);
    let mut dcal_dp = Vec::new();
    for i in 0..n {
        let p_row = preds.row(i);
        let g_row = grad.row_mut(i);

        // Cross-entropy part. Once the true-class probability is clamped the
        // loss is locally constant, so the row contributes nothing.
        if p_row[labels[i]] >= eps {
            for (j, g) in g_row.iter_mut().enumerate() {
                *g = p_row[j];
            }
            g_row[labels[i]] -= 1.0;
        }

        if lambda != 0.0 {
            // d/dp of the elementwise distance, with q (and the bin) fixed.
            dcal_dp.clear();
            for (j, &p) in p_row.iter().enumerate() {
                let q = q_lookup.q(bin_index(p, cfg)?, j);
                dcal_dp.push(match kind {
                    DistanceKind::KlDivergence => {
                        if p > eps && p < 1.0 - eps {
                            let qc = q.clamp(eps, 1.0 - eps);
                            math::ln(p / qc) + 1.0
                        } else {
                            // Clamped: the distance no longer varies with p.
                            0.0
                        }
                    }
                    DistanceKind::MeanSquaredError => 2.0 * (p - q),
                });
            }
            // Chain through the softmax Jacobian:
            // dL/dz_l = p_l * (g_l - sum_j g_j p_j).
            let inner: f64 = dcal_dp.iter().zip(p_row).map(|(g, p)| g * p).sum();
            for ((g, &p), &gp) in g_row.iter_mut().zip(p_row).zip(&dcal_dp) {
                *g += lambda * (p * (gp - inner));
            }
        }
    }
    Ok(grad)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid(format!("lambda {lambda} must be finite and >= 0")));
    }
    Ok(())
}

fn check_labels(preds: &PredictionMatrix, labels: &[usize]) -> Result<()> {
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

fn check_q_lookup(
    preds: &PredictionMatrix,
    q_lookup: &EmpiricalProbMatrix,
    cfg: &BinningConfig,
) -> Result<()> {
    if q_lookup.num_bins() != cfg.num_bins() {
        return Err(Error::invalid(format!(
            "empirical matrix has {} bins, config expects {}",
            q_lookup.num_bins(),
            cfg.num_bins()
        )));
    }
    if q_lookup.num_classes() != preds.cols() {
        return Err(Error::invalid(format!(
            "empirical matrix has {} classes, predictions have {}",
            q_lookup.num_classes(),
            preds.cols()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binning::cal_emp_prob;
    use alloc::vec;

    fn preds_of(rows: &[Vec<f64>]) -> PredictionMatrix {
        PredictionMatrix::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn xent_zero_for_perfect_prediction() {
        let preds = preds_of(&[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(xent_loss(&preds, &[0, 1], 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn xent_uniform_is_ln2() {
        let preds = preds_of(&[vec![0.5, 0.5]]);
        for label in [0, 1] {
            let loss = xent_loss(&preds, &[label], 1e-6).unwrap();
            assert!((loss - core::f64::consts::LN_2).abs() < 1e-15);
        }
    }

    #[test]
    fn cal_loss_zero_when_predictions_match_lookup() {
        // Every prediction sits in a bin whose q equals the prediction.
        let preds = preds_of(&[vec![0.25, 0.75], vec![0.25, 0.75], vec![0.25, 0.75], vec![0.25, 0.75]]);
        let cfg = BinningConfig::default();
        // Labels chosen so the occupied cells tally to exactly 0.25 and 0.75.
        let q = cal_emp_prob(&preds, &[0, 1, 1, 1], &cfg).unwrap();
        assert_eq!(q.q(2, 0), 0.25);
        assert_eq!(q.q(7, 1), 0.75);
        for kind in [DistanceKind::KlDivergence, DistanceKind::MeanSquaredError] {
            let loss = cal_loss(&preds, &q, &cfg, kind).unwrap();
            assert!(loss.abs() < 1e-12, "{kind:?} gave {loss}");
        }
    }

    #[test]
    fn cal_loss_mse_hand_value() {
        // Single entry p = 0.8 against looked-up q = 0.5: (0.8 - 0.5)^2.
        let preds = preds_of(&[vec![0.2, 0.8], vec![0.2, 0.8]]);
        let cfg = BinningConfig::default();
        // Labels [1, 0] make both occupied cells q = 0.5.
        let q = cal_emp_prob(&preds, &[1, 0], &cfg).unwrap();
        assert_eq!(q.q(8, 1), 0.5);
        let loss = cal_loss(&preds, &q, &cfg, DistanceKind::MeanSquaredError).unwrap();
        // Two samples x two classes, each cell contributing 0.09.
        assert!((loss - 4.0 * 0.09).abs() < 1e-12);
    }

    #[test]
    fn poscal_total_is_componentwise_sum() {
        let preds = preds_of(&[vec![0.3, 0.7], vec![0.6, 0.4]]);
        let cfg = BinningConfig::default();
        let q = cal_emp_prob(&preds, &[1, 0], &cfg).unwrap();
        for lambda in [0.0, 0.2, 0.6, 1.0] {
            let report =
                poscal_loss(&preds, &[1, 0], &q, &cfg, DistanceKind::KlDivergence, lambda).unwrap();
            assert_eq!(report.total, report.xent + lambda * report.cal);
        }
    }

    #[test]
    fn lambda_zero_degenerates_to_xent_bitwise() {
        let preds = preds_of(&[vec![0.3, 0.7], vec![0.6, 0.4]]);
        let cfg = BinningConfig::default();
        let q = cal_emp_prob(&preds, &[1, 0], &cfg).unwrap();
        let report =
            poscal_loss(&preds, &[1, 0], &q, &cfg, DistanceKind::MeanSquaredError, 0.0).unwrap();
        let xent = xent_loss(&preds, &[1, 0], cfg.epsilon()).unwrap();
        assert_eq!(report.total.to_bits(), xent.to_bits());
    }

    #[test]
    fn grad_lambda_zero_is_p_minus_y() {
        let logits = Logits::new(Matrix::from_rows(&[vec![0.4, -0.3, 1.1]]).unwrap()).unwrap();
        let cfg = BinningConfig::default();
        let q = EmpiricalProbMatrix::midpoint_prior(&cfg, 3);
        let grad =
            poscal_grad_logits(&logits, &[2], &q, &cfg, DistanceKind::KlDivergence, 0.0).unwrap();
        let p = softmax(&logits);
        for j in 0..3 {
            let expected = p.get(0, j) - if j == 2 { 1.0 } else { 0.0 };
            assert_eq!(grad.get(0, j), expected);
        }
    }

    #[test]
    fn kl_residual_cancels_at_matched_point() {
        // At p = q the KL element derivative is ln(p/q) + 1 = 1 per element;
        // the softmax chain then cancels it exactly, so the calibration part
        // contributes no gradient.
        let logits = Logits::new(Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap()).unwrap();
        let cfg = BinningConfig::default();
        let preds = softmax(&logits);
        // One sample of each label puts q(5, j) = 0.5 = p for both classes.
        let both = preds_of(&[vec![0.5, 0.5], vec![0.5, 0.5]]);
        let q = cal_emp_prob(&both, &[0, 1], &cfg).unwrap();
        assert_eq!(q.q(5, 0), 0.5);
        let with_cal =
            poscal_grad_logits(&logits, &[0], &q, &cfg, DistanceKind::KlDivergence, 1.0).unwrap();
        let without =
            poscal_grad_logits(&logits, &[0], &q, &cfg, DistanceKind::KlDivergence, 0.0).unwrap();
        for j in 0..2 {
            assert!((with_cal.get(0, j) - without.get(0, j)).abs() < 1e-15);
        }
        let _ = preds;
    }

    #[test]
    fn mismatched_q_dimensions_rejected() {
        let preds = preds_of(&[vec![0.5, 0.5]]);
        let cfg = BinningConfig::default();
        let q = EmpiricalProbMatrix::midpoint_prior(&cfg, 3);
        assert!(cal_loss(&preds, &q, &cfg, DistanceKind::KlDivergence).is_err());
        let cfg5 = BinningConfig::new(5, 1e-6).unwrap();
        let q2 = EmpiricalProbMatrix::midpoint_prior(&cfg, 2);
        assert!(cal_loss(&preds, &q2, &cfg5, DistanceKind::KlDivergence).is_err());
    }
}
