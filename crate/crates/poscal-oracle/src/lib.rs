//! Brute-force reference implementations for the test suites.
//!
//! Everything here is written as straight-line loops over plain slices and
//! shares no arithmetic code with the production crates — these functions are
//! the independent side of every dual-route check. They are deliberately slow
//! and deliberately boring.

/// `min(floor(p * B), B - 1)`.
pub fn brute_bin_index(p: f64, num_bins: usize) -> usize {
    let mut b = 0;
    // Walk the bins instead of dividing, so this stays independent of the
    // production arithmetic.
    while b + 1 < num_bins {
        let hi = (b + 1) as f64 / num_bins as f64;
        if p < hi {
            return b;
        }
        b += 1;
    }
    b
}

/// Empirical probabilities and occupancies per (bin, class), with the
/// midpoint fallback for empty cells. Returns `(q, counts)` indexed `[b][j]`.
pub fn brute_emp_prob(
    preds: &[Vec<f64>],
    labels: &[usize],
    num_bins: usize,
) -> (Vec<Vec<f64>>, Vec<Vec<u64>>) {
    let k = preds[0].len();
    let mut counts = vec![vec![0u64; k]; num_bins];
    let mut positives = vec![vec![0u64; k]; num_bins];
    for i in 0..preds.len() {
        for j in 0..k {
            let b = brute_bin_index(preds[i][j], num_bins);
            counts[b][j] += 1;
            if labels[i] == j {
                positives[b][j] += 1;
            }
        }
    }
    let mut q = vec![vec![0.0f64; k]; num_bins];
    for b in 0..num_bins {
        for j in 0..k {
            q[b][j] = if counts[b][j] > 0 {
                positives[b][j] as f64 / counts[b][j] as f64
            } else {
                (b as f64 + 0.5) / num_bins as f64
            };
        }
    }
    (q, counts)
}

/// Per-(class, bin) reliability statistics recomputed from scratch.
pub struct BruteReliability {
    /// Indexed `[class][bin]`.
    pub counts: Vec<Vec<u64>>,
    pub mean_pred: Vec<Vec<f64>>,
    pub empirical: Vec<Vec<f64>>,
    pub n: usize,
}

pub fn brute_reliability(preds: &[Vec<f64>], labels: &[usize], num_bins: usize) -> BruteReliability {
    let k = preds[0].len();
    let mut counts = vec![vec![0u64; num_bins]; k];
    let mut pred_sums = vec![vec![0.0f64; num_bins]; k];
    let mut positives = vec![vec![0u64; num_bins]; k];
    for i in 0..preds.len() {
        for j in 0..k {
            let b = brute_bin_index(preds[i][j], num_bins);
            counts[j][b] += 1;
            pred_sums[j][b] += preds[i][j];
            if labels[i] == j {
                positives[j][b] += 1;
            }
        }
    }
    let mut mean_pred = vec![vec![0.0f64; num_bins]; k];
    let mut empirical = vec![vec![0.0f64; num_bins]; k];
    for j in 0..k {
        for b in 0..num_bins {
            if counts[j][b] > 0 {
                mean_pred[j][b] = pred_sums[j][b] / counts[j][b] as f64;
                empirical[j][b] = positives[j][b] as f64 / counts[j][b] as f64;
            } else {
                mean_pred[j][b] = (b as f64 + 0.5) / num_bins as f64;
                empirical[j][b] = (b as f64 + 0.5) / num_bins as f64;
            }
        }
    }
    BruteReliability {
        counts,
        mean_pred,
        empirical,
        n: preds.len(),
    }
}

/// ECE recomputed from raw predictions in one pass.
pub fn brute_ece(preds: &[Vec<f64>], labels: &[usize], num_bins: usize) -> f64 {
    let k = preds[0].len();
    let r = brute_reliability(preds, labels, num_bins);
    let mut sum = 0.0;
    for class in 0..k {
        for bin in 0..num_bins {
            if r.counts[class][bin] > 0 {
                sum += r.counts[class][bin] as f64 / r.n as f64
                    * (r.empirical[class][bin] - r.mean_pred[class][bin]).abs();
            }
        }
    }
    sum / k as f64
}

/// Cross-entropy summed over samples, probabilities clamped to `[eps, 1]`
/// inside the log.
pub fn brute_xent(preds: &[Vec<f64>], labels: &[usize], eps: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..preds.len() {
        let mut p = preds[i][labels[i]];
        if p < eps {
            p = eps;
        }
        if p > 1.0 {
            p = 1.0;
        }
        total -= p.ln();
    }
    total
}

/// Distance selector for [`brute_cal_loss`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BruteDistance {
    Kl,
    Mse,
}

/// Calibration loss recomputed elementwise: for each sample and class, look
/// up `q` for the bin the prediction falls in and accumulate the distance.
pub fn brute_cal_loss(
    preds: &[Vec<f64>],
    q: &[Vec<f64>],
    num_bins: usize,
    eps: f64,
    kind: BruteDistance,
) -> f64 {
    let k = preds[0].len();
    let mut total = 0.0;
    for row in preds {
        for j in 0..k {
            let p = row[j];
            let qv = q[brute_bin_index(p, num_bins)][j];
            match kind {
                BruteDistance::Kl => {
                    let mut pc = p;
                    if pc < eps {
                        pc = eps;
                    }
                    if pc > 1.0 - eps {
                        pc = 1.0 - eps;
                    }
                    let mut qc = qv;
                    if qc < eps {
                        qc = eps;
                    }
                    if qc > 1.0 - eps {
                        qc = 1.0 - eps;
                    }
                    total += pc * (pc / qc).ln();
                }
                BruteDistance::Mse => {
                    total += (p - qv) * (p - qv);
                }
            }
        }
    }
    total
}

/// Central finite differences of a scalar function, one coordinate at a time.
pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let plus = f(&probe);
        probe[i] = x[i] - step;
        let minus = f(&probe);
        probe[i] = x[i];
        grad[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

/// Relative error between a numerical and an analytical value.
pub fn relative_error(numerical: f64, analytical: f64) -> f64 {
    let num = (numerical - analytical).abs();
    let den = (numerical.abs() + analytical.abs()).max(1e-8);
    num / den
}

/// Triple-loop matrix multiply: `a` is `n x m` (rows), `b` is `m x p`.
pub fn brute_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let m = b.len();
    let p = b[0].len();
    let mut out = vec![vec![0.0; p]; n];
    for i in 0..n {
        for j in 0..p {
            let mut acc = 0.0;
            for l in 0..m {
                acc += a[i][l] * b[l][j];
            }
            out[i][j] = acc;
        }
    }
    out
}

/// Confusion matrix `cm[true][predicted]` with lowest-index tie-breaking.
pub fn brute_confusion(preds: &[Vec<f64>], labels: &[usize], k: usize) -> Vec<Vec<u64>> {
    let mut cm = vec![vec![0u64; k]; k];
    for i in 0..preds.len() {
        let mut best = 0;
        for j in 1..k {
            if preds[i][j] > preds[i][best] {
                best = j;
            }
        }
        cm[labels[i]][best] += 1;
    }
    cm
}

pub fn brute_accuracy(preds: &[Vec<f64>], labels: &[usize]) -> f64 {
    let k = preds[0].len();
    let cm = brute_confusion(preds, labels, k);
    let mut correct = 0u64;
    for c in 0..k {
        correct += cm[c][c];
    }
    correct as f64 / labels.len() as f64
}

pub fn brute_macro_f1(preds: &[Vec<f64>], labels: &[usize]) -> f64 {
    let k = preds[0].len();
    let cm = brute_confusion(preds, labels, k);
    let mut sum = 0.0;
    for c in 0..k {
        sum += f1_from_confusion(&cm, c);
    }
    sum / k as f64
}

pub fn brute_positive_f1(preds: &[Vec<f64>], labels: &[usize]) -> f64 {
    let cm = brute_confusion(preds, labels, 2);
    f1_from_confusion(&cm, 1)
}

pub fn brute_matthews(preds: &[Vec<f64>], labels: &[usize]) -> f64 {
    let cm = brute_confusion(preds, labels, 2);
    let tp = cm[1][1] as f64;
    let tn = cm[0][0] as f64;
    let fp = cm[0][1] as f64;
    let fn_ = cm[1][0] as f64;
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        0.0
    } else {
        (tp * tn - fp * fn_) / denom.sqrt()
    }
}

fn f1_from_confusion(cm: &[Vec<u64>], class: usize) -> f64 {
    let k = cm.len();
    let tp = cm[class][class] as f64;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    for other in 0..k {
        if other != class {
            fp += cm[other][class] as f64;
            fn_ += cm[class][other] as f64;
        }
    }
    let denom = 2.0 * tp + fp + fn_;
    if denom == 0.0 {
        0.0
    } else {
        2.0 * tp / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_index_walk_matches_arithmetic() {
        for b in 0..10 {
            let lo = b as f64 / 10.0;
            assert_eq!(brute_bin_index(lo, 10), b);
        }
        assert_eq!(brute_bin_index(1.0, 10), 9);
        assert_eq!(brute_bin_index(0.25, 10), 2);
    }

    #[test]
    fn central_diff_on_quadratic() {
        // f(x) = sum x_i^2 has gradient 2x, exact up to O(step^2).
        let x = vec![0.3, -1.2, 2.0];
        let grad = central_diff(|v| v.iter().map(|a| a * a).sum(), &x, 1e-5);
        for (g, xv) in grad.iter().zip(&x) {
            assert!((g - 2.0 * xv).abs() < 1e-9);
        }
    }

    #[test]
    fn matmul_identity() {
        let a = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(brute_matmul(&a, &id), a);
    }
}
