//! Shared generators for the oracle-driven test suites.

use poscal::{softmax, Logits, Matrix, PredictionMatrix};
use rand::Rng;

pub fn random_logits(n: usize, k: usize, scale: f64, rng: &mut impl Rng) -> Logits {
    let mut m = Matrix::zeros(n, k);
    for v in m.data_mut() {
        *v = rng.gen_range(-scale..scale);
    }
    Logits::new(m).unwrap()
}

/// Row-stochastic predictions from a softmax over random logits.
pub fn random_preds(n: usize, k: usize, scale: f64, rng: &mut impl Rng) -> PredictionMatrix {
    softmax(&random_logits(n, k, scale, rng))
}

/// Binary predictions with the positive probability uniform on [0, 1]; every
/// bin ends up heavily occupied.
pub fn uniform_binary_preds(n: usize, rng: &mut impl Rng) -> PredictionMatrix {
    let mut m = Matrix::zeros(n, 2);
    for i in 0..n {
        let p: f64 = rng.gen_range(0.0..1.0);
        m.set(i, 0, 1.0 - p);
        m.set(i, 1, p);
    }
    PredictionMatrix::new(m).unwrap()
}

pub fn random_labels(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..n).map(|_| rng.gen_range(0..k)).collect()
}

/// Calibrated sampler: each label drawn from its own prediction row.
pub fn labels_from_preds(preds: &PredictionMatrix, rng: &mut impl Rng) -> Vec<usize> {
    (0..preds.rows())
        .map(|i| {
            let u: f64 = rng.gen_range(0.0..1.0);
            let row = preds.row(i);
            let mut acc = 0.0;
            for (j, &p) in row.iter().enumerate() {
                acc += p;
                if u < acc {
                    return j;
                }
            }
            row.len() - 1
        })
        .collect()
}

pub fn preds_to_vecs(preds: &PredictionMatrix) -> Vec<Vec<f64>> {
    (0..preds.rows()).map(|i| preds.row(i).to_vec()).collect()
}
