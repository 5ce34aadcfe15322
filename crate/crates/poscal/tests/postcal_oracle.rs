//! Temperature scaling: planted-temperature recovery, argmax invariance,
//! and agreement between the golden-section search and a dense grid sweep.

mod common;

use common::*;
use poscal::metrics::argmax_row;
use poscal::postcal::{apply_temperature, fit_temperature, Temperature};
use poscal::{softmax, Logits, Matrix};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Labels drawn from softmax(z); logits presented as c*z. The NLL-optimal
/// rescaling is then t = c.
fn planted_instance(n: usize, k: usize, c: f64, rng: &mut impl Rng) -> (Logits, Vec<usize>) {
    let base = random_logits(n, k, 3.0, rng);
    let labels = labels_from_preds(&softmax(&base), rng);
    let mut scaled = Matrix::zeros(n, k);
    for (out, &z) in scaled.data_mut().iter_mut().zip(base.matrix().data()) {
        *out = c * z;
    }
    (Logits::new(scaled).unwrap(), labels)
}

#[test]
fn recovers_identity_temperature() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x30);
    let (logits, labels) = planted_instance(10_000, 3, 1.0, &mut rng);
    let t = fit_temperature(&logits, &labels).unwrap();
    assert!((t.value() - 1.0).abs() < 0.05, "fitted {}", t.value());
}

#[test]
fn recovers_planted_doubling() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x31);
    let (logits, labels) = planted_instance(10_000, 3, 2.0, &mut rng);
    let t = fit_temperature(&logits, &labels).unwrap();
    assert!((t.value() - 2.0).abs() < 0.2, "fitted {}", t.value());
}

#[test]
fn argmax_is_invariant_for_every_temperature() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x32);
    let logits = random_logits(200, 4, 4.0, &mut rng);
    let base = softmax(&logits);
    for t in [0.05, 0.3, 1.0, 2.0, 7.0, 20.0] {
        let scaled = apply_temperature(&logits, Temperature::new(t).unwrap());
        for i in 0..200 {
            assert_eq!(argmax_row(scaled.row(i)), argmax_row(base.row(i)));
        }
    }
}

#[test]
fn fitted_nll_never_worse_than_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x33);
    for _ in 0..10 {
        let n = rng.gen_range(5..500);
        let k = rng.gen_range(2..5);
        let logits = random_logits(n, k, 3.0, &mut rng);
        let labels = random_labels(n, k, &mut rng);
        let t = fit_temperature(&logits, &labels).unwrap();
        let nll_fit = nll(&logits, &labels, t.value());
        let nll_one = nll(&logits, &labels, 1.0);
        assert!(nll_fit <= nll_one + 1e-12, "{nll_fit} > {nll_one}");
    }
}

#[test]
fn golden_section_agrees_with_grid_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x34);
    let (logits, labels) = planted_instance(2_000, 3, 1.7, &mut rng);
    let t = fit_temperature(&logits, &labels).unwrap();

    let lo = (0.05f64).ln();
    let hi = (20.0f64).ln();
    let grid = 16_384;
    let mut values = Vec::with_capacity(grid + 1);
    for g in 0..=grid {
        let ln_t = lo + (hi - lo) * g as f64 / grid as f64;
        values.push(nll(&logits, &labels, ln_t.exp()));
    }
    let (argmin, &min_value) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap();
    // Unimodal on the grid: nonincreasing before the argmin, nondecreasing after.
    for i in 0..argmin {
        assert!(values[i] >= values[i + 1] - 1e-9);
    }
    for i in argmin..grid {
        assert!(values[i + 1] >= values[i] - 1e-9);
    }

    let grid_ln = lo + (hi - lo) * argmin as f64 / grid as f64;
    let spacing = (hi - lo) / grid as f64;
    assert!((t.value().ln() - grid_ln).abs() < 1e-3 + spacing);
    assert!(nll(&logits, &labels, t.value()) <= min_value + 1e-3);
}

fn nll(logits: &Logits, labels: &[usize], t: f64) -> f64 {
    let mut total = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.matrix().row(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b / t));
        let sum: f64 = row.iter().map(|&z| (z / t - max).exp()).sum();
        total += sum.ln() + max - row[y] / t;
    }
    total
}
