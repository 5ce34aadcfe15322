//! Post-hoc temperature scaling: divide the logits by a scalar fitted on a
//! validation set. Rescales confidence without changing any predicted class.

use alloc::format;

use crate::data::{softmax, Logits, PredictionMatrix};
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

/// Lower bound of the temperature search range.
pub const TEMPERATURE_MIN: f64 = 0.05;
/// Upper bound of the temperature search range.
pub const TEMPERATURE_MAX: f64 = 20.0;

/// A fitted scaling temperature, restricted to
/// `[TEMPERATURE_MIN, TEMPERATURE_MAX]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(t: f64) -> Result<Self> {
        if !(t.is_finite() && (TEMPERATURE_MIN..=TEMPERATURE_MAX).contains(&t)) {
            return Err(Error::invalid(format!(
                "temperature {t} outside [{TEMPERATURE_MIN}, {TEMPERATURE_MAX}]"
            )));
        }
        Ok(Temperature(t))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// `softmax(logits / t)`. The per-row argmax is unchanged for any valid `t`.
pub fn apply_temperature(logits: &Logits, temp: Temperature) -> PredictionMatrix {
    let src = logits.matrix();
    let mut scaled = Matrix::zeros(src.rows(), src.cols());
    for (out, &z) in scaled.data_mut().iter_mut().zip(src.data()) {
        *out = z / temp.value();
    }
    // Dividing finite logits by t >= 0.05 keeps them finite.
    let scaled = Logits::new(scaled).expect("scaled logits stay finite");
    softmax(&scaled)
}

/// Fits the temperature minimizing validation cross-entropy, by golden-section
/// search on `ln t` to an absolute tolerance of 1e-4.
///
/// The search interval contains `t = 1`, and the result never has a higher
/// validation NLL than `t = 1` does.
pub fn fit_temperature(val_logits: &Logits, val_labels: &[usize]) -> Result<Temperature> {
    if val_logits.rows() == 0 {
        return Err(Error::invalid("temperature fit needs a nonempty validation set"));
    }
    if val_logits.rows() != val_labels.len() {
        return Err(Error::invalid(format!(
            "{} logit rows but {} labels",
            val_logits.rows(),
            val_labels.len()
        )));
    }
    let k = val_logits.cols();
    if let Some(&bad) = val_labels.iter().find(|&&y| y >= k) {
        return Err(Error::invalid(format!("label {bad} out of range for {k} classes")));
    }

    let nll_at = |ln_t: f64| scaled_nll(val_logits, val_labels, math::exp(ln_t));

    // Golden-section search on the log scale. The NLL is convex in 1/t, hence
    // unimodal in ln t, so the bracketing shrink converges to the minimum.
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut lo = math::ln(TEMPERATURE_MIN);
    let mut hi = math::ln(TEMPERATURE_MAX);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = nll_at(x1);
    let mut f2 = nll_at(x2);
    while hi - lo > 1e-4 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = nll_at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = nll_at(x2);
        }
    }
    let fitted = math::exp(0.5 * (lo + hi)).clamp(TEMPERATURE_MIN, TEMPERATURE_MAX);

    // The identity temperature is inside the search space; keep it when the
    // bracketing landed a hair worse.
    let fitted = if scaled_nll(val_logits, val_labels, 1.0) < scaled_nll(val_logits, val_labels, fitted)
    {
        1.0
    } else {
        fitted
    };
    Temperature::new(fitted)
}

fn scaled_nll(logits: &Logits, labels: &[usize], t: f64) -> f64 {
    let src = logits.matrix();
    let mut nll = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let row = src.row(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b / t));
        let mut sum = 0.0;
        for &z in row {
            sum += math::exp(z / t - max);
        }
        // log-sum-exp(z/t) - z_y/t
        nll += math::ln(sum) + max - row[y] / t;
    }
    nll
}
