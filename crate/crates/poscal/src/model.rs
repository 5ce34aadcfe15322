//! Forward and backward passes for the two supported classifiers.
//!
//! Gradients are hand-derived; there is no autodiff. The logit gradient comes
//! from the loss module and is chained through the layers here.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::data::Logits;
use crate::error::{Error, Result};
use crate::math;
use crate::matrix::Matrix;

/// Classifier family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    /// Single affine layer into the softmax.
    LogisticRegression,
    /// One ReLU hidden layer of the given width.
    Mlp1Hidden { hidden_width: usize },
}

/// One affine layer: `in x out` weights plus `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    fn zeros_like(other: &DenseLayer) -> DenseLayer {
        DenseLayer {
            weights: Matrix::zeros(other.weights.rows(), other.weights.cols()),
            biases: vec![0.0; other.biases.len()],
        }
    }
}

/// Trainable parameters of a classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch: Architecture,
    input_dim: usize,
    num_classes: usize,
    layers: Vec<DenseLayer>,
}

impl ModelParams {
    /// Seeded initialization: weights uniform in `±1/sqrt(fan_in)`, biases
    /// zero.
    pub fn init(
        arch: Architecture,
        input_dim: usize,
        num_classes: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        let dims = layer_dims(arch, input_dim, num_classes)?;
        let layers = dims
            .iter()
            .map(|&(fan_in, fan_out)| {
                let scale = 1.0 / math::sqrt(fan_in as f64);
                let mut weights = Matrix::zeros(fan_in, fan_out);
                for w in weights.data_mut() {
                    *w = rng.gen_range(-1.0..1.0) * scale;
                }
                DenseLayer {
                    weights,
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(ModelParams {
            arch,
            input_dim,
            num_classes,
            layers,
        })
    }

    /// Rebuilds parameters from explicit layers, validating every shape.
    pub fn from_layers(
        arch: Architecture,
        input_dim: usize,
        num_classes: usize,
        layers: Vec<DenseLayer>,
    ) -> Result<Self> {
        let dims = layer_dims(arch, input_dim, num_classes)?;
        if layers.len() != dims.len() {
            return Err(Error::invalid(format!(
                "{} layers provided, architecture needs {}",
                layers.len(),
                dims.len()
            )));
        }
        for (layer, &(fan_in, fan_out)) in layers.iter().zip(&dims) {
            if layer.weights.rows() != fan_in
                || layer.weights.cols() != fan_out
                || layer.biases.len() != fan_out
            {
                return Err(Error::invalid(format!(
                    "layer shape {}x{}+{} does not match expected {fan_in}x{fan_out}",
                    layer.weights.rows(),
                    layer.weights.cols(),
                    layer.biases.len()
                )));
            }
            if !layer.weights.is_finite() || !layer.biases.iter().all(|b| b.is_finite()) {
                return Err(Error::invalid("layer parameters contain non-finite values"));
            }
        }
        Ok(ModelParams {
            arch,
            input_dim,
            num_classes,
            layers,
        })
    }

    pub fn architecture(&self) -> Architecture {
        self.arch
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// All parameters as one flat vector (layer by layer, weights row-major,
    /// then biases).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend_from_slice(layer.weights.data());
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    /// Inverse of [`ModelParams::flatten`].
    pub fn from_flat(
        arch: Architecture,
        input_dim: usize,
        num_classes: usize,
        flat: &[f64],
    ) -> Result<Self> {
        let dims = layer_dims(arch, input_dim, num_classes)?;
        let mut layers = Vec::with_capacity(dims.len());
        let mut offset = 0;
        for &(fan_in, fan_out) in &dims {
            let w_len = fan_in * fan_out;
            if flat.len() < offset + w_len + fan_out {
                return Err(Error::invalid("flat parameter vector too short"));
            }
            let weights = Matrix::from_vec(fan_in, fan_out, flat[offset..offset + w_len].to_vec())?;
            offset += w_len;
            let biases = flat[offset..offset + fan_out].to_vec();
            offset += fan_out;
            layers.push(DenseLayer { weights, biases });
        }
        if offset != flat.len() {
            return Err(Error::invalid("flat parameter vector too long"));
        }
        ModelParams::from_layers(arch, input_dim, num_classes, layers)
    }

    /// Sum of absolute weight values, biases excluded.
    pub fn l1_weight_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.data())
            .map(|&w| math::abs(w))
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.biases.iter().all(|b| b.is_finite()))
    }

    /// One plain gradient-descent step. With `l1_weight > 0` the subgradient
    /// `sign(w)` (0 at 0) is added to the weight gradients; biases carry no
    /// penalty.
    pub fn sgd_step(&mut self, grads: &ModelGrads, learning_rate: f64, l1_weight: f64) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::invalid("gradient layer count mismatch"));
        }
        for (layer, grad) in self.layers.iter_mut().zip(&grads.layers) {
            if layer.weights.rows() != grad.weights.rows()
                || layer.weights.cols() != grad.weights.cols()
                || layer.biases.len() != grad.biases.len()
            {
                return Err(Error::invalid("gradient shape mismatch"));
            }
            for (w, &g) in layer.weights.data_mut().iter_mut().zip(grad.weights.data()) {
                let penalty = if l1_weight != 0.0 { l1_weight * sign(*w) } else { 0.0 };
                *w -= learning_rate * (g + penalty);
            }
            for (b, &g) in layer.biases.iter_mut().zip(&grad.biases) {
                *b -= learning_rate * g;
            }
        }
        Ok(())
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn layer_dims(
    arch: Architecture,
    input_dim: usize,
    num_classes: usize,
) -> Result<Vec<(usize, usize)>> {
    if input_dim == 0 {
        return Err(Error::invalid("input dimension must be positive"));
    }
    if num_classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    match arch {
        Architecture::LogisticRegression => Ok(vec![(input_dim, num_classes)]),
        Architecture::Mlp1Hidden { hidden_width } => {
            if hidden_width == 0 {
                return Err(Error::invalid("hidden width must be positive"));
            }
            Ok(vec![(input_dim, hidden_width), (hidden_width, num_classes)])
        }
    }
}

/// Activations recorded during a forward pass, as needed for backprop.
#[derive(Debug)]
pub struct ForwardTrace<'a> {
    features: &'a Matrix,
    hidden_pre: Option<Matrix>,
    hidden: Option<Matrix>,
    logits: Logits,
}

impl ForwardTrace<'_> {
    pub fn logits(&self) -> &Logits {
        &self.logits
    }
}

/// Deterministic forward pass; row `i` of the logits depends only on row `i`
/// of the features.
pub fn forward<'a>(params: &ModelParams, features: &'a Matrix) -> Result<ForwardTrace<'a>> {
    if features.cols() != params.input_dim() {
        return Err(Error::invalid(format!(
            "features have {} columns, model expects {}",
            features.cols(),
            params.input_dim()
        )));
    }
    match params.arch {
        Architecture::LogisticRegression => {
            let logits = affine(features, &params.layers[0]);
            Ok(ForwardTrace {
                features,
                hidden_pre: None,
                hidden: None,
                logits: Logits::new(logits)?,
            })
        }
        Architecture::Mlp1Hidden { .. } => {
            let hidden_pre = affine(features, &params.layers[0]);
            let mut hidden = hidden_pre.clone();
            for v in hidden.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            let logits = affine(&hidden, &params.layers[1]);
            Ok(ForwardTrace {
                features,
                hidden_pre: Some(hidden_pre),
                hidden: Some(hidden),
                logits: Logits::new(logits)?,
            })
        }
    }
}

/// Gradients with the same layout as the parameters they refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    layers: Vec<DenseLayer>,
}

impl ModelGrads {
    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Same flat layout as [`ModelParams::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend_from_slice(layer.weights.data());
            out.extend_from_slice(&layer.biases);
        }
        out
    }
}

/// Backpropagates a logit gradient to every weight and bias.
pub fn backward(
    trace: &ForwardTrace<'_>,
    params: &ModelParams,
    grad_logits: &Matrix,
) -> Result<ModelGrads> {
    let n = trace.features.rows();
    if grad_logits.rows() != n || grad_logits.cols() != params.num_classes() {
        return Err(Error::invalid(format!(
            "logit gradient is {}x{}, expected {}x{}",
            grad_logits.rows(),
            grad_logits.cols(),
            n,
            params.num_classes()
        )));
    }
    let mut layers: Vec<DenseLayer> = params.layers.iter().map(DenseLayer::zeros_like).collect();
    match params.arch {
        Architecture::LogisticRegression => {
            accumulate_affine_grads(trace.features, grad_logits, &mut layers[0]);
        }
        Architecture::Mlp1Hidden { .. } => {
            let hidden = trace.hidden.as_ref().expect("trace from mlp forward");
            let hidden_pre = trace.hidden_pre.as_ref().expect("trace from mlp forward");
            accumulate_affine_grads(hidden, grad_logits, &mut layers[1]);

            // dHidden = dLogits * W2^T, gated by the ReLU (subgradient 0 at 0).
            let w2 = &params.layers[1].weights;
            let mut grad_hidden = Matrix::zeros(n, w2.rows());
            for i in 0..n {
                let g_out = grad_logits.row(i);
                let g_hid = grad_hidden.row_mut(i);
                for (h, g) in g_hid.iter_mut().enumerate() {
                    if hidden_pre.get(i, h) > 0.0 {
                        let mut acc = 0.0;
                        for (c, &go) in g_out.iter().enumerate() {
                            acc += go * w2.get(h, c);
                        }
                        *g = acc;
                    }
                }
            }
            accumulate_affine_grads(trace.features, &grad_hidden, &mut layers[0]);
        }
    }
    Ok(ModelGrads { layers })
}

fn affine(input: &Matrix, layer: &DenseLayer) -> Matrix {
    let (n, out_dim) = (input.rows(), layer.weights.cols());
    let mut out = Matrix::zeros(n, out_dim);
    for i in 0..n {
        let x = input.row(i);
        let o = out.row_mut(i);
        o.copy_from_slice(&layer.biases);
        for (f, &xv) in x.iter().enumerate() {
            let w_row = layer.weights.row(f);
            for (c, ov) in o.iter_mut().enumerate() {
                *ov += xv * w_row[c];
            }
        }
    }
    out
}

/// dW = X^T * dOut, db = column sums of dOut.
fn accumulate_affine_grads(input: &Matrix, grad_out: &Matrix, grads: &mut DenseLayer) {
    for i in 0..input.rows() {
        let x = input.row(i);
        let g = grad_out.row(i);
        for (f, &xv) in x.iter().enumerate() {
            let w_row = grads.weights.row_mut(f);
            for (c, wv) in w_row.iter_mut().enumerate() {
                *wv += xv * g[c];
            }
        }
        for (c, bv) in grads.biases.iter_mut().enumerate() {
            *bv += g[c];
        }
    }
}
