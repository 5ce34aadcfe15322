//! Classifier training with posterior calibration built into the objective.
//!
//! Most classifiers are trained on cross-entropy alone and produce posterior
//! probabilities that drift away from the empirical frequencies of being
//! correct. This crate trains softmax classifiers (logistic regression or a
//! one-hidden-layer MLP) under three regimes:
//!
//! - [`train::TrainMode::Mle`] — plain maximum-likelihood (cross-entropy);
//! - [`train::TrainMode::L1`] — MLE plus an L1 penalty on the weights;
//! - [`train::TrainMode::PosCal`] — posterior-calibrated training, which adds
//!   `lambda` times a calibration loss measuring the distance (KL or MSE)
//!   between each predicted posterior and the empirical posterior of its
//!   probability bin, re-estimated from the train set on a fixed per-epoch
//!   schedule.
//!
//! Post-hoc temperature scaling ([`postcal`]) and the usual calibration and
//! task metrics ([`metrics`]: expected calibration error, accuracy, F1,
//! Matthews correlation) round out the toolkit, together with the reliability
//! tables ([`binning`]) that back both.
//!
//! The crate is `no_std`-compatible (an allocator is required): disable the
//! default `std` feature and enable `libm` for the float math. Dataset
//! ingestion, file formats, and the command-line interface live in the
//! companion `poscal-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("poscal requires either the `std` or the `libm` feature");

pub mod binning;
pub mod data;
pub mod error;
pub mod loss;
mod math;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod postcal;
pub mod train;

pub use data::{bin_index, softmax, BinningConfig, Dataset, Logits, PredictionMatrix, SplitTag};
pub use error::{Error, Result};
pub use matrix::Matrix;
