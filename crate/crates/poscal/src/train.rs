//! Mini-batch gradient-descent training with scheduled refreshes of the
//! empirical probability matrix, the MLE and L1 baseline modes, and
//! validation-loss early stopping.
//!
//! The loop is deliberately plain SGD — the update is a bare
//! `theta <- theta - eta * grad` so trajectories stay auditable. Within each
//! epoch the data is shuffled into mini-batches; at the scheduled steps the
//! model is run over the full train set and the empirical matrix `Q` is
//! recomputed from the fresh predictions. `Q` is also computed once from the
//! freshly initialized model so the very first update already has it.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::binning::{cal_emp_prob, EmpiricalProbMatrix};
use crate::data::{softmax, BinningConfig, Dataset};
use crate::error::{Error, Result};
use crate::loss::{cal_loss, poscal_grad_logits, xent_loss, DistanceKind};
use crate::model::{backward, forward, Architecture, ModelParams};

/// Training regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Cross-entropy only.
    Mle,
    /// Cross-entropy plus `l1_weight * sum(|w|)` over the weights.
    L1,
    /// Cross-entropy plus `lambda` times the calibration loss.
    PosCal,
}

/// Everything the training loop needs to know.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Weight on the calibration loss (PosCal mode only).
    pub lambda: f64,
    /// Number of `Q` refreshes per epoch; must not exceed steps per epoch.
    pub q_updates_per_epoch: usize,
    pub binning: BinningConfig,
    pub distance: DistanceKind,
    /// L1 penalty weight (L1 mode only).
    pub l1_weight: f64,
    pub seed: u64,
    /// Validation loss is checked every this many global steps.
    pub eval_every_steps: usize,
    /// Window of prior validation losses averaged by the stopping rule.
    pub patience: usize,
    pub mode: TrainMode,
    pub arch: Architecture,
    /// Optional cap on the number of train samples used per `Q` refresh.
    /// When set, a deterministic stratified subsample of that size is used.
    pub q_sample_cap: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            learning_rate: 0.1,
            batch_size: 32,
            lambda: 1.0,
            q_updates_per_epoch: 5,
            binning: BinningConfig::default(),
            distance: DistanceKind::KlDivergence,
            l1_weight: 1e-8,
            seed: 42,
            eval_every_steps: 50,
            patience: 10,
            mode: TrainMode::PosCal,
            arch: Architecture::Mlp1Hidden { hidden_width: 64 },
            q_sample_cap: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be >= 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be >= 1"));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid("lambda must be finite and >= 0"));
        }
        if self.q_updates_per_epoch == 0 {
            return Err(Error::invalid("q_updates_per_epoch must be >= 1"));
        }
        if !(self.l1_weight.is_finite() && self.l1_weight >= 0.0) {
            return Err(Error::invalid("l1_weight must be finite and >= 0"));
        }
        if self.eval_every_steps == 0 {
            return Err(Error::invalid("eval_every_steps must be >= 1"));
        }
        if self.patience == 0 {
            return Err(Error::invalid("patience must be >= 1"));
        }
        Ok(())
    }

    fn effective_lambda(&self) -> f64 {
        match self.mode {
            TrainMode::PosCal => self.lambda,
            _ => 0.0,
        }
    }

    fn effective_l1(&self) -> f64 {
        match self.mode {
            TrainMode::L1 => self.l1_weight,
            _ => 0.0,
        }
    }
}

/// The per-epoch steps (1-based) at which `Q` is refreshed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UpdateSchedule {
    steps: Vec<usize>,
}

impl UpdateSchedule {
    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    pub fn contains(&self, step_in_epoch: usize) -> bool {
        self.steps.binary_search(&step_in_epoch).is_ok()
    }
}

/// Right endpoints of `u` equal partitions of the epoch's steps, with the
/// remainder folded into the last partition.
///
/// `steps = 100, u = 5` gives `{20, 40, 60, 80, 100}`; `steps = 7, u = 2`
/// gives `{3, 7}`.
pub fn build_schedule(steps_per_epoch: usize, u: usize) -> Result<UpdateSchedule> {
    if u == 0 || u > steps_per_epoch {
        return Err(Error::invalid(format!(
            "u = {u} outside [1, steps_per_epoch = {steps_per_epoch}]"
        )));
    }
    let base = steps_per_epoch / u;
    let mut steps: Vec<usize> = (1..u).map(|i| i * base).collect();
    steps.push(steps_per_epoch);
    Ok(UpdateSchedule { steps })
}

/// Losses observed at one training step (pre-update, on the mini-batch).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub epoch: usize,
    pub step_in_epoch: usize,
    pub global_step: usize,
    pub xent: f64,
    pub cal: f64,
    /// The optimized objective: `xent + lambda * cal` plus the L1 penalty in
    /// L1 mode.
    pub total: f64,
}

/// Validation losses at one evaluation point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalRecord {
    pub global_step: usize,
    pub val_xent: f64,
    pub val_cal: f64,
    pub val_total: f64,
}

/// One refresh of the empirical probability matrix. The bootstrap refresh,
/// taken from the freshly initialized model, is recorded as epoch 0, step 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QRefresh {
    pub epoch: usize,
    pub step_in_epoch: usize,
    pub global_step: usize,
}

/// Why training ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    EpochsExhausted,
    EarlyStopped { global_step: usize },
}

/// Full record of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub steps: Vec<StepRecord>,
    pub evals: Vec<EvalRecord>,
    pub q_refreshes: Vec<QRefresh>,
    pub stop: StopReason,
}

impl TrainLog {
    /// Number of scheduled refreshes recorded in the given epoch
    /// (bootstrap excluded).
    pub fn refreshes_in_epoch(&self, epoch: usize) -> usize {
        self.q_refreshes.iter().filter(|r| r.epoch == epoch).count()
    }
}

/// Validation-loss stopping rule: halt when the current loss exceeds the
/// average of the previous `window` losses (fewer during warm-up). Never
/// fires before two evaluations exist.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    window: usize,
    history: Vec<f64>,
}

impl EarlyStopper {
    pub fn new(window: usize) -> Self {
        EarlyStopper {
            window,
            history: Vec::new(),
        }
    }

    /// Records one validation loss; returns true when training should halt.
    pub fn observe(&mut self, val_loss: f64) -> bool {
        let stop = if self.history.is_empty() {
            false
        } else {
            let w = self.window.min(self.history.len());
            let mean = self.history[self.history.len() - w..].iter().sum::<f64>() / w as f64;
            val_loss > mean
        };
        self.history.push(val_loss);
        stop
    }
}

/// Trains a model on `train_set`, checking `val_set` for early stopping.
///
/// Identical configurations (including the seed) produce bitwise-identical
/// parameters and logs.
pub fn train(
    train_set: &Dataset,
    val_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainLog)> {
    cfg.validate()?;
    if train_set.num_classes() != val_set.num_classes() {
        return Err(Error::invalid(format!(
            "train has {} classes, validation has {}",
            train_set.num_classes(),
            val_set.num_classes()
        )));
    }
    if train_set.num_features() != val_set.num_features() {
        return Err(Error::invalid(format!(
            "train has {} features, validation has {}",
            train_set.num_features(),
            val_set.num_features()
        )));
    }
    let n = train_set.num_samples();
    let k = train_set.num_classes();
    let steps_per_epoch = n.div_ceil(cfg.batch_size);
    if cfg.q_updates_per_epoch > steps_per_epoch {
        return Err(Error::invalid(format!(
            "q_updates_per_epoch = {} exceeds steps per epoch = {steps_per_epoch}",
            cfg.q_updates_per_epoch
        )));
    }

    let lambda = cfg.effective_lambda();
    let l1 = cfg.effective_l1();
    let poscal = matches!(cfg.mode, TrainMode::PosCal);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = ModelParams::init(cfg.arch, train_set.num_features(), k, &mut rng)?;

    let mut log = TrainLog {
        steps: Vec::new(),
        evals: Vec::new(),
        q_refreshes: Vec::new(),
        stop: StopReason::EpochsExhausted,
    };

    // Bootstrap Q from the initialized model so the first update has it.
    let mut q = if poscal {
        let q0 = refresh_q(&params, train_set, cfg)?;
        log.q_refreshes.push(QRefresh {
            epoch: 0,
            step_in_epoch: 0,
            global_step: 0,
        });
        q0
    } else {
        EmpiricalProbMatrix::midpoint_prior(&cfg.binning, k)
    };

    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut indices: Vec<usize> = (0..n).collect();
    let mut global_step = 0usize;

    for epoch in 1..=cfg.epochs {
        indices.shuffle(&mut rng);
        let schedule = build_schedule(steps_per_epoch, cfg.q_updates_per_epoch)?;
        for (step0, batch) in indices.chunks(cfg.batch_size).enumerate() {
            let step_in_epoch = step0 + 1;
            global_step += 1;

            let batch_features = train_set.features().select_rows(batch);
            let batch_labels: Vec<usize> = batch.iter().map(|&i| train_set.labels()[i]).collect();

            let diverged = |_| Error::Diverged { step: global_step };
            let trace = forward(&params, &batch_features).map_err(diverged)?;
            let preds = softmax(trace.logits());
            let xent = xent_loss(&preds, &batch_labels, cfg.binning.epsilon())?;
            let cal = if poscal {
                cal_loss(&preds, &q, &cfg.binning, cfg.distance)?
            } else {
                0.0
            };
            let penalty = if l1 != 0.0 { l1 * params.l1_weight_norm() } else { 0.0 };
            let total = xent + lambda * cal + penalty;
            if !total.is_finite() {
                return Err(Error::Diverged { step: global_step });
            }

            let grad_logits = poscal_grad_logits(
                trace.logits(),
                &batch_labels,
                &q,
                &cfg.binning,
                cfg.distance,
                lambda,
            )?;
            let grads = backward(&trace, &params, &grad_logits)?;
            params.sgd_step(&grads, cfg.learning_rate, l1)?;
            if !params.is_finite() {
                return Err(Error::Diverged { step: global_step });
            }

            log.steps.push(StepRecord {
                epoch,
                step_in_epoch,
                global_step,
                xent,
                cal,
                total,
            });

            if poscal && schedule.contains(step_in_epoch) {
                q = refresh_q(&params, train_set, cfg)?;
                log.q_refreshes.push(QRefresh {
                    epoch,
                    step_in_epoch,
                    global_step,
                });
            }

            if global_step % cfg.eval_every_steps == 0 {
                let eval = evaluate(&params, val_set, &q, cfg, lambda, l1, global_step)?;
                log.evals.push(eval);
                if stopper.observe(eval.val_total) {
                    log.stop = StopReason::EarlyStopped { global_step };
                    return Ok((params, log));
                }
            }
        }
    }

    Ok((params, log))
}

/// Validation loss under the mode's own objective, using the current `Q`.
fn evaluate(
    params: &ModelParams,
    val_set: &Dataset,
    q: &EmpiricalProbMatrix,
    cfg: &TrainConfig,
    lambda: f64,
    l1: f64,
    global_step: usize,
) -> Result<EvalRecord> {
    let trace =
        forward(params, val_set.features()).map_err(|_| Error::Diverged { step: global_step })?;
    let preds = softmax(trace.logits());
    let val_xent = xent_loss(&preds, val_set.labels(), cfg.binning.epsilon())?;
    let val_cal = if matches!(cfg.mode, TrainMode::PosCal) {
        cal_loss(&preds, q, &cfg.binning, cfg.distance)?
    } else {
        0.0
    };
    let penalty = if l1 != 0.0 { l1 * params.l1_weight_norm() } else { 0.0 };
    Ok(EvalRecord {
        global_step,
        val_xent,
        val_cal,
        val_total: val_xent + lambda * val_cal + penalty,
    })
}

/// Runs the model over the train set (or a stratified subsample when capped)
/// and recomputes the empirical probability matrix.
fn refresh_q(
    params: &ModelParams,
    train_set: &Dataset,
    cfg: &TrainConfig,
) -> Result<EmpiricalProbMatrix> {
    let n = train_set.num_samples();
    match cfg.q_sample_cap {
        Some(cap) if cap < n => {
            let indices = stratified_indices(train_set.labels(), train_set.num_classes(), cap);
            let features = train_set.features().select_rows(&indices);
            let labels: Vec<usize> = indices.iter().map(|&i| train_set.labels()[i]).collect();
            let trace = forward(params, &features)?;
            cal_emp_prob(&softmax(trace.logits()), &labels, &cfg.binning)
        }
        _ => {
            let trace = forward(params, train_set.features())?;
            cal_emp_prob(&softmax(trace.logits()), train_set.labels(), &cfg.binning)
        }
    }
}

/// Deterministic stratified subsample: per class, evenly spaced picks over
/// the class's samples in dataset order, sized proportionally to the class.
fn stratified_indices(labels: &[usize], num_classes: usize, cap: usize) -> Vec<usize> {
    let n = labels.len();
    let mut per_class: Vec<Vec<usize>> = alloc::vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        per_class[y].push(i);
    }
    let mut picked = Vec::with_capacity(cap);
    for class_indices in &per_class {
        if class_indices.is_empty() {
            continue;
        }
        let share = ((cap as f64 * class_indices.len() as f64 / n as f64 + 0.5) as usize)
            .clamp(1, class_indices.len());
        let stride = class_indices.len() as f64 / share as f64;
        for t in 0..share {
            picked.push(class_indices[(t as f64 * stride) as usize]);
        }
    }
    picked.sort_unstable();
    picked
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_equal_partition() {
        assert_eq!(build_schedule(100, 5).unwrap().steps(), &[20, 40, 60, 80, 100]);
    }

    #[test]
    fn schedule_remainder_folds_into_last_part() {
        assert_eq!(build_schedule(7, 2).unwrap().steps(), &[3, 7]);
    }

    #[test]
    fn schedule_degenerate_maximum() {
        let s = build_schedule(6, 6).unwrap();
        assert_eq!(s.steps(), &[1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn schedule_rejects_out_of_range_u() {
        assert!(build_schedule(5, 0).is_err());
        assert!(build_schedule(5, 6).is_err());
    }

    #[test]
    fn early_stopper_never_fires_on_first_eval() {
        let mut s = EarlyStopper::new(10);
        assert!(!s.observe(f64::INFINITY));
        assert!(s.observe(1.0) || true); // second observation may fire
    }

    #[test]
    fn early_stopper_warm_up_averages_available_history() {
        let mut s = EarlyStopper::new(10);
        assert!(!s.observe(4.0));
        // Mean of the single prior loss is 4.0; 5.0 exceeds it.
        assert!(s.observe(5.0));
    }

    #[test]
    fn early_stopper_windows_last_ten() {
        let mut s = EarlyStopper::new(10);
        // Twelve decreasing losses from 12 down to 1: never stops.
        for v in (1..=12).rev() {
            assert!(!s.observe(v as f64));
        }
        // Window holds 10..=1 with mean 5.5; 5.4 does not fire, 5.6 would.
        assert!(!s.observe(5.4));
        let mut spike = s.clone();
        assert!(spike.observe(f64::MAX));
    }

    #[test]
    fn stratified_subsample_is_deterministic_and_covers_classes() {
        let labels: Vec<usize> = (0..100).map(|i| i % 4).collect();
        let a = stratified_indices(&labels, 4, 20);
        let b = stratified_indices(&labels, 4, 20);
        assert_eq!(a, b);
        for class in 0..4 {
            assert!(a.iter().any(|&i| labels[i] == class));
        }
        assert!(a.len() <= 24);
    }
}
