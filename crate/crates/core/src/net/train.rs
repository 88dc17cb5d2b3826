//! Unsupervised training against the rod objective.
//!
//! Each sample's loss is the objective `J = U + (eta/2) Phi` of the strain
//! field synthesized from the network output, scored against the
//! measurement set rebuilt from that sample's own input features. No
//! ground-truth coefficients are involved.

use super::{Adam, MlpModel, Trace};
use crate::datagen::{features_of, measurement_from_features, TrainingSet};
use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::reduction::{BasisSet, CoefficientVector};
use crate::rod::{evaluate, integrate_kinematics, mismatch_cost, objective, MeasurementSet, RodProperties, StrainField};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// The fixed parts of the reconstruction problem.
#[derive(Clone, Copy, Debug)]
pub struct Problem<'a> {
    pub basis: &'a BasisSet,
    pub rod: &'a RodProperties,
    pub base: Pose,
    pub eta: f64,
}

impl Problem<'_> {
    /// `eta * N_m`, the divisor of the normalized loss.
    pub fn normalizer(&self, n_markers: usize) -> f64 {
        self.eta * n_markers as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub val_fraction: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![128, 64],
            learning_rate: 1e-3,
            batch_size: 128,
            epochs: 100,
            val_fraction: 0.2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::config("val_fraction", "must lie in (0, 1)"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::config("batch_size", "batch size and epochs must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden_sizes", "hidden layers must be nonempty"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochStats {
    pub train_loss: f64,
    pub val_loss: f64,
    pub train_normalized: f64,
    pub val_normalized: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// Index into `epochs` of the returned model.
    pub best_epoch: usize,
}

fn check_layout(model: &MlpModel, marker_s: &[f64], length: f64) -> Result<()> {
    let same = model.marker_s.len() == marker_s.len()
        && model
            .marker_s
            .iter()
            .zip(marker_s)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * length);
    if !same {
        return Err(Error::MarkerLayoutMismatch(format!(
            "model expects markers at {:?}, got {:?}",
            model.marker_s, marker_s
        )));
    }
    Ok(())
}

/// Loss of one feature row and, if requested, the gradient with respect to
/// the network's standardized outputs.
fn sample_eval(
    model: &MlpModel,
    p: &Problem,
    marker_s: &[f64],
    row: &[f64],
    with_grad: bool,
) -> Result<(f64, Option<(Trace, Vec<f64>)>)> {
    let meas = measurement_from_features(marker_s, row, p.rod.length)?;
    let trace = model.mlp.forward_trace(&model.normalize_input(row))?;
    let field = p.basis.synthesize(&model.coefficients(&trace.output))?;
    if !with_grad {
        return Ok((objective(&field, &p.base, &meas, p.rod, p.eta)?, None));
    }
    let eval = evaluate(&field, &p.base, &meas, p.rod, p.eta)?;
    let grad_z = p
        .basis
        .pullback(&eval.gradient)
        .iter()
        .zip(&model.coeff_std)
        .map(|(g, s)| g * s)
        .collect();
    Ok((eval.value, Some((trace, grad_z))))
}

/// Objective of sample `k` of `set` under `model`.
pub fn sample_loss(model: &MlpModel, p: &Problem, set: &TrainingSet, k: usize) -> Result<f64> {
    Ok(sample_eval(model, p, &set.marker_s, set.row(k), false)?.0)
}

/// Mean objective over `batch` (indices into `set`).
pub fn loss(model: &MlpModel, p: &Problem, set: &TrainingSet, batch: &[usize]) -> Result<f64> {
    check_layout(model, &set.marker_s, p.rod.length)?;
    let losses = crate::par::map(batch, |&k| sample_loss(model, p, set, k));
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / batch.len() as f64)
}

/// Mean objective over `batch` and its gradient with respect to every
/// network parameter. Per-sample work runs in parallel; accumulation is
/// sequential in batch order, so the result is independent of threading.
pub fn loss_gradient(model: &MlpModel, p: &Problem, set: &TrainingSet, batch: &[usize]) -> Result<(f64, Vec<f64>)> {
    check_layout(model, &set.marker_s, p.rod.length)?;
    let per_sample = crate::par::map(batch, |&k| sample_eval(model, p, &set.marker_s, set.row(k), true));
    let inv = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; model.mlp.n_params()];
    for r in per_sample {
        let (value, g) = r?;
        let (trace, grad_z) = g.expect("gradient requested");
        let scaled: Vec<f64> = grad_z.iter().map(|g| g * inv).collect();
        model.mlp.backward(&trace, &scaled, &mut grad);
        total += value;
    }
    Ok((total * inv, grad))
}

/// Seeded split of `0..n` into (training, validation) indices.
pub fn split_indices(n: usize, val_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::InvalidInput("training needs at least 2 samples".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    idx.shuffle(&mut rng);
    let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1);
    let val = idx.split_off(n - n_val);
    Ok((idx, val))
}

/// Trains a fresh model and returns it at its best validation epoch.
pub fn train(cfg: &TrainConfig, set: &TrainingSet, p: &Problem) -> Result<(MlpModel, TrainReport)> {
    cfg.validate()?;
    let (mut train_idx, val_idx) = split_indices(set.len(), cfg.val_fraction, cfg.seed)?;
    let mut model = MlpModel::new(&cfg.hidden, &set.marker_s, p.rod.length, p.basis, cfg.seed)?;
    let mut adam = Adam::new(model.mlp.n_params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let norm = p.normalizer(set.marker_s.len());

    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, MlpModel)> = None;
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        train_idx.shuffle(&mut rng);
        let mut sum = 0.0;
        for (b, batch) in train_idx.chunks(cfg.batch_size).enumerate() {
            let diverged = Error::Diverged { epoch, batch: b };
            let (value, grad) = loss_gradient(&model, p, set, batch).map_err(|_| Error::Diverged { epoch, batch: b })?;
            if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(diverged);
            }
            adam.step(model.mlp.params_mut(), &grad);
            sum += value * batch.len() as f64;
        }
        let train_loss = sum / train_idx.len() as f64;
        let val_loss = loss(&model, p, set, &val_idx).unwrap_or(f64::NAN);
        if !val_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: train_idx.len().div_ceil(cfg.batch_size),
            });
        }
        if best.as_ref().is_none_or(|(_, v, _)| val_loss < *v) {
            best = Some((epoch, val_loss, model.clone()));
        }
        epochs.push(EpochStats {
            train_loss,
            val_loss,
            train_normalized: train_loss / norm,
            val_normalized: val_loss / norm,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    let (best_epoch, _, model) = best.expect("at least one epoch");
    Ok((model, TrainReport { epochs, best_epoch }))
}

/// Runs `restarts` independent trainings with derived seeds and keeps the
/// one with the lowest best-epoch validation loss. Returns the winning
/// restart index as well.
pub fn train_with_restarts(
    cfg: &TrainConfig,
    set: &TrainingSet,
    p: &Problem,
    restarts: usize,
) -> Result<(MlpModel, TrainReport, usize)> {
    let mut best: Option<(MlpModel, TrainReport, usize)> = None;
    for r in 0..restarts.max(1) {
        let run = TrainConfig {
            seed: cfg.seed.wrapping_add(r as u64),
            ..cfg.clone()
        };
        let (model, report) = train(&run, set, p)?;
        let val = report.epochs[report.best_epoch].val_loss;
        if best.as_ref().is_none_or(|(_, rep, _)| val < rep.epochs[rep.best_epoch].val_loss) {
            best = Some((model, report, r));
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Reconstruction of one frame.
#[derive(Clone, Debug)]
pub struct Inference {
    pub coefficients: CoefficientVector,
    pub field: StrainField,
    pub poses: Vec<Pose>,
    /// Mismatch cost per marker, `Phi / N_m`.
    pub error: f64,
}

/// Single-frame reconstruction: features, network, synthesis, integration.
pub fn infer(model: &MlpModel, p: &Problem, meas: &MeasurementSet) -> Result<Inference> {
    check_layout(model, &meas.arc_lengths(), p.rod.length)?;
    let coefficients = model.forward(&features_of(meas))?;
    let field = p.basis.synthesize(&coefficients)?;
    let poses = integrate_kinematics(&field, &p.base)?;
    let error = mismatch_cost(&field, &poses, meas, p.rod.length)? / meas.len() as f64;
    Ok(Inference {
        coefficients,
        field,
        poses,
        error,
    })
}
