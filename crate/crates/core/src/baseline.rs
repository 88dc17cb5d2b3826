//! Direct per-frame reconstruction by gradient descent on every node strain.
//!
//! The decision variable is the full discretized strain field (6 values per
//! node), so the solver can represent anything the basis can and more. With
//! the Armijo rule each line search starts from a Barzilai-Borwein step and
//! backtracks until sufficient decrease, so accepted objectives never
//! increase.

use crate::error::{Error, Result};
use crate::geom::Pose;
use crate::net::{infer, MlpModel, Problem};
use crate::rod::{evaluate, integrate_kinematics, objective, MeasurementSet, RodProperties, StrainField};
use std::time::Instant;

/// Smallest trial step before a line search gives up.
const MIN_STEP: f64 = 1e-20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepRule {
    Fixed,
    Armijo { c: f64, shrink: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitStrategy {
    Rest,
    PreviousFrame,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub step_rule: StepRule,
    pub initial_step: f64,
    pub grad_tol: f64,
    pub init: InitStrategy,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iters: 10_000,
            step_rule: StepRule::Armijo { c: 1e-4, shrink: 0.5 },
            initial_step: 1e-3,
            grad_tol: 1e-8,
            init: InitStrategy::Rest,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::config("solver_max_iters", "must be at least 1"));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::config("solver_initial_step", "must be positive"));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::config("solver_grad_tol", "must be positive"));
        }
        if let StepRule::Armijo { c, shrink } = self.step_rule {
            if !(c > 0.0 && c < 1.0 && shrink > 0.0 && shrink < 1.0) {
                return Err(Error::config("solver_armijo", "c and shrink must lie in (0, 1)"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub field: StrainField,
    pub poses: Vec<Pose>,
    pub objective: f64,
    pub mismatch: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub seconds: f64,
    pub converged: bool,
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn flat_gradient(g: &[[f64; 6]]) -> Vec<f64> {
    g.iter().flatten().copied().collect()
}

fn admissible(x: &[f64]) -> bool {
    x.chunks_exact(6).all(|v| v[5] > 0.0 && v.iter().all(|c| c.is_finite()))
}

/// Minimizes `J` over the node strains starting from `initial`, or from the
/// rest strain when `None`.
pub fn solve(
    meas: &MeasurementSet,
    base: &Pose,
    props: &RodProperties,
    eta: f64,
    cfg: &SolverConfig,
    initial: Option<&StrainField>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let start = Instant::now();
    let grid = props.grid();
    let mut x = match initial {
        Some(f) if f.grid() == grid.as_slice() => f.to_flat(),
        Some(_) => return Err(Error::InvalidInput("initial field grid differs from rod grid".into())),
        None => StrainField::constant(grid.clone(), props.rest_strain)?.to_flat(),
    };
    let field_of = |x: &[f64]| StrainField::from_flat(grid.clone(), x);

    let eval = evaluate(&field_of(&x)?, base, meas, props, eta)?;
    let mut value = eval.value;
    let mut g = flat_gradient(&eval.gradient);
    let mut best = (value, x.clone(), g.clone());
    let mut step = cfg.initial_step;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        let gn2 = norm_sq(&g);
        if gn2.sqrt() <= cfg.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        match cfg.step_rule {
            StepRule::Fixed => {
                x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= step * gi);
                let Ok(e) = field_of(&x).and_then(|f| evaluate(&f, base, meas, props, eta)) else {
                    break;
                };
                value = e.value;
                g = flat_gradient(&e.gradient);
                if !value.is_finite() {
                    break;
                }
                if value < best.0 {
                    best = (value, x.clone(), g.clone());
                }
            }
            StepRule::Armijo { c, shrink } => {
                if let Some((px, pg)) = &prev {
                    let (mut ss, mut sy) = (0.0, 0.0);
                    for k in 0..x.len() {
                        let s = x[k] - px[k];
                        ss += s * s;
                        sy += s * (g[k] - pg[k]);
                    }
                    if sy > 0.0 {
                        step = ss / sy;
                    }
                }
                let accepted = loop {
                    let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
                    if admissible(&trial) {
                        let t = field_of(&trial).and_then(|f| objective(&f, base, meas, props, eta));
                        if let Ok(v) = t {
                            if v <= value - c * step * gn2 {
                                break Some((trial, v));
                            }
                        }
                    }
                    step *= shrink;
                    if step < MIN_STEP {
                        break None;
                    }
                };
                let Some((trial, trial_value)) = accepted else { break };
                let e = evaluate(&field_of(&trial)?, base, meas, props, eta)?;
                debug_assert!(trial_value <= value);
                prev = Some((std::mem::replace(&mut x, trial), std::mem::replace(&mut g, flat_gradient(&e.gradient))));
                value = trial_value;
                best = (value, x.clone(), g.clone());
            }
        }
    }

    let (value, x, g) = best;
    let field = field_of(&x)?;
    let poses = integrate_kinematics(&field, base)?;
    let eval = evaluate(&field, base, meas, props, eta)?;
    let grad_norm = norm_sq(&g).sqrt();
    Ok(SolveResult {
        field,
        poses,
        objective: value,
        mismatch: eval.mismatch,
        grad_norm,
        iterations,
        seconds: start.elapsed().as_secs_f64(),
        converged: converged && grad_norm <= cfg.grad_tol,
    })
}

/// Solves frames in order; with [`InitStrategy::PreviousFrame`] each solve
/// starts from the previous solution.
pub fn solve_sequence(
    frames: &[MeasurementSet],
    base: &Pose,
    props: &RodProperties,
    eta: f64,
    cfg: &SolverConfig,
) -> Result<Vec<SolveResult>> {
    let mut out: Vec<SolveResult> = Vec::with_capacity(frames.len());
    for meas in frames {
        let warm = match (cfg.init, out.last()) {
            (InitStrategy::PreviousFrame, Some(r)) => Some(&r.field),
            _ => None,
        };
        let r = solve(meas, base, props, eta, cfg, warm)?;
        out.push(r);
    }
    Ok(out)
}

/// Nearest-rank percentile of `values`, `q` in `[0, 1]`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkRow {
    pub frame: usize,
    pub nn_seconds: f64,
    pub nn_normalized_loss: f64,
    pub nn_error: f64,
    pub baseline_seconds: f64,
    pub baseline_normalized_loss: f64,
    pub baseline_error: f64,
    pub baseline_iterations: usize,
    pub baseline_converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkSummary {
    pub frames: usize,
    pub nn_median_seconds: f64,
    pub nn_p95_seconds: f64,
    pub baseline_median_seconds: f64,
    pub baseline_p95_seconds: f64,
    /// Median baseline time over median network time.
    pub speed_ratio: f64,
    pub nn_median_loss: f64,
    pub nn_p95_loss: f64,
    pub baseline_median_loss: f64,
    pub baseline_p95_loss: f64,
    /// Fraction of frames with network loss at most 10x the baseline's.
    pub within_10x: f64,
    pub baseline_converged: usize,
}

impl BenchmarkSummary {
    pub fn from_rows(rows: &[BenchmarkRow]) -> Option<Self> {
        if rows.is_empty() {
            return None;
        }
        let col = |f: fn(&BenchmarkRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
        let (nn_t, base_t) = (col(|r| r.nn_seconds), col(|r| r.baseline_seconds));
        let (nn_l, base_l) = (col(|r| r.nn_normalized_loss), col(|r| r.baseline_normalized_loss));
        let within = rows
            .iter()
            .filter(|r| r.nn_normalized_loss <= 10.0 * r.baseline_normalized_loss)
            .count();
        Some(BenchmarkSummary {
            frames: rows.len(),
            nn_median_seconds: percentile(&nn_t, 0.5),
            nn_p95_seconds: percentile(&nn_t, 0.95),
            baseline_median_seconds: percentile(&base_t, 0.5),
            baseline_p95_seconds: percentile(&base_t, 0.95),
            speed_ratio: percentile(&base_t, 0.5) / percentile(&nn_t, 0.5),
            nn_median_loss: percentile(&nn_l, 0.5),
            nn_p95_loss: percentile(&nn_l, 0.95),
            baseline_median_loss: percentile(&base_l, 0.5),
            baseline_p95_loss: percentile(&base_l, 0.95),
            within_10x: within as f64 / rows.len() as f64,
            baseline_converged: rows.iter().filter(|r| r.baseline_converged).count(),
        })
    }
}

/// Network inference against baseline solves, frame by frame, on the
/// calling thread so timings are comparable.
pub fn benchmark(
    frames: &[MeasurementSet],
    model: &MlpModel,
    p: &Problem,
    cfg: &SolverConfig,
) -> Result<Vec<BenchmarkRow>> {
    let mut rows = Vec::with_capacity(frames.len());
    for (frame, meas) in frames.iter().enumerate() {
        let norm = p.normalizer(meas.len());
        let t0 = Instant::now();
        let nn = infer(model, p, meas)?;
        let nn_seconds = t0.elapsed().as_secs_f64();
        let nn_loss = objective(&nn.field, &p.base, meas, p.rod, p.eta)?;
        let base = solve(meas, &p.base, p.rod, p.eta, cfg, None)?;
        rows.push(BenchmarkRow {
            frame,
            nn_seconds,
            nn_normalized_loss: nn_loss / norm,
            nn_error: nn.error,
            baseline_seconds: base.seconds,
            baseline_normalized_loss: base.objective / norm,
            baseline_error: base.mismatch / meas.len() as f64,
            baseline_iterations: base.iterations,
            baseline_converged: base.converged,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rod::tests::{random_instance, smooth_profile};
    use crate::rod::{even_marker_layout, measure, mismatch_cost};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn percentile_examples() {
        let v = [5.0, 1.0, 4.0, 2.0, 3.0];
        assert_eq!(percentile(&v, 0.5), 3.0);
        assert_eq!(percentile(&v, 0.95), 5.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert!(percentile(&[], 0.5).is_nan());
        assert!(BenchmarkSummary::from_rows(&[]).is_none());
    }

    fn exact_instance(seed: u64) -> (MeasurementSet, RodProperties) {
        let props = RodProperties::new(0.2, 40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let field = StrainField::from_fn(props.grid(), smooth_profile(&mut rng, props.length)).unwrap();
        let poses = integrate_kinematics(&field, &Pose::identity()).unwrap();
        let meas = measure(&field, &poses, &even_marker_layout(props.length, 4)).unwrap();
        (meas, props)
    }

    #[test]
    fn armijo_is_monotone_and_improves_mismatch() {
        let (_, base, meas, props) = random_instance(3, 30, 4);
        let cfg = SolverConfig {
            max_iters: 300,
            ..SolverConfig::default()
        };
        let rest = StrainField::constant(props.grid(), props.rest_strain).unwrap();
        let phi0 = mismatch_cost(&rest, &integrate_kinematics(&rest, &base).unwrap(), &meas, props.length).unwrap();
        let mut last = f64::INFINITY;
        for iters in [1, 5, 20, 100, 300] {
            let r = solve(&meas, &base, &props, 1e4, &SolverConfig { max_iters: iters, ..cfg.clone() }, None).unwrap();
            assert!(r.objective <= last);
            last = r.objective;
            assert!(r.mismatch <= phi0);
        }
    }

    #[test]
    fn noiseless_measurements_are_matched() {
        let (meas, props) = exact_instance(1);
        let r = solve(&meas, &Pose::identity(), &props, 1e4, &SolverConfig::default(), None).unwrap();
        assert!(r.mismatch / meas.len() as f64 <= 1e-6, "e = {}", r.mismatch / meas.len() as f64);
        if r.converged {
            assert!(r.grad_norm <= 1e-8);
        }
    }

    #[test]
    fn warm_start_from_solution_converges_at_once() {
        let (meas, props) = exact_instance(2);
        let cfg = SolverConfig::default();
        let cold = solve(&meas, &Pose::identity(), &props, 1e4, &cfg, None).unwrap();
        let warm = solve(&meas, &Pose::identity(), &props, 1e4, &cfg, Some(&cold.field)).unwrap();
        assert!(warm.objective <= cold.objective);
        assert!(warm.iterations <= cold.iterations);
    }

    #[test]
    fn fixed_step_returns_best_iterate() {
        let (meas, props) = exact_instance(3);
        let cfg = SolverConfig {
            step_rule: StepRule::Fixed,
            initial_step: 1e-3,
            max_iters: 50,
            ..SolverConfig::default()
        };
        let r = solve(&meas, &Pose::identity(), &props, 1e4, &cfg, None).unwrap();
        let rest = StrainField::constant(props.grid(), props.rest_strain).unwrap();
        let j0 = objective(&rest, &Pose::identity(), &meas, &props, 1e4).unwrap();
        assert!(r.objective <= j0);
    }

    #[test]
    fn config_validation() {
        let bad = SolverConfig {
            max_iters: 0,
            ..SolverConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config { .. })));
    }
}
