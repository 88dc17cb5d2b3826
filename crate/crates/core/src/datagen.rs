//! Synthetic strain trajectories and noisy marker training sets.
//!
//! Strain trajectories stand in for a dynamic arm simulator: each
//! trajectory draws random amplitudes for a few low-order Legendre modes in
//! arc length and scales them by a smooth temporal envelope.

use crate::error::{Error, Result};
use crate::geom::{exp_so3, Pose, Rotation, Vec3};
use crate::reduction::{sample_coefficients, BasisSet, CoefficientVector, StrainDataset};
use crate::rod::{integrate_kinematics, measure, Marker, MeasurementSet, RodProperties, StrainField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Smallest stretch the generator emits.
pub const MIN_STRETCH: f64 = 0.1;

/// Number of entries in one marker's feature row.
pub const FEATURES_PER_MARKER: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Envelope {
    /// Linear rise from 0 to 1 over the trajectory.
    Ramp,
    /// Half sine: rises from 0, peaks mid-trajectory, returns to 0.
    Sinusoid,
}

impl Envelope {
    /// Envelope value at step `t` of `steps`.
    pub fn at(self, t: usize, steps: usize) -> f64 {
        if steps < 2 {
            return 1.0;
        }
        let u = t as f64 / (steps - 1) as f64;
        match self {
            Envelope::Ramp => u,
            Envelope::Sinusoid => (std::f64::consts::PI * u).sin(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurrogateConfig {
    pub rod: RodProperties,
    pub n_modes: usize,
    /// Per-axis amplitude of the curvature modes, rad/m.
    pub amplitude_angular: Vec3,
    /// Per-axis amplitude of the shear/stretch modes.
    pub amplitude_linear: Vec3,
    pub n_trajectories: usize,
    pub steps_per_trajectory: usize,
    pub envelope: Envelope,
    pub seed: u64,
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        self.rod.validate()?;
        if self.n_modes < 1 {
            return Err(Error::config("n_modes", "must be at least 1"));
        }
        if self
            .amplitude_angular
            .iter()
            .chain(self.amplitude_linear.iter())
            .any(|a| !(*a >= 0.0 && a.is_finite()))
        {
            return Err(Error::config("amplitude", "must be finite and non-negative"));
        }
        if self.n_trajectories < 1 || self.steps_per_trajectory < 1 {
            return Err(Error::config("n_trajectories", "trajectories and steps must be positive"));
        }
        Ok(())
    }
}

/// Legendre polynomial `P_p(x)` by the three-term recurrence.
fn legendre(p: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if p == 0 {
        return prev;
    }
    for k in 1..p {
        let next = ((2 * k + 1) as f64 * x * cur - k as f64 * prev) / (k + 1) as f64;
        prev = cur;
        cur = next;
    }
    cur
}

/// All time steps of every trajectory, trajectory-major.
pub fn generate_trajectories(cfg: &SurrogateConfig) -> Result<Vec<Vec<StrainField>>> {
    cfg.validate()?;
    let grid = cfg.rod.grid();
    let length = cfg.rod.length;
    let rest = cfg.rod.rest_strain.to_array();
    let scale: [f64; 6] = std::array::from_fn(|i| {
        if i < 3 {
            cfg.amplitude_angular[i]
        } else {
            cfg.amplitude_linear[i - 3]
        }
    });
    // modes[p][n] = P_p at node n, mapped to [-1, 1].
    let modes: Vec<Vec<f64>> = (0..cfg.n_modes)
        .map(|p| grid.iter().map(|s| legendre(p, 2.0 * s / length - 1.0)).collect())
        .collect();

    crate::par::map_range(cfg.n_trajectories, |traj| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(traj as u64);
        // Higher modes get smaller amplitudes so fields stay smooth.
        let amps: Vec<[f64; 6]> = (0..cfg.n_modes)
            .map(|p| std::array::from_fn(|i| scale[i] * rng.random_range(-1.0..=1.0) / (p + 1) as f64))
            .collect();
        let shape: Vec<[f64; 6]> = (0..grid.len())
            .map(|n| {
                std::array::from_fn(|i| amps.iter().zip(&modes).map(|(a, m)| a[i] * m[n]).sum())
            })
            .collect();
        (0..cfg.steps_per_trajectory)
            .map(|t| {
                let e = cfg.envelope.at(t, cfg.steps_per_trajectory);
                let values = shape
                    .iter()
                    .map(|d| {
                        let mut v: [f64; 6] = std::array::from_fn(|i| rest[i] + e * d[i]);
                        v[5] = v[5].max(MIN_STRETCH);
                        crate::rod::StrainVector::from_array(v)
                    })
                    .collect();
                StrainField::new(grid.clone(), values)
            })
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect()
}

/// Initial strain dataset: every time step of every trajectory.
pub fn generate_initial_dataset(cfg: &SurrogateConfig) -> Result<StrainDataset> {
    StrainDataset::new(generate_trajectories(cfg)?.into_iter().flatten().collect())
}

/// `[x, d1, d3]` of a pose.
pub fn marker_features(pose: &Pose) -> [f64; FEATURES_PER_MARKER] {
    let x = pose.position;
    let d1 = pose.rotation.director(0);
    let d3 = pose.rotation.director(2);
    [x.x, x.y, x.z, d1.x, d1.y, d1.z, d3.x, d3.y, d3.z]
}

/// Inverse of [`marker_features`] with `d2 = d3 x d1`. Directors are used
/// as given, so noisy features yield a slightly non-orthonormal frame.
pub fn pose_from_features(f: &[f64]) -> Pose {
    let d1 = Vec3::new(f[3], f[4], f[5]);
    let d3 = Vec3::new(f[6], f[7], f[8]);
    Pose::new(Rotation::from_directors_unchecked(&d1, &d3), Vec3::new(f[0], f[1], f[2]))
}

/// Measurement set from one feature row.
pub fn measurement_from_features(marker_s: &[f64], row: &[f64], length: f64) -> Result<MeasurementSet> {
    if row.len() != FEATURES_PER_MARKER * marker_s.len() {
        return Err(Error::LengthMismatch {
            expected: FEATURES_PER_MARKER * marker_s.len(),
            got: row.len(),
        });
    }
    let markers = marker_s
        .iter()
        .zip(row.chunks_exact(FEATURES_PER_MARKER))
        .map(|(&s, f)| Marker {
            s,
            pose: pose_from_features(f),
        })
        .collect();
    MeasurementSet::new(markers, length)
}

/// Feature row of a measurement set.
pub fn features_of(meas: &MeasurementSet) -> Vec<f64> {
    meas.markers().iter().flat_map(|m| marker_features(&m.pose)).collect()
}

/// Gaussian measurement noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    /// Per-axis position standard deviation, meters.
    pub sigma_position: f64,
    /// Per-axis standard deviation of the rotation-noise axis-angle, radians.
    pub sigma_angle: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel {
            sigma_position: 0.0,
            sigma_angle: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_position >= 0.0 && self.sigma_angle >= 0.0) {
            return Err(Error::config("sigma", "noise levels must be non-negative"));
        }
        Ok(())
    }

    /// Noise generator for sample `k`, independent of evaluation order.
    pub fn stream(&self, k: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k);
        rng
    }

    /// Perturbs a pose: position plus isotropic Gaussian, rotation
    /// left-multiplied by the exponential of a Gaussian axis-angle.
    pub fn perturb(&self, pose: &Pose, rng: &mut impl Rng) -> Pose {
        let gauss = |sigma: f64, rng: &mut dyn rand::RngCore| -> Vec3 {
            if sigma == 0.0 {
                return Vec3::zeros();
            }
            let d = Normal::new(0.0, sigma).expect("sigma is finite");
            Vec3::new(d.sample(rng), d.sample(rng), d.sample(rng))
        };
        let dx = gauss(self.sigma_position, rng);
        let dtheta = gauss(self.sigma_angle, rng);
        Pose::new(exp_so3(&dtheta, 1.0) * pose.rotation, pose.position + dx)
    }

    pub fn perturb_set(&self, meas: &MeasurementSet, k: u64, length: f64) -> Result<MeasurementSet> {
        let mut rng = self.stream(k);
        let markers = meas
            .markers()
            .iter()
            .map(|m| Marker {
                s: m.s,
                pose: self.perturb(&m.pose, &mut rng),
            })
            .collect();
        MeasurementSet::new(markers, length)
    }
}

/// Noisy marker features for sampled postures.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub marker_s: Vec<f64>,
    /// Row-major, `FEATURES_PER_MARKER * marker_s.len()` entries per sample.
    pub features: Vec<f64>,
    /// Coefficients the postures were synthesized from; diagnostics only.
    pub ground_truth: Option<Vec<CoefficientVector>>,
}

impl TrainingSet {
    pub fn new(marker_s: Vec<f64>, features: Vec<f64>, ground_truth: Option<Vec<CoefficientVector>>) -> Result<Self> {
        let width = FEATURES_PER_MARKER * marker_s.len();
        if width == 0 || features.len() % width != 0 {
            return Err(Error::ShapeMismatch(format!(
                "{} feature values do not form rows of {width}",
                features.len()
            )));
        }
        if let Some(gt) = &ground_truth {
            if gt.len() != features.len() / width {
                return Err(Error::LengthMismatch {
                    expected: features.len() / width,
                    got: gt.len(),
                });
            }
        }
        Ok(TrainingSet {
            marker_s,
            features,
            ground_truth,
        })
    }

    pub fn width(&self) -> usize {
        FEATURES_PER_MARKER * self.marker_s.len()
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let w = self.width();
        &self.features[k * w..(k + 1) * w]
    }
}

/// Samples `k` coefficient vectors, integrates their postures, reads the
/// markers and adds noise.
pub fn build_training_set(
    basis: &BasisSet,
    rod: &RodProperties,
    base: &Pose,
    marker_s: &[f64],
    k: usize,
    noise: &NoiseModel,
    seed: u64,
) -> Result<TrainingSet> {
    noise.validate()?;
    let coeffs = sample_coefficients(basis, k, seed);
    let rows = crate::par::map(&coeffs, |c| -> Result<Vec<f64>> {
        let field = basis.synthesize(c)?;
        let poses = integrate_kinematics(&field, base)?;
        Ok(features_of(&measure(&field, &poses, marker_s)?))
    });
    let mut features = Vec::with_capacity(k * FEATURES_PER_MARKER * marker_s.len());
    for (idx, row) in rows.into_iter().enumerate() {
        let row = row?;
        if noise.sigma_position == 0.0 && noise.sigma_angle == 0.0 {
            features.extend(row);
            continue;
        }
        let meas = measurement_from_features(marker_s, &row, rod.length)?;
        features.extend(features_of(&noise.perturb_set(&meas, idx as u64, rod.length)?));
    }
    TrainingSet::new(marker_s.to_vec(), features, Some(coeffs))
}

/// One timestamped measurement in a replay log.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub time: f64,
    pub measurement: MeasurementSet,
}

/// Noisy marker measurements along held-out surrogate trajectories,
/// `n_frames` consecutive steps at `rate_hz`.
pub fn generate_frames(
    cfg: &SurrogateConfig,
    base: &Pose,
    marker_s: &[f64],
    noise: &NoiseModel,
    n_frames: usize,
    rate_hz: f64,
) -> Result<Vec<Frame>> {
    if !(rate_hz > 0.0) {
        return Err(Error::config("frame_rate_hz", "must be positive"));
    }
    let steps = cfg.steps_per_trajectory.max(1);
    let cfg = SurrogateConfig {
        n_trajectories: n_frames.div_ceil(steps).max(1),
        ..cfg.clone()
    };
    let fields: Vec<StrainField> = generate_trajectories(&cfg)?
        .into_iter()
        .flatten()
        .take(n_frames)
        .collect();
    let length = cfg.rod.length;
    crate::par::map_range(fields.len(), |i| {
        let poses = integrate_kinematics(&fields[i], base)?;
        let clean = measure(&fields[i], &poses, marker_s)?;
        Ok(Frame {
            time: i as f64 / rate_hz,
            measurement: noise.perturb_set(&clean, i as u64, length)?,
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::tests::random_pose;
    use crate::reduction::{fit_pca, PcaConfig};
    use crate::rod::{even_marker_layout, mismatch_cost};

    fn config(n_modes: usize) -> SurrogateConfig {
        SurrogateConfig {
            rod: RodProperties::new(0.2, 50).unwrap(),
            n_modes,
            amplitude_angular: Vec3::new(10.0, 10.0, 4.0),
            amplitude_linear: Vec3::new(0.02, 0.02, 0.05),
            n_trajectories: 12,
            steps_per_trajectory: 20,
            envelope: Envelope::Sinusoid,
            seed: 3,
        }
    }

    #[test]
    fn legendre_examples() {
        for x in [-1.0, -0.3, 0.0, 0.7, 1.0] {
            assert_eq!(legendre(0, x), 1.0);
            assert_eq!(legendre(1, x), x);
            assert!((legendre(2, x) - 0.5 * (3.0 * x * x - 1.0)).abs() < 1e-15);
            assert!((legendre(3, x) - 0.5 * (5.0 * x.powi(3) - 3.0 * x)).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_amplitudes_give_rest_fields() {
        let cfg = SurrogateConfig {
            amplitude_angular: Vec3::zeros(),
            amplitude_linear: Vec3::zeros(),
            ..config(3)
        };
        let data = generate_initial_dataset(&cfg).unwrap();
        assert_eq!(data.len(), 240);
        for f in data.samples() {
            assert!(f.values().iter().all(|v| *v == cfg.rod.rest_strain));
        }
    }

    #[test]
    fn dataset_is_deterministic_and_clamped() {
        let a = generate_initial_dataset(&config(4)).unwrap();
        assert_eq!(a, generate_initial_dataset(&config(4)).unwrap());
        let other = SurrogateConfig { seed: 4, ..config(4) };
        assert_ne!(a, generate_initial_dataset(&other).unwrap());
        let big = SurrogateConfig {
            amplitude_linear: Vec3::new(0.0, 0.0, 5.0),
            ..config(2)
        };
        let data = generate_initial_dataset(&big).unwrap();
        assert!(data.samples().iter().flat_map(|f| f.values()).all(|v| v.nu.z >= MIN_STRETCH));
    }

    #[test]
    fn modes_bound_intrinsic_dimension() {
        let data = generate_initial_dataset(&config(3)).unwrap();
        let basis = fit_pca(&data, &PcaConfig::new(3)).unwrap();
        for b in basis.strains() {
            assert!(b.retained_variance >= 0.99, "{}", b.retained_variance);
        }
    }

    #[test]
    fn feature_examples() {
        assert_eq!(marker_features(&Pose::identity()), [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let p = random_pose(&mut rng);
            let f = marker_features(&p);
            assert_eq!(f.len(), 9);
            let back = pose_from_features(&f);
            assert!((back.rotation.matrix() - p.rotation.matrix()).norm() <= 1e-12);
            assert_eq!(back.position, p.position);
        }
    }

    fn small_basis() -> (BasisSet, RodProperties) {
        let cfg = config(3);
        let basis = fit_pca(&generate_initial_dataset(&cfg).unwrap(), &PcaConfig::new(3)).unwrap();
        (basis, cfg.rod)
    }

    #[test]
    fn noiseless_training_set_matches_ground_truth() {
        let (basis, rod) = small_basis();
        let marker_s = even_marker_layout(rod.length, 4);
        let set = build_training_set(&basis, &rod, &Pose::identity(), &marker_s, 50, &NoiseModel::none(), 1).unwrap();
        assert_eq!(set.len(), 50);
        assert_eq!(set.width(), 36);
        for (k, c) in set.ground_truth.as_ref().unwrap().iter().enumerate() {
            let meas = measurement_from_features(&marker_s, set.row(k), rod.length).unwrap();
            let field = basis.synthesize(c).unwrap();
            let poses = integrate_kinematics(&field, &Pose::identity()).unwrap();
            assert!(mismatch_cost(&field, &poses, &meas, rod.length).unwrap() <= 1e-10);
        }
        // Mean coefficients with K = 1 and no noise: the mean posture.
        let mean = CoefficientVector(basis.coefficient_stats().0);
        let field = basis.synthesize(&mean).unwrap();
        let poses = integrate_kinematics(&field, &Pose::identity()).unwrap();
        let expected = features_of(&measure(&field, &poses, &marker_s).unwrap());
        let zero_std = BasisSet::from_parts(
            basis.grid().to_vec(),
            basis.n_basis(),
            basis
                .strains()
                .iter()
                .map(|b| crate::reduction::StrainBasis {
                    coeff_std: vec![0.0; b.coeff_std.len()],
                    ..b.clone()
                })
                .collect(),
        )
        .unwrap();
        let one = build_training_set(&zero_std, &rod, &Pose::identity(), &marker_s, 1, &NoiseModel::none(), 5).unwrap();
        assert_eq!(one.features, expected);
    }

    #[test]
    fn position_noise_rms() {
        let (basis, rod) = small_basis();
        let marker_s = even_marker_layout(rod.length, 4);
        let sigma = 1e-3 * rod.length;
        let noise = NoiseModel {
            sigma_position: sigma,
            sigma_angle: 0.5f64.to_radians(),
            seed: 11,
        };
        let clean = build_training_set(&basis, &rod, &Pose::identity(), &marker_s, 2500, &NoiseModel::none(), 2).unwrap();
        let noisy = build_training_set(&basis, &rod, &Pose::identity(), &marker_s, 2500, &noise, 2).unwrap();
        let mut sq = 0.0;
        let mut count = 0;
        for (a, b) in clean.features.chunks(9).zip(noisy.features.chunks(9)) {
            sq += (0..3).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>();
            count += 1;
            // Left-multiplied noise keeps the frame orthonormal.
            let r = pose_from_features(b).rotation;
            assert!(r.orthonormality_error() < 1e-12);
        }
        assert_eq!(count, 10_000);
        let rms = (sq / count as f64).sqrt();
        let expected = sigma * 3f64.sqrt();
        assert!((rms - expected).abs() <= 0.05 * expected, "{rms} vs {expected}");
        assert_eq!(noisy, build_training_set(&basis, &rod, &Pose::identity(), &marker_s, 2500, &noise, 2).unwrap());
    }

    #[test]
    fn frames_follow_timestamps() {
        let cfg = config(3);
        let marker_s = even_marker_layout(cfg.rod.length, 3);
        let frames = generate_frames(&cfg, &Pose::identity(), &marker_s, &NoiseModel::none(), 45, 100.0).unwrap();
        assert_eq!(frames.len(), 45);
        assert_eq!(frames[10].time, 0.1);
        assert!(frames.iter().all(|f| f.measurement.len() == 3));
    }
}
