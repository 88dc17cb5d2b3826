//! Functional dimension reduction of strain fields.
//!
//! Each of the six strain components is reduced independently: pointwise
//! mean and standard-deviation functions are estimated over the dataset,
//! the standardized samples are decomposed by PCA, and the leading
//! eigenvectors are mapped back by the standard-deviation function so that
//!
//! ```text
//! eps_i(s) = mean_i(s) + sum_j alpha_ij * basis_ij(s)
//! ```
//!
//! reconstructs unstandardized strains.

use crate::error::{Error, Result};
use crate::rod::{StrainField, StrainVector};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

/// Initial dataset of strain fields sharing one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StrainDataset {
    grid: Vec<f64>,
    samples: Vec<StrainField>,
}

impl StrainDataset {
    pub fn new(samples: Vec<StrainField>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput("dataset needs at least 2 samples".into()));
        }
        let grid = samples[0].grid().to_vec();
        if samples.iter().any(|f| f.grid() != grid.as_slice()) {
            return Err(Error::InvalidInput("all samples must share one grid".into()));
        }
        Ok(StrainDataset { grid, samples })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn samples(&self) -> &[StrainField] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples-by-grid matrix of strain component `i`.
    fn component_matrix(&self, i: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.samples.len(), self.grid.len(), |t, n| {
            self.samples[t].values()[n].component(i)
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaConfig {
    pub n_basis: usize,
    /// Freeze the linear strains at `rest_strain` with no basis functions.
    pub inextensible: bool,
    /// Pointwise std floor relative to the largest std over the grid;
    /// `None` disables the floor.
    pub std_floor: Option<f64>,
    pub rest_strain: StrainVector,
}

impl PcaConfig {
    pub fn new(n_basis: usize) -> Self {
        PcaConfig {
            n_basis,
            inextensible: false,
            std_floor: Some(1e-8),
            rest_strain: StrainVector::rest(),
        }
    }
}

/// Reduced representation of one strain component.
#[derive(Clone, Debug, PartialEq)]
pub struct StrainBasis {
    pub mean: Vec<f64>,
    /// Standard-deviation function after flooring.
    pub std: Vec<f64>,
    /// Unit eigenvectors of the standardized covariance, leading first.
    pub modes: Vec<Vec<f64>>,
    /// `std * mode`: the basis functions in physical units.
    pub functions: Vec<Vec<f64>>,
    /// All covariance eigenvalues, nonincreasing.
    pub eigenvalues: Vec<f64>,
    pub coeff_mean: Vec<f64>,
    pub coeff_std: Vec<f64>,
    pub retained_variance: f64,
}

impl StrainBasis {
    fn frozen(value: f64, n: usize) -> Self {
        StrainBasis {
            mean: vec![value; n],
            std: vec![1.0; n],
            modes: Vec::new(),
            functions: Vec::new(),
            eigenvalues: Vec::new(),
            coeff_mean: Vec::new(),
            coeff_std: Vec::new(),
            retained_variance: 1.0,
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.functions.is_empty()
    }

    /// Standardized-space coefficients of a component sampled on the grid.
    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        self.modes
            .iter()
            .map(|u| {
                values
                    .iter()
                    .zip(&self.mean)
                    .zip(&self.std)
                    .zip(u)
                    .map(|(((x, m), s), u)| u * (x - m) / s)
                    .sum()
            })
            .collect()
    }
}

/// Coefficients `alpha_ij` for the active strains, strain-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector(pub Vec<f64>);

impl CoefficientVector {
    pub fn zeros(n: usize) -> Self {
        CoefficientVector(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Per-strain means and basis functions on a shared grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BasisSet {
    grid: Vec<f64>,
    n_basis: usize,
    strains: Vec<StrainBasis>,
}

impl BasisSet {
    /// Assembles a basis from parts, e.g. when loading from disk.
    pub fn from_parts(grid: Vec<f64>, n_basis: usize, strains: Vec<StrainBasis>) -> Result<Self> {
        if strains.len() != 6 {
            return Err(Error::LengthMismatch {
                expected: 6,
                got: strains.len(),
            });
        }
        for b in &strains {
            let n_fn = b.functions.len();
            if !(n_fn == 0 || n_fn == n_basis)
                || b.mean.len() != grid.len()
                || b.std.len() != grid.len()
                || b.functions.iter().chain(&b.modes).any(|f| f.len() != grid.len())
                || b.modes.len() != n_fn
                || b.coeff_mean.len() != n_fn
                || b.coeff_std.len() != n_fn
            {
                return Err(Error::ShapeMismatch("inconsistent strain basis".into()));
            }
        }
        Ok(BasisSet {
            grid,
            n_basis,
            strains,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn n_basis(&self) -> usize {
        self.n_basis
    }

    pub fn strains(&self) -> &[StrainBasis] {
        &self.strains
    }

    /// Indices of strain components that carry basis functions.
    pub fn active_strains(&self) -> Vec<usize> {
        (0..6).filter(|&i| !self.strains[i].is_frozen()).collect()
    }

    pub fn n_coefficients(&self) -> usize {
        self.active_strains().len() * self.n_basis
    }

    /// Flattened coefficient means and standard deviations.
    pub fn coefficient_stats(&self) -> (Vec<f64>, Vec<f64>) {
        let mut mean = Vec::with_capacity(self.n_coefficients());
        let mut std = Vec::with_capacity(self.n_coefficients());
        for b in self.strains.iter().filter(|b| !b.is_frozen()) {
            mean.extend(&b.coeff_mean);
            std.extend(&b.coeff_std);
        }
        (mean, std)
    }

    /// Strain field `mean + sum_j alpha_j * basis_j` per component.
    pub fn synthesize(&self, coeffs: &CoefficientVector) -> Result<StrainField> {
        if coeffs.len() != self.n_coefficients() {
            return Err(Error::LengthMismatch {
                expected: self.n_coefficients(),
                got: coeffs.len(),
            });
        }
        let n = self.grid.len();
        let mut values = vec![[0.0; 6]; n];
        let mut alphas = coeffs.0.chunks_exact(self.n_basis.max(1));
        for (i, b) in self.strains.iter().enumerate() {
            for (v, m) in values.iter_mut().zip(&b.mean) {
                v[i] = *m;
            }
            if b.is_frozen() {
                continue;
            }
            let alpha = alphas.next().expect("coefficient count checked above");
            for (a, f) in alpha.iter().zip(&b.functions) {
                for (v, fk) in values.iter_mut().zip(f) {
                    v[i] += a * fk;
                }
            }
        }
        StrainField::new(
            self.grid.clone(),
            values.into_iter().map(StrainVector::from_array).collect(),
        )
    }

    /// Coefficients of the orthogonal projection of `field` onto the basis.
    pub fn project(&self, field: &StrainField) -> Result<CoefficientVector> {
        if field.grid() != self.grid.as_slice() {
            return Err(Error::InvalidInput("field grid differs from basis grid".into()));
        }
        let mut out = Vec::with_capacity(self.n_coefficients());
        for (i, b) in self.strains.iter().enumerate() {
            if b.is_frozen() {
                continue;
            }
            let values: Vec<f64> = field.values().iter().map(|v| v.component(i)).collect();
            out.extend(b.project(&values));
        }
        Ok(CoefficientVector(out))
    }

    /// Chain rule through [`BasisSet::synthesize`]: maps a gradient with
    /// respect to node strains to one with respect to the coefficients.
    pub fn pullback(&self, node_gradient: &[[f64; 6]]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_coefficients());
        for (i, b) in self.strains.iter().enumerate() {
            for f in &b.functions {
                out.push(node_gradient.iter().zip(f).map(|(g, fk)| g[i] * fk).sum());
            }
        }
        out
    }

    /// SHA-256 over the grid, layout and synthesis functions; links
    /// downstream artifacts to the basis they were built against.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n_basis as u64).to_le_bytes());
        for v in &self.grid {
            h.update(v.to_le_bytes());
        }
        for b in &self.strains {
            h.update((b.functions.len() as u64).to_le_bytes());
            for v in b.mean.iter().chain(b.functions.iter().flatten()) {
                h.update(v.to_le_bytes());
            }
            for v in b.coeff_mean.iter().chain(&b.coeff_std) {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Per-strain PCA of a dataset.
pub fn fit_pca(data: &StrainDataset, cfg: &PcaConfig) -> Result<BasisSet> {
    let n_grid = data.grid().len();
    let n_samples = data.len();
    let max_basis = (n_samples - 1).min(n_grid);
    if cfg.n_basis < 1 || cfg.n_basis > max_basis {
        return Err(Error::InvalidInput(format!(
            "n_basis must lie in 1..={max_basis}, got {}",
            cfg.n_basis
        )));
    }
    let strains = (0..6)
        .map(|i| {
            if cfg.inextensible && i >= 3 {
                Ok(StrainBasis::frozen(cfg.rest_strain.component(i), n_grid))
            } else {
                fit_component(data.component_matrix(i), i, cfg)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    BasisSet::from_parts(data.grid().to_vec(), cfg.n_basis, strains)
}

fn fit_component(x: DMatrix<f64>, component: usize, cfg: &PcaConfig) -> Result<StrainBasis> {
    let (n_samples, n_grid) = x.shape();
    let denom = (n_samples - 1) as f64;
    // Shifted by the first sample: exact for constant columns.
    let mean: Vec<f64> = (0..n_grid)
        .map(|n| {
            let x0 = x[(0, n)];
            x0 + x.column(n).iter().map(|v| v - x0).sum::<f64>() / n_samples as f64
        })
        .collect();
    let mut std: Vec<f64> = (0..n_grid)
        .map(|n| {
            let m = mean[n];
            (x.column(n).iter().map(|v| (v - m) * (v - m)).sum::<f64>() / denom).sqrt()
        })
        .collect();
    let max_std = std.iter().cloned().fold(0.0, f64::max);
    match cfg.std_floor {
        Some(_) if max_std == 0.0 => std.iter_mut().for_each(|s| *s = 1.0),
        Some(rel) => {
            let floor = rel * max_std;
            std.iter_mut().for_each(|s| *s = s.max(floor));
        }
        None if std.iter().any(|&s| s == 0.0) => return Err(Error::DegenerateData { component }),
        None => {}
    }

    let z = DMatrix::from_fn(n_samples, n_grid, |t, n| (x[(t, n)] - mean[n]) / std[n]);
    let cov = (z.transpose() * &z) / denom;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..n_grid).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();

    let modes: Vec<Vec<f64>> = order[..cfg.n_basis]
        .iter()
        .map(|&k| {
            let mut u: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            // Fix the sign: largest-magnitude entry positive.
            let pivot = u.iter().cloned().fold(0.0, |m: f64, v| if v.abs() > m.abs() { v } else { m });
            if pivot < 0.0 {
                u.iter_mut().for_each(|v| *v = -*v);
            }
            u
        })
        .collect();
    let functions = modes
        .iter()
        .map(|u| u.iter().zip(&std).map(|(u, s)| u * s).collect())
        .collect();

    let total: f64 = eigenvalues.iter().sum();
    let retained: f64 = eigenvalues[..cfg.n_basis].iter().sum();
    let retained_variance = if total > 0.0 { retained / total } else { 1.0 };

    let mut basis = StrainBasis {
        mean,
        std,
        modes,
        functions,
        eigenvalues,
        coeff_mean: vec![0.0; cfg.n_basis],
        coeff_std: vec![0.0; cfg.n_basis],
        retained_variance,
    };

    // Empirical coefficient statistics over the dataset.
    let coeffs: Vec<Vec<f64>> = (0..n_samples)
        .map(|t| basis.project(&x.row(t).iter().copied().collect::<Vec<_>>()))
        .collect();
    for j in 0..cfg.n_basis {
        let m = coeffs.iter().map(|c| c[j]).sum::<f64>() / n_samples as f64;
        let v = coeffs.iter().map(|c| (c[j] - m) * (c[j] - m)).sum::<f64>() / denom;
        basis.coeff_mean[j] = m;
        basis.coeff_std[j] = v.sqrt();
    }
    Ok(basis)
}

/// Draws `count` coefficient vectors with every entry independent
/// `Normal(coeff_mean, coeff_std^2)`. Sample `k` uses its own ChaCha stream
/// of `seed`, so output does not depend on evaluation order.
pub fn sample_coefficients(basis: &BasisSet, count: usize, seed: u64) -> Vec<CoefficientVector> {
    let (mean, std) = basis.coefficient_stats();
    crate::par::map_range(count, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        CoefficientVector(
            mean.iter()
                .zip(&std)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + s * z
                })
                .collect(),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Vec3;
    use crate::rod::uniform_grid;
    use approx::assert_relative_eq;
    use rand::Rng;
    use std::f64::consts::PI;

    fn grid() -> Vec<f64> {
        uniform_grid(0.2, 50)
    }

    /// Dataset built from `modes` known functions per strain with random
    /// amplitudes.
    fn modal_dataset(n_modes: usize, n_samples: usize, seed: u64) -> StrainDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = grid();
        let samples = (0..n_samples)
            .map(|_| {
                let amps: Vec<[f64; 6]> = (0..n_modes)
                    .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
                    .collect();
                StrainField::from_fn(g.clone(), |s| {
                    let mut v = StrainVector::rest().to_array();
                    for (p, a) in amps.iter().enumerate() {
                        let f = (PI * (p + 1) as f64 * s / 0.2).cos() + 0.3;
                        for i in 0..6 {
                            v[i] += a[i] * f * if i < 3 { 5.0 } else { 0.05 };
                        }
                    }
                    StrainVector::from_array(v)
                })
                .unwrap()
            })
            .collect();
        StrainDataset::new(samples).unwrap()
    }

    fn rel_l2(a: &StrainField, b: &StrainField, i: usize) -> f64 {
        let num: f64 = a.values().iter().zip(b.values()).map(|(x, y)| (x.component(i) - y.component(i)).powi(2)).sum();
        let den: f64 = a.values().iter().map(|x| x.component(i).powi(2)).sum();
        (num / den).sqrt()
    }

    #[test]
    fn rank_one_data_is_captured_by_first_component() {
        let g = grid();
        let f = |s: f64| (3.0 * s / 0.2).sin() + 0.5;
        let samples = (0..20)
            .map(|t| {
                let c = t as f64 * 0.1 - 1.0;
                StrainField::from_fn(g.clone(), |s| {
                    let mut v = StrainVector::rest();
                    v.kappa = Vec3::repeat(2.0 + c * f(s));
                    v.nu.x = c * f(s) * 0.01;
                    v
                })
                .unwrap()
            })
            .collect();
        let data = StrainDataset::new(samples).unwrap();
        let basis = fit_pca(&data, &PcaConfig::new(2)).unwrap();
        for i in 0..4 {
            let b = &basis.strains()[i];
            assert!(b.retained_variance >= 0.9999);
            assert!(b.eigenvalues[0] / b.eigenvalues.iter().sum::<f64>() >= 0.9999);
            // First function proportional to f.
            let ratio: Vec<f64> = b.functions[0].iter().zip(&g).map(|(v, s)| v / f(*s)).collect();
            for r in &ratio {
                assert_relative_eq!(*r, ratio[0], max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn identical_samples_give_mean_and_zero_coefficients() {
        let field = StrainField::from_fn(grid(), |s| {
            StrainVector::new(Vec3::new(s, 2.0 * s, 0.1), Vec3::new(0.0, 0.01, 1.0))
        })
        .unwrap();
        let data = StrainDataset::new(vec![field.clone(); 5]).unwrap();
        let basis = fit_pca(&data, &PcaConfig::new(2)).unwrap();
        for (i, b) in basis.strains().iter().enumerate() {
            for (m, v) in b.mean.iter().zip(field.values()) {
                assert_eq!(*m, v.component(i));
            }
            assert!(b.eigenvalues.iter().all(|&l| l == 0.0));
            assert!(b.coeff_std.iter().all(|&s| s == 0.0));
        }
        let alpha = basis.project(&field).unwrap();
        assert!(alpha.0.iter().all(|&a| a == 0.0));

        let strict = PcaConfig {
            std_floor: None,
            ..PcaConfig::new(2)
        };
        assert!(matches!(fit_pca(&data, &strict), Err(Error::DegenerateData { component: 0 })));
    }

    #[test]
    fn three_mode_round_trip() {
        let data = modal_dataset(3, 40, 1);
        let basis = fit_pca(&data, &PcaConfig::new(3)).unwrap();
        for sample in data.samples() {
            let alpha = basis.project(sample).unwrap();
            let back = basis.synthesize(&alpha).unwrap();
            for i in 0..6 {
                assert!(rel_l2(sample, &back, i) <= 1e-8);
            }
        }
    }

    #[test]
    fn synthesis_is_affine() {
        let data = modal_dataset(3, 30, 2);
        let basis = fit_pca(&data, &PcaConfig::new(2)).unwrap();
        let n = basis.n_coefficients();
        assert_eq!(n, 12);
        let zero = basis.synthesize(&CoefficientVector::zeros(n)).unwrap();
        for (i, b) in basis.strains().iter().enumerate() {
            for (v, m) in zero.values().iter().zip(&b.mean) {
                assert_eq!(v.component(i), *m);
            }
        }
        let a = CoefficientVector((0..n).map(|k| k as f64 * 0.1).collect());
        let b = CoefficientVector((0..n).map(|k| 1.0 - k as f64 * 0.05).collect());
        let sum = CoefficientVector(a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect());
        let (fa, fb, fs) = (
            basis.synthesize(&a).unwrap(),
            basis.synthesize(&b).unwrap(),
            basis.synthesize(&sum).unwrap(),
        );
        for k in 0..fs.len() {
            for i in 0..6 {
                let lhs = fs.values()[k].component(i);
                let rhs = fa.values()[k].component(i) + fb.values()[k].component(i)
                    - zero.values()[k].component(i);
                assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
            }
        }
        assert!(matches!(
            basis.synthesize(&CoefficientVector::zeros(n + 1)),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn truncated_round_trip_matches_retained_variance() {
        let data = modal_dataset(5, 60, 3);
        let basis = fit_pca(&data, &PcaConfig::new(2)).unwrap();
        for (i, b) in basis.strains().iter().enumerate() {
            // Residual energy fraction in the standardized space.
            let (mut resid, mut total) = (0.0, 0.0);
            for sample in data.samples() {
                let back = basis.synthesize(&basis.project(sample).unwrap()).unwrap();
                for (n, (v, w)) in sample.values().iter().zip(back.values()).enumerate() {
                    let s = b.std[n];
                    resid += ((v.component(i) - w.component(i)) / s).powi(2);
                    total += ((v.component(i) - b.mean[n]) / s).powi(2);
                }
            }
            assert!(resid / total <= 1.0 - b.retained_variance + 1e-9);
            assert!(b.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            // Orthonormal modes.
            for (a, u) in b.modes.iter().enumerate() {
                for (c, v) in b.modes.iter().enumerate() {
                    let dot: f64 = u.iter().zip(v).map(|(x, y)| x * y).sum();
                    let expected = if a == c { 1.0 } else { 0.0 };
                    assert!((dot - expected).abs() <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn inextensible_freezes_linear_strains() {
        let data = modal_dataset(3, 30, 4);
        let cfg = PcaConfig {
            inextensible: true,
            ..PcaConfig::new(3)
        };
        let basis = fit_pca(&data, &cfg).unwrap();
        assert_eq!(basis.active_strains(), vec![0, 1, 2]);
        assert_eq!(basis.n_coefficients(), 9);
        let field = basis.synthesize(&CoefficientVector::zeros(9)).unwrap();
        for v in field.values() {
            assert_eq!(v.nu, Vec3::z());
        }
    }

    #[test]
    fn pullback_is_transpose_of_synthesis() {
        let data = modal_dataset(3, 30, 5);
        let basis = fit_pca(&data, &PcaConfig::new(3)).unwrap();
        let n = basis.n_coefficients();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g: Vec<[f64; 6]> = (0..basis.grid().len())
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        let pulled = basis.pullback(&g);
        let base = basis.synthesize(&CoefficientVector::zeros(n)).unwrap();
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            let f = basis.synthesize(&CoefficientVector(e)).unwrap();
            let directional: f64 = f
                .values()
                .iter()
                .zip(base.values())
                .zip(&g)
                .map(|((a, b), g)| (0..6).map(|i| g[i] * (a.component(i) - b.component(i))).sum::<f64>())
                .sum();
            assert_relative_eq!(pulled[k], directional, epsilon = 1e-12);
        }
    }

    #[test]
    fn sampling_statistics_and_determinism() {
        let data = modal_dataset(3, 40, 6);
        let basis = fit_pca(&data, &PcaConfig::new(3)).unwrap();
        let count = 100_000;
        let samples = sample_coefficients(&basis, count, 42);
        let (mean, std) = basis.coefficient_stats();
        for j in 0..mean.len() {
            let m = samples.iter().map(|c| c.0[j]).sum::<f64>() / count as f64;
            let v = samples.iter().map(|c| (c.0[j] - m).powi(2)).sum::<f64>() / (count - 1) as f64;
            let tol = 3.0 * std[j] / (count as f64).sqrt();
            assert!((m - mean[j]).abs() <= tol, "mean {j}");
            // Std of the sample std is about std / sqrt(2K).
            assert!((v.sqrt() - std[j]).abs() <= 3.0 * std[j] / (2.0 * count as f64).sqrt(), "std {j}");
        }
        assert_eq!(sample_coefficients(&basis, 10, 7), sample_coefficients(&basis, 10, 7));
        assert_eq!(sample_coefficients(&basis, 10, 7)[..5], sample_coefficients(&basis, 5, 7)[..]);
    }

    #[test]
    fn zero_std_sampling_returns_mean() {
        let field = StrainField::constant(grid(), StrainVector::rest()).unwrap();
        let data = StrainDataset::new(vec![field; 4]).unwrap();
        let basis = fit_pca(&data, &PcaConfig::new(2)).unwrap();
        let (mean, _) = basis.coefficient_stats();
        for c in sample_coefficients(&basis, 20, 1) {
            assert_eq!(c.0, mean);
        }
    }

    #[test]
    fn n_basis_bounds() {
        let data = modal_dataset(2, 5, 7);
        assert!(fit_pca(&data, &PcaConfig::new(0)).is_err());
        assert!(fit_pca(&data, &PcaConfig::new(5)).is_err());
        assert!(fit_pca(&data, &PcaConfig::new(4)).is_ok());
    }
}
