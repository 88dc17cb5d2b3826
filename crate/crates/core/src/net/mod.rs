//! Neural network mapping marker features to strain coefficients.

mod adam;
mod mlp;
mod train;

pub use adam::Adam;
pub use mlp::{sigmoid, silu, silu_derivative, Mlp, Trace};
pub use train::{
    infer, loss, loss_gradient, sample_loss, split_indices, train, train_with_restarts, EpochStats, Inference,
    Problem, TrainConfig, TrainReport,
};

use crate::datagen::FEATURES_PER_MARKER;
use crate::error::{Error, Result};
use crate::format::Artifact;
use crate::reduction::{BasisSet, CoefficientVector};
use std::path::Path;

/// Network plus everything needed to interpret its inputs and outputs.
///
/// Inputs are marker features with positions divided by
/// `position_scale`; outputs are standardized coefficients mapped to basis
/// coefficients by `coeff_mean + coeff_std * output`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    pub mlp: Mlp,
    pub marker_s: Vec<f64>,
    pub position_scale: f64,
    pub coeff_mean: Vec<f64>,
    pub coeff_std: Vec<f64>,
    pub basis_checksum: String,
}

impl MlpModel {
    /// Glorot-initialized model with layers `[9 N_m, hidden.., n_coeffs]`.
    pub fn new(hidden: &[usize], marker_s: &[f64], position_scale: f64, basis: &BasisSet, seed: u64) -> Result<Self> {
        let (coeff_mean, coeff_std) = basis.coefficient_stats();
        let mut sizes = vec![FEATURES_PER_MARKER * marker_s.len()];
        sizes.extend(hidden);
        sizes.push(coeff_mean.len());
        Ok(MlpModel {
            mlp: Mlp::glorot(&sizes, seed)?,
            marker_s: marker_s.to_vec(),
            position_scale,
            coeff_mean,
            coeff_std,
            basis_checksum: basis.checksum(),
        })
    }

    pub fn normalize_input(&self, features: &[f64]) -> Vec<f64> {
        let mut x = features.to_vec();
        for chunk in x.chunks_mut(FEATURES_PER_MARKER) {
            for v in &mut chunk[..3] {
                *v /= self.position_scale;
            }
        }
        x
    }

    /// Basis coefficients from standardized network outputs.
    pub fn coefficients(&self, z: &[f64]) -> CoefficientVector {
        CoefficientVector(
            z.iter()
                .zip(&self.coeff_mean)
                .zip(&self.coeff_std)
                .map(|((z, m), s)| m + s * z)
                .collect(),
        )
    }

    /// Coefficients predicted from one feature row.
    pub fn forward(&self, features: &[f64]) -> Result<CoefficientVector> {
        Ok(self.coefficients(&self.mlp.forward(&self.normalize_input(features))?))
    }

    pub fn check_basis(&self, basis: &BasisSet) -> Result<()> {
        let found = basis.checksum();
        if found != self.basis_checksum {
            return Err(Error::ChecksumMismatch {
                what: "basis".into(),
                expected: self.basis_checksum.clone(),
                found,
            });
        }
        Ok(())
    }

    pub fn to_artifact(&self) -> Artifact {
        let mut a = Artifact::new("model");
        a.set("layer_sizes", self.mlp.sizes().to_vec());
        a.set("basis_checksum", self.basis_checksum.clone());
        a.set("activation", "silu");
        a.set("input_positions", "divided by position_scale");
        a.set("output", "standardized coefficients");
        a.push("position_scale", vec![self.position_scale]);
        a.push("marker_s", self.marker_s.clone());
        a.push("coeff_mean", self.coeff_mean.clone());
        a.push("coeff_std", self.coeff_std.clone());
        a.push("params", self.mlp.params().to_vec());
        a
    }

    pub fn from_artifact(a: &Artifact) -> Result<Self> {
        let sizes = a.get_usizes("layer_sizes")?;
        let model = MlpModel {
            mlp: Mlp::from_params(&sizes, a.array("params")?.to_vec())?,
            marker_s: a.array("marker_s")?.to_vec(),
            position_scale: a.array("position_scale")?.first().copied().unwrap_or(f64::NAN),
            coeff_mean: a.array("coeff_mean")?.to_vec(),
            coeff_std: a.array("coeff_std")?.to_vec(),
            basis_checksum: a.get_str("basis_checksum")?.to_string(),
        };
        let n_out = model.mlp.output_size();
        if model.mlp.input_size() != FEATURES_PER_MARKER * model.marker_s.len()
            || model.coeff_mean.len() != n_out
            || model.coeff_std.len() != n_out
            || !(model.position_scale > 0.0)
        {
            return Err(Error::ShapeMismatch("model header and arrays disagree".into()));
        }
        Ok(model)
    }
}

pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    model.to_artifact().write(path)
}

/// Loads a model; with `basis` given, also checks the basis linkage.
pub fn load_model(path: &Path, basis: Option<&BasisSet>) -> Result<MlpModel> {
    let model = MlpModel::from_artifact(&Artifact::read(path, "model")?)?;
    if let Some(b) = basis {
        model.check_basis(b)?;
    }
    Ok(model)
}
