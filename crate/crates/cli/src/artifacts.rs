//! Conversions between pipeline values and on-disk artifacts.

use rodrecon::datagen::{features_of, measurement_from_features, Frame, TrainingSet, FEATURES_PER_MARKER};
use rodrecon::format::Artifact;
use rodrecon::reduction::{BasisSet, CoefficientVector, StrainBasis, StrainDataset};
use rodrecon::rod::StrainField;
use rodrecon::{Error, Result};

pub const DATASET_KIND: &str = "strain-dataset";
pub const BASIS_KIND: &str = "basis";
pub const TRAINING_SET_KIND: &str = "training-set";
pub const FRAME_LOG_KIND: &str = "frame-log";

fn chunks(data: &[f64], width: usize, what: &str) -> Result<Vec<Vec<f64>>> {
    if width == 0 || data.len() % width != 0 {
        return Err(Error::ShapeMismatch(format!("{what}: {} values do not split into rows of {width}", data.len())));
    }
    Ok(data.chunks_exact(width).map(<[f64]>::to_vec).collect())
}

pub fn dataset_to_artifact(data: &StrainDataset) -> Artifact {
    let mut a = Artifact::new(DATASET_KIND);
    a.set("n_samples", data.len());
    a.set("n_nodes", data.grid().len());
    a.set("layout", "sample-major, node-major, [kappa1 kappa2 kappa3 nu1 nu2 nu3]");
    a.push("grid", data.grid().to_vec());
    a.push("strains", data.samples().iter().flat_map(StrainField::to_flat).collect());
    a
}

pub fn dataset_from_artifact(a: &Artifact) -> Result<StrainDataset> {
    let grid = a.array("grid")?.to_vec();
    let samples = chunks(a.array("strains")?, 6 * grid.len(), "strains")?
        .into_iter()
        .map(|flat| StrainField::from_flat(grid.clone(), &flat))
        .collect::<Result<Vec<_>>>()?;
    StrainDataset::new(samples)
}

pub fn basis_to_artifact(basis: &BasisSet) -> Artifact {
    let mut a = Artifact::new(BASIS_KIND);
    a.set("n_basis", basis.n_basis());
    a.set("checksum", basis.checksum());
    a.set(
        "frozen",
        basis.strains().iter().map(StrainBasis::is_frozen).collect::<Vec<_>>(),
    );
    a.push("grid", basis.grid().to_vec());
    a.push(
        "retained_variance",
        basis.strains().iter().map(|b| b.retained_variance).collect(),
    );
    for (i, b) in basis.strains().iter().enumerate() {
        a.push(format!("mean_{i}"), b.mean.clone());
        a.push(format!("std_{i}"), b.std.clone());
        a.push(format!("modes_{i}"), b.modes.concat());
        a.push(format!("functions_{i}"), b.functions.concat());
        a.push(format!("eigenvalues_{i}"), b.eigenvalues.clone());
        a.push(format!("coeff_mean_{i}"), b.coeff_mean.clone());
        a.push(format!("coeff_std_{i}"), b.coeff_std.clone());
    }
    a
}

/// Rebuilds a basis and checks it against the stored checksum.
pub fn basis_from_artifact(a: &Artifact) -> Result<BasisSet> {
    let grid = a.array("grid")?.to_vec();
    let n = grid.len();
    let retained = a.array("retained_variance")?;
    if retained.len() != 6 {
        return Err(Error::ShapeMismatch("basis artifact needs six strain entries".into()));
    }
    let rows = |name: String| -> Result<Vec<Vec<f64>>> {
        let data = a.array(&name)?;
        if data.is_empty() {
            return Ok(Vec::new());
        }
        chunks(data, n, &name)
    };
    let strains = (0..6)
        .map(|i| {
            Ok(StrainBasis {
                mean: a.array(&format!("mean_{i}"))?.to_vec(),
                std: a.array(&format!("std_{i}"))?.to_vec(),
                modes: rows(format!("modes_{i}"))?,
                functions: rows(format!("functions_{i}"))?,
                eigenvalues: a.array(&format!("eigenvalues_{i}"))?.to_vec(),
                coeff_mean: a.array(&format!("coeff_mean_{i}"))?.to_vec(),
                coeff_std: a.array(&format!("coeff_std_{i}"))?.to_vec(),
                retained_variance: retained[i],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let basis = BasisSet::from_parts(grid, a.get_u64("n_basis")? as usize, strains)?;
    let stored = a.get_str("checksum")?;
    let found = basis.checksum();
    if stored != found {
        return Err(Error::ChecksumMismatch {
            what: "basis".into(),
            expected: stored.to_string(),
            found,
        });
    }
    Ok(basis)
}

pub fn training_set_to_artifact(set: &TrainingSet, basis: &BasisSet) -> Artifact {
    let mut a = Artifact::new(TRAINING_SET_KIND);
    a.set("n_samples", set.len());
    a.set("n_markers", set.marker_s.len());
    a.set("basis_checksum", basis.checksum());
    a.set("layout", "sample-major, marker-major, [x d1 d3]");
    a.push("marker_s", set.marker_s.clone());
    a.push("features", set.features.clone());
    if let Some(gt) = &set.ground_truth {
        a.push("ground_truth", gt.iter().flat_map(|c| c.0.iter().copied()).collect());
    }
    a
}

/// Training set plus the checksum of the basis it was sampled from.
pub fn training_set_from_artifact(a: &Artifact) -> Result<(TrainingSet, String)> {
    let marker_s = a.array("marker_s")?.to_vec();
    let features = a.array("features")?.to_vec();
    let n = a.get_u64("n_samples")? as usize;
    let ground_truth = match a.array("ground_truth") {
        Ok(gt) if n > 0 => Some(
            chunks(gt, gt.len() / n, "ground_truth")?
                .into_iter()
                .map(CoefficientVector)
                .collect(),
        ),
        _ => None,
    };
    let set = TrainingSet::new(marker_s, features, ground_truth)?;
    if set.len() != n {
        return Err(Error::ShapeMismatch(format!("training set declares {n} samples, holds {}", set.len())));
    }
    Ok((set, a.get_str("basis_checksum")?.to_string()))
}

/// Timestamped marker measurements replayed at a nominal rate.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameLog {
    pub rate_hz: f64,
    pub length: f64,
    pub marker_s: Vec<f64>,
    pub frames: Vec<Frame>,
}

impl FrameLog {
    pub fn new(rate_hz: f64, length: f64, marker_s: Vec<f64>, frames: Vec<Frame>) -> Result<Self> {
        if frames.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(Error::InvalidInput("frame timestamps must strictly increase".into()));
        }
        if let Some(f) = frames.iter().find(|f| f.measurement.arc_lengths() != marker_s) {
            return Err(Error::MarkerLayoutMismatch(format!(
                "frame at t = {} has markers at {:?}, log declares {marker_s:?}",
                f.time,
                f.measurement.arc_lengths()
            )));
        }
        Ok(FrameLog {
            rate_hz,
            length,
            marker_s,
            frames,
        })
    }

    pub fn to_artifact(&self) -> Artifact {
        let mut a = Artifact::new(FRAME_LOG_KIND);
        a.set("n_frames", self.frames.len());
        a.set("rate_hz", self.rate_hz);
        a.set("length_m", self.length);
        a.set("layout", "frame-major, marker-major, [x d1 d3]");
        a.push("marker_s", self.marker_s.clone());
        a.push("time", self.frames.iter().map(|f| f.time).collect());
        a.push(
            "features",
            self.frames.iter().flat_map(|f| features_of(&f.measurement)).collect(),
        );
        a
    }

    pub fn from_artifact(a: &Artifact) -> Result<Self> {
        let marker_s = a.array("marker_s")?.to_vec();
        let length = a.get_f64("length_m")?;
        let times = a.array("time")?;
        let rows = chunks(a.array("features")?, FEATURES_PER_MARKER * marker_s.len(), "features")?;
        if rows.len() != times.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} timestamps for {} feature rows",
                times.len(),
                rows.len()
            )));
        }
        let frames = times
            .iter()
            .zip(&rows)
            .map(|(&time, row)| {
                Ok(Frame {
                    time,
                    measurement: measurement_from_features(&marker_s, row, length)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        FrameLog::new(a.get_f64("rate_hz")?, length, marker_s, frames)
    }
}
