//! Pipeline configuration: a flat TOML document whose keys carry their
//! units, layered over one of the built-in presets.

use rodrecon::baseline::{InitStrategy, SolverConfig, StepRule};
use rodrecon::datagen::{Envelope, NoiseModel, SurrogateConfig};
use rodrecon::format::sha256_hex;
use rodrecon::geom::Vec3;
use rodrecon::net::TrainConfig;
use rodrecon::reduction::PcaConfig;
use rodrecon::rod::{even_marker_layout, RodProperties};
use rodrecon::{Error, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Octopus,
    Br2,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "octopus" => Ok(Preset::Octopus),
            "br2" => Ok(Preset::Br2),
            _ => Err(Error::config("preset", format!("unknown preset `{s}` (octopus | br2)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvelopeKind {
    Ramp,
    Sinusoid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepRuleKind {
    Fixed,
    Armijo,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitKind {
    Rest,
    PreviousFrame,
}

/// Every setting of every stage. Keys end in their SI unit where one
/// applies; strains are per meter (angular) or dimensionless (linear).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub length_m: f64,
    pub n_nodes: usize,
    pub stiffness_angular_n_m2: [f64; 3],
    pub stiffness_linear_n: [f64; 3],

    pub n_modes: usize,
    pub amplitude_angular_rad_per_m: [f64; 3],
    pub amplitude_linear: [f64; 3],
    pub n_trajectories: usize,
    pub steps_per_trajectory: usize,
    pub envelope: EnvelopeKind,

    pub n_basis: usize,
    pub inextensible: bool,
    /// Relative std floor for standardization; 0 disables it.
    pub std_floor_rel: f64,

    pub n_markers: usize,
    /// Marker arc lengths; empty means evenly spaced with the last at the tip.
    pub marker_s_m: Vec<f64>,
    pub sigma_position_m: f64,
    pub sigma_angle_rad: f64,
    pub n_training_samples: usize,

    pub hidden_sizes: Vec<usize>,
    pub eta: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub val_fraction: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub restarts: usize,

    pub solver_max_iters: usize,
    pub solver_step_rule: StepRuleKind,
    pub solver_armijo_c: f64,
    pub solver_armijo_shrink: f64,
    pub solver_initial_step: f64,
    pub solver_grad_tol: f64,
    pub solver_init: InitKind,

    pub n_frames: usize,
    pub frame_rate_hz: f64,

    pub seed: u64,
}

impl PipelineConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Octopus => PipelineConfig {
                length_m: 0.2,
                n_nodes: 100,
                stiffness_angular_n_m2: [10.0; 3],
                stiffness_linear_n: [1e5; 3],
                n_modes: 4,
                amplitude_angular_rad_per_m: [12.0, 12.0, 4.0],
                amplitude_linear: [0.02, 0.02, 0.05],
                n_trajectories: 27,
                steps_per_trajectory: 50,
                envelope: EnvelopeKind::Sinusoid,
                n_basis: 4,
                inextensible: false,
                std_floor_rel: 1e-8,
                n_markers: 8,
                marker_s_m: Vec::new(),
                sigma_position_m: 2e-4,
                sigma_angle_rad: 0.5f64.to_radians(),
                n_training_samples: 100_000,
                hidden_sizes: vec![128, 64],
                eta: 1e4,
                learning_rate: 1e-3,
                batch_size: 128,
                epochs: 100,
                val_fraction: 0.2,
                adam_beta1: 0.9,
                adam_beta2: 0.999,
                adam_epsilon: 1e-8,
                restarts: 1,
                solver_max_iters: 10_000,
                solver_step_rule: StepRuleKind::Armijo,
                solver_armijo_c: 1e-4,
                solver_armijo_shrink: 0.5,
                solver_initial_step: 1e-3,
                solver_grad_tol: 1e-8,
                solver_init: InitKind::Rest,
                n_frames: 500,
                frame_rate_hz: 100.0,
                seed: 1,
            },
            Preset::Br2 => PipelineConfig {
                length_m: 0.3,
                stiffness_angular_n_m2: [1.0; 3],
                n_modes: 3,
                amplitude_angular_rad_per_m: [3.0; 3],
                amplitude_linear: [0.0; 3],
                n_basis: 3,
                inextensible: true,
                n_markers: 3,
                sigma_position_m: 3e-4,
                n_training_samples: 32_000,
                batch_size: 512,
                hidden_sizes: vec![32, 16],
                ..Self::preset(Preset::Octopus)
            },
        }
    }

    /// Preset (from `preset`, else the file's `preset` key, else octopus)
    /// with the file's keys layered on top.
    pub fn load(preset: Option<Preset>, path: Option<&Path>) -> Result<Self> {
        let mut overrides = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| Error::config(p.display().to_string(), e.message().to_string()))?
            }
            None => toml::Table::new(),
        };
        let file_preset = match overrides.remove("preset") {
            Some(toml::Value::String(s)) => Some(s.parse()?),
            Some(_) => return Err(Error::config("preset", "must be a string")),
            None => None,
        };
        let base = Self::preset(preset.or(file_preset).unwrap_or(Preset::Octopus));
        base.with_overrides(overrides)
    }

    /// Replaces fields by the entries of `overrides`, reporting unknown keys
    /// and type errors by key name.
    pub fn with_overrides(&self, overrides: toml::Table) -> Result<Self> {
        let mut table = toml::Table::try_from(self).expect("config serializes");
        for (key, value) in overrides {
            let Some(current) = table.get(&key) else {
                return Err(Error::config(key, "unknown key"));
            };
            let value = match (current, value) {
                (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
                (toml::Value::Array(_), toml::Value::Array(items)) => toml::Value::Array(
                    items
                        .into_iter()
                        .map(|v| match v {
                            toml::Value::Integer(i) if self.is_float_array(&key) => toml::Value::Float(i as f64),
                            v => v,
                        })
                        .collect(),
                ),
                (_, v) => v,
            };
            let mut single = toml::Table::try_from(self).expect("config serializes");
            single.insert(key.clone(), value.clone());
            if let Err(e) = single.try_into::<PipelineConfig>() {
                return Err(Error::config(key, e.message().to_string()));
            }
            table.insert(key, value);
        }
        let cfg: PipelineConfig = table
            .try_into()
            .map_err(|e| Error::config("config", e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn is_float_array(&self, key: &str) -> bool {
        matches!(
            key,
            "stiffness_angular_n_m2" | "stiffness_linear_n" | "amplitude_angular_rad_per_m" | "amplitude_linear" | "marker_s_m"
        )
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hash of the canonical serialization, embedded in stage outputs.
    pub fn checksum(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        self.rod()?;
        self.surrogate()?.validate()?;
        self.solver().validate()?;
        self.train().validate()?;
        self.noise().validate()?;
        if self.n_basis == 0 {
            return Err(Error::config("n_basis", "must be at least 1"));
        }
        if !(self.std_floor_rel >= 0.0) {
            return Err(Error::config("std_floor_rel", "must be non-negative"));
        }
        if self.n_markers == 0 {
            return Err(Error::config("n_markers", "must be at least 1"));
        }
        if !self.marker_s_m.is_empty() {
            let s = &self.marker_s_m;
            if s.len() != self.n_markers {
                return Err(Error::config(
                    "marker_s_m",
                    format!("lists {} arc lengths for {} markers", s.len(), self.n_markers),
                ));
            }
            if !(s[0] > 0.0) || s.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(Error::config("marker_s_m", "must be positive and strictly increasing"));
            }
            if s[s.len() - 1] != self.length_m {
                return Err(Error::config("marker_s_m", "last marker must sit at the tip (length_m)"));
            }
        }
        if self.n_training_samples < 2 {
            return Err(Error::config("n_training_samples", "must be at least 2"));
        }
        if !(self.eta > 0.0) {
            return Err(Error::config("eta", "must be positive"));
        }
        if self.restarts == 0 {
            return Err(Error::config("restarts", "must be at least 1"));
        }
        if self.n_frames == 0 {
            return Err(Error::config("n_frames", "must be at least 1"));
        }
        if !(self.frame_rate_hz > 0.0 && self.frame_rate_hz.is_finite()) {
            return Err(Error::config("frame_rate_hz", "must be positive"));
        }
        Ok(())
    }

    pub fn rod(&self) -> Result<RodProperties> {
        let mut rod = RodProperties::new(self.length_m, self.n_nodes)?;
        rod.stiffness_angular = Vec3::from(self.stiffness_angular_n_m2);
        rod.stiffness_linear = Vec3::from(self.stiffness_linear_n);
        rod.validate()?;
        Ok(rod)
    }

    pub fn surrogate(&self) -> Result<SurrogateConfig> {
        Ok(SurrogateConfig {
            rod: self.rod()?,
            n_modes: self.n_modes,
            amplitude_angular: Vec3::from(self.amplitude_angular_rad_per_m),
            amplitude_linear: Vec3::from(self.amplitude_linear),
            n_trajectories: self.n_trajectories,
            steps_per_trajectory: self.steps_per_trajectory,
            envelope: match self.envelope {
                EnvelopeKind::Ramp => Envelope::Ramp,
                EnvelopeKind::Sinusoid => Envelope::Sinusoid,
            },
            seed: self.seeds().simulate,
        })
    }

    pub fn pca(&self) -> PcaConfig {
        PcaConfig {
            inextensible: self.inextensible,
            std_floor: (self.std_floor_rel > 0.0).then_some(self.std_floor_rel),
            ..PcaConfig::new(self.n_basis)
        }
    }

    pub fn marker_s(&self) -> Vec<f64> {
        if self.marker_s_m.is_empty() {
            even_marker_layout(self.length_m, self.n_markers)
        } else {
            self.marker_s_m.clone()
        }
    }

    /// Training-set noise.
    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            sigma_position: self.sigma_position_m,
            sigma_angle: self.sigma_angle_rad,
            seed: self.seeds().noise,
        }
    }

    pub fn frame_noise(&self) -> NoiseModel {
        NoiseModel {
            seed: self.seeds().frame_noise,
            ..self.noise()
        }
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden_sizes.clone(),
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            val_fraction: self.val_fraction,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            epsilon: self.adam_epsilon,
            seed: self.seeds().train,
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            max_iters: self.solver_max_iters,
            step_rule: match self.solver_step_rule {
                StepRuleKind::Fixed => StepRule::Fixed,
                StepRuleKind::Armijo => StepRule::Armijo {
                    c: self.solver_armijo_c,
                    shrink: self.solver_armijo_shrink,
                },
            },
            initial_step: self.solver_initial_step,
            grad_tol: self.solver_grad_tol,
            init: match self.solver_init {
                InitKind::Rest => InitStrategy::Rest,
                InitKind::PreviousFrame => InitStrategy::PreviousFrame,
            },
        }
    }

    pub fn seeds(&self) -> StageSeeds {
        let s = self.seed;
        StageSeeds {
            simulate: s,
            sample: s.wrapping_add(1),
            noise: s.wrapping_add(2),
            train: s.wrapping_add(3),
            frames: s.wrapping_add(4),
            frame_noise: s.wrapping_add(5),
        }
    }
}

/// Per-stage seeds derived from the master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StageSeeds {
    pub simulate: u64,
    pub sample: u64,
    pub noise: u64,
    pub train: u64,
    pub frames: u64,
    pub frame_noise: u64,
}
