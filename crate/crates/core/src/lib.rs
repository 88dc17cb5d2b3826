//! Shape reconstruction of soft continuum arms from a handful of marker
//! poses, using a Cosserat rod model, PCA strain bases and a small
//! unsupervised neural network.

pub mod baseline;
pub mod datagen;
pub mod error;
pub mod format;
pub mod geom;
pub mod net;
pub mod par;
pub mod reduction;
pub mod rod;

pub use error::{Error, Result};
