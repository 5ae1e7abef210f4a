//! Multi-source 3D localization from a moving antenna array.

pub mod baselines;
pub mod detector;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod localization;
pub mod manifold;
pub mod refiner;
pub mod rng;
pub mod rough_aoa;
pub mod scene;
pub mod signal;
pub mod sparse;

pub use error::{Error, Result};
