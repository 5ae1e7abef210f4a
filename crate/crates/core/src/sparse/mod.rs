//! Sparse coding engines used by the manifold refiner.

pub mod calibrate;
pub mod epsilon;
pub mod phase;
pub mod recovery;

pub use calibrate::{calibrate_f, CalibrationConfig, CalibrationReport};
pub use epsilon::{epsilon_opt, EpsilonModel};
pub use phase::{phase_smooth, PhaseConfig, SmoothedCodes};
pub use recovery::{recover_matrix, recover_with, sparse_recover, SparseColumn, SparseEstimate, SparseSolver};
