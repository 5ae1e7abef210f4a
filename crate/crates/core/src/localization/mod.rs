//! Source positions from refined directions gathered along the trajectory.

pub mod bound;
pub mod gp;
pub mod tracker;

pub use bound::{max_norm2_on_grid, norm2_cb, norm2_cb_direct, worst_case_rmse, BoundReport};
pub use gp::{
    accumulate_anchor, gp_solve, line_distance_sq, sum_line_distance_sq, AnchorSummary, GpConfig, GpSolution,
};
pub use tracker::{write_track_csv, SourceTrack, TrackerConfig, TrackerState, WindowUpdate};
