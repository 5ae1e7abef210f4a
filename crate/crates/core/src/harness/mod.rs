//! Configuration, orchestration over windows and trials, metrics and
//! experiment drivers.

pub mod config;
pub mod experiments;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod plot;

pub use config::RunConfig;
pub use metrics::{summarize, MetricsReport};
pub use pipeline::{PreparedRun, TrialRecord, WindowRecord};

use crate::error::Result;

/// Runs every trial and summarizes them without writing anything.
pub fn evaluate(cfg: &RunConfig) -> Result<(Vec<TrialRecord>, MetricsReport)> {
    let run = PreparedRun::new(cfg)?;
    let trials = run.run_trials()?;
    let m = &cfg.metrics;
    let report = summarize(&trials, m.aoa_match_deg, m.pos_match_m, m.sufficiency);
    Ok((trials, report))
}

/// Runs every trial and writes tables, plots and a summary to
/// `cfg.output_dir`.
pub fn run_pipeline(cfg: &RunConfig) -> Result<MetricsReport> {
    let (trials, report) = evaluate(cfg)?;
    io::write_run(&cfg.output_dir, cfg, &trials, &report)?;
    Ok(report)
}
