// End-to-end run on a small configuration: three sources on the city map,
// four windows, one trial, metrics printed per window.

use aoaloc::harness::{evaluate, RunConfig};

pub fn run_example() -> aoaloc::Result<()> {
    let cfg = RunConfig::from_toml(
        r#"
        seed = 3
        snr_star_db = 20.0
        [sources]
        count = 3
        [trajectory]
        windows = 4
        window_duration = 0.02
        [map]
        extent = 1000.0
        origin = [-500.0, -500.0]
        cell_size = 2.0
        "#,
    )?;
    let (trials, report) = evaluate(&cfg)?;
    for (k, w) in trials[0].windows.iter().enumerate() {
        println!(
            "window {}: {} samples kept, {} directions, {} tracks, elevation rmse {:?} deg, localization rmse {:?} m",
            w.index,
            w.detected,
            w.estimates.len(),
            w.tracks.len(),
            report.aoa.elevation_deg[k],
            report.localization.rmse_m[k]
        );
    }
    for (s, p) in trials[0].sources.iter().enumerate() {
        println!(
            "source {s} at {:?}: reliability {:.2}",
            p.as_slice(),
            report.reliability[s]
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
