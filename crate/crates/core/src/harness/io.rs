//! CSV and SVG outputs of the experiments.

use std::path::Path;

use super::config::RunConfig;
use super::experiments::{BoundRow, CompareRow, HeatCell, DETECTOR_NAMES};
use super::metrics::MetricsReport;
use super::pipeline::TrialRecord;
use super::plot::{self, Series};
use crate::error::Result;

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn writer(dir: &Path, name: &str) -> Result<csv::Writer<std::fs::File>> {
    Ok(csv::Writer::from_path(dir.join(name))?)
}

/// Writes the per-window tables, metric series, plots and a summary of a
/// pipeline run into `dir`.
pub fn write_run(dir: &Path, cfg: &RunConfig, trials: &[TrialRecord], report: &MetricsReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()?)?;

    let mut w = writer(dir, "windows.csv")?;
    w.write_record([
        "trial",
        "window",
        "midpoint",
        "x",
        "y",
        "z",
        "detected",
        "noise_var_est",
        "noise_var_true",
        "snr_est",
        "snr_true",
        "mdl_order",
        "rough",
        "estimates",
        "refine_iterations",
        "refine_converged",
        "tracks",
        "error",
    ])?;
    for t in trials {
        for r in &t.windows {
            w.write_record([
                t.trial.to_string(),
                r.index.to_string(),
                r.midpoint.to_string(),
                r.reported_position.x.to_string(),
                r.reported_position.y.to_string(),
                r.reported_position.z.to_string(),
                r.detected.to_string(),
                r.noise_var_est.to_string(),
                r.noise_var_true.to_string(),
                r.inst_snr_est.to_string(),
                r.inst_snr_true.to_string(),
                r.mdl_order.to_string(),
                r.rough.len().to_string(),
                r.estimates.len().to_string(),
                r.refine_iterations.to_string(),
                r.refine_converged.to_string(),
                r.tracks.len().to_string(),
                r.error.clone().unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = writer(dir, "estimates.csv")?;
    w.write_record(["trial", "window", "kind", "theta_deg", "phi_deg"])?;
    for t in trials {
        for r in &t.windows {
            for (kind, list) in [("rough", &r.rough), ("refined", &r.estimates)] {
                for &(th, ph) in list {
                    w.write_record([
                        t.trial.to_string(),
                        r.index.to_string(),
                        kind.to_string(),
                        th.to_degrees().to_string(),
                        ph.to_degrees().to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;

    let mut w = writer(dir, "truth.csv")?;
    w.write_record(["trial", "window", "source", "theta_deg", "phi_deg"])?;
    for t in trials {
        for r in &t.windows {
            for a in &r.truth {
                w.write_record([
                    t.trial.to_string(),
                    r.index.to_string(),
                    a.source.to_string(),
                    a.theta.to_degrees().to_string(),
                    a.phi.to_degrees().to_string(),
                ])?;
            }
        }
    }
    w.flush()?;

    let mut w = writer(dir, "tracks.csv")?;
    w.write_record(["trial", "window", "id", "x", "y", "z", "reliability", "hist"])?;
    for t in trials {
        for r in &t.windows {
            for tr in &r.tracks {
                let (x, y, z) = match tr.position {
                    Some(p) => (p.x.to_string(), p.y.to_string(), p.z.to_string()),
                    None => Default::default(),
                };
                w.write_record([
                    t.trial.to_string(),
                    r.index.to_string(),
                    tr.id.to_string(),
                    x,
                    y,
                    z,
                    tr.reliability.to_string(),
                    tr.hist.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;

    let mut w = writer(dir, "sources.csv")?;
    w.write_record(["trial", "source", "x", "y", "z"])?;
    for t in trials {
        for (k, p) in t.sources.iter().enumerate() {
            w.write_record([
                t.trial.to_string(),
                k.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                p.z.to_string(),
            ])?;
        }
    }
    w.flush()?;

    let mut w = writer(dir, "metrics.csv")?;
    w.write_record([
        "window",
        "detected_aoas",
        "elevation_rmse_deg",
        "azimuth_rmse_deg",
        "aoa_matched",
        "localization_rmse_m",
        "loc_matched",
        "spurious",
        "missed",
    ])?;
    let l = &report.localization;
    for k in 0..report.detected_aoas.len() {
        w.write_record([
            (k + 1).to_string(),
            report.detected_aoas[k].to_string(),
            opt(report.aoa.elevation_deg[k]),
            opt(report.aoa.azimuth_deg[k]),
            report.aoa.matched[k].to_string(),
            opt(l.rmse_m[k]),
            l.matched[k].to_string(),
            l.spurious[k].to_string(),
            l.missed[k].to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(dir, "reliability.csv")?;
    w.write_record(["source", "reliability"])?;
    for (k, r) in report.reliability.iter().enumerate() {
        w.write_record([k.to_string(), r.to_string()])?;
    }
    w.flush()?;

    let windows = |v: &[Option<f64>]| {
        v.iter()
            .enumerate()
            .map(|(k, &y)| ((k + 1) as f64, y))
            .collect::<Vec<_>>()
    };
    plot::save(
        &dir.join("aoa_rmse.svg"),
        &plot::line_chart(
            "Angle RMSE",
            "window",
            "deg",
            &[
                Series {
                    label: "elevation".into(),
                    points: windows(&report.aoa.elevation_deg),
                },
                Series {
                    label: "azimuth".into(),
                    points: windows(&report.aoa.azimuth_deg),
                },
            ],
        ),
    )?;
    plot::save(
        &dir.join("localization_rmse.svg"),
        &plot::line_chart(
            "Localization RMSE",
            "window",
            "m",
            &[Series {
                label: "located tracks".into(),
                points: windows(&l.rmse_m),
            }],
        ),
    )?;
    let counts: Vec<Option<f64>> = report.detected_aoas.iter().map(|&c| Some(c)).collect();
    plot::save(
        &dir.join("detected_aoas.svg"),
        &plot::line_chart(
            "Angle estimates per window",
            "window",
            "count",
            &[Series {
                label: "mean".into(),
                points: windows(&counts),
            }],
        ),
    )?;

    let summary = format!(
        "trials {}\nwindows {}\nfinal elevation rmse deg {}\nfinal azimuth rmse deg {}\nfinal localization rmse m {}\nwindow errors {}\n",
        trials.len(),
        report.detected_aoas.len(),
        opt(report.aoa.elevation_deg.last().copied().flatten()),
        opt(report.aoa.azimuth_deg.last().copied().flatten()),
        opt(l.rmse_m.last().copied().flatten()),
        report.window_errors,
    );
    std::fs::write(dir.join("summary.txt"), summary)?;
    // timings vary between runs, so they stay out of the tables above
    std::fs::write(
        dir.join("runtime.txt"),
        format!(
            "window seconds mean {}\nwindow seconds max {}\n",
            report.window_seconds_mean, report.window_seconds_max
        ),
    )?;
    Ok(())
}

pub fn write_compare(dir: &Path, rows: &[CompareRow]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = writer(dir, "compare_detectors.csv")?;
    w.write_record([
        "detector",
        "snr_star_db",
        "n_in_sig",
        "n_out",
        "p_false",
        "inexact_runs",
    ])?;
    for r in rows {
        w.write_record([
            r.detector.to_string(),
            r.snr_star_db.to_string(),
            r.n_in_sig.to_string(),
            r.n_out.to_string(),
            opt(r.p_false),
            r.inexact.to_string(),
        ])?;
    }
    w.flush()?;
    let series: Vec<Series> = DETECTOR_NAMES
        .iter()
        .map(|&d| Series {
            label: d.to_string(),
            points: rows
                .iter()
                .filter(|r| r.detector == d)
                .map(|r| (r.snr_star_db, r.p_false))
                .collect(),
        })
        .collect();
    plot::save(
        &dir.join("compare_detectors.svg"),
        &plot::line_chart("False detection probability", "SNR* (dB)", "P_false", &series),
    )
}

pub fn write_heatmap(dir: &Path, cells: &[HeatCell], step: f64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = writer(dir, "heatmap.csv")?;
    w.write_record(["x", "y", "z", "rmse_m", "located_trials", "bound_m"])?;
    for c in cells {
        w.write_record([
            c.x.to_string(),
            c.y.to_string(),
            c.z.to_string(),
            opt(c.rmse),
            c.located_trials.to_string(),
            opt(c.bound),
        ])?;
    }
    w.flush()?;
    let grid: Vec<_> = cells.iter().map(|c| (c.x, c.y, c.rmse)).collect();
    plot::save(
        &dir.join("heatmap.svg"),
        &plot::heat_map("Single-source localization RMSE (m)", &grid, step),
    )?;
    let bound: Vec<_> = cells.iter().map(|c| (c.x, c.y, c.bound)).collect();
    plot::save(
        &dir.join("heatmap_bound.svg"),
        &plot::heat_map("Worst-case height-stall error (m)", &bound, step),
    )
}

pub fn write_bound(dir: &Path, rows: &[BoundRow]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = writer(dir, "bound.csv")?;
    w.write_record(["theta_deg", "numeric_max", "argmax_dphi", "tan2", "abs_diff", "e_max"])?;
    for r in rows {
        w.write_record([
            r.theta_deg.to_string(),
            r.numeric_max.to_string(),
            r.argmax_dphi.to_string(),
            r.tan2.to_string(),
            (r.numeric_max - r.tan2).abs().to_string(),
            r.e_max.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
