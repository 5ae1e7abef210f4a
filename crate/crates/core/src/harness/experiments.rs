//! Experiment drivers behind the command line: detector comparison, the
//! single-source heat map and the height-error bound table.

use nalgebra::Vector3;
use rand::Rng;
use rayon::prelude::*;

use super::config::RunConfig;
use super::pipeline::PreparedRun;
use crate::baselines::{false_detection_probability, match_output_size, Baseline};
use crate::detector::{detect, DetectorConfig};
use crate::error::Result;
use crate::localization::bound::{max_norm2_on_grid, norm2_cb, worst_case_rmse};
use crate::rng::{self, trial_seed, Purpose};
use crate::scene::SourceSet;
use crate::signal::{angles_of, noise_variance_for_snr_star, unit_direction, Simulator};

pub const DETECTOR_NAMES: [&str; 4] = ["proposed", "binary", "glrt", "sld"];

/// Averages of one detector at one SNR* point.
#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub detector: &'static str,
    pub snr_star_db: f64,
    /// Mean number of signal-bearing columns per window.
    pub n_in_sig: f64,
    /// Mean output size (shared by all detectors).
    pub n_out: f64,
    /// Mean over runs with a nonzero output; `None` when there were none.
    pub p_false: Option<f64>,
    /// Runs where some tie made the matched size unreachable.
    pub inexact: usize,
}

/// Sources at uniform range, elevation and azimuth around `r0`.
pub fn comparison_sources(cfg: &RunConfig, configuration: usize) -> SourceSet {
    let c = &cfg.compare;
    let mut r = rng::stream(cfg.seed, Purpose::Scenario, configuration as u64, 0);
    let r0 = Vector3::from(cfg.trajectory.initial_position);
    let pos: Vec<Vector3<f64>> = (0..c.sources)
        .map(|_| {
            let range = draw(&mut r, c.range);
            let theta = draw(&mut r, c.theta_deg).to_radians();
            let phi = r.random_range(0.0..std::f64::consts::TAU);
            r0 + range * unit_direction(theta, phi).expect("finite angles")
        })
        .collect();
    let s = &cfg.sources;
    SourceSet::uniform(&pos, s.pulse_duration, s.pulse_power, s.mean_inter_pulse)
}

fn draw<R: Rng>(r: &mut R, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        r.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

/// Per-detector `(p_false, inexact)` for one window, plus `(n_in_sig, n_out)`.
type RunOutcome = (Vec<(Option<f64>, bool)>, usize, usize);

fn compare_once(run: &PreparedRun, snr_db: f64, configuration: usize, realization: usize) -> Result<RunOutcome> {
    let cfg = &run.cfg;
    let c = &cfg.compare;
    let sources = comparison_sources(cfg, configuration);
    let noise_var = noise_variance_for_snr_star(&sources, &run.trajectory.initial_position, snr_db)?;
    let mut traj = run.trajectory.clone();
    traj.window_count = 1;
    let seed = trial_seed(cfg.seed, (configuration * c.realizations + realization) as u64);
    let sim = Simulator::new(
        run.geometry.clone(),
        traj,
        sources,
        run.synthesis_options(noise_var),
        seed,
    )?;
    let cap = sim.synthesize_window(1)?;
    let signal: Vec<usize> = cap
        .clean
        .iter()
        .filter(|(_, v)| v.norm() > 0.0)
        .map(|(&g, _)| g)
        .collect();

    let det_cfg = DetectorConfig {
        l_adj: c.l_adj,
        diff_max: c.diff_max,
        ..cfg.detector
    };
    let det = detect(&cap.samples, &det_cfg)?;
    let n_out = det.len();
    let mut out = vec![(false_detection_probability(&det.kept, &signal), false)];
    let gamma = cap.true_snr(&signal);
    let baselines = [
        Baseline::Binary { n: c.binary_n },
        Baseline::Glrt {
            snr: if gamma.is_finite() { gamma } else { 1e12 },
            noise_var,
        },
        Baseline::SquareLaw,
    ];
    for b in baselines {
        let m = match_output_size(&b.statistics(&cap.samples), n_out);
        out.push((false_detection_probability(&m.detected, &signal), !m.exact));
    }
    Ok((out, signal.len(), n_out))
}

/// Runs all detectors at matched output size over the SNR* grid. Rows come
/// in grid order, detectors in [`DETECTOR_NAMES`] order.
pub fn compare_detectors(cfg: &RunConfig) -> Result<Vec<CompareRow>> {
    let run = PreparedRun::new(cfg)?;
    let c = &cfg.compare;
    let mut rows = Vec::new();
    for &snr in &c.snr_grid_db {
        let jobs: Vec<(usize, usize)> = (0..c.configurations)
            .flat_map(|k| (0..c.realizations).map(move |r| (k, r)))
            .collect();
        let outcomes: Vec<RunOutcome> = jobs
            .par_iter()
            .map(|&(k, r)| compare_once(&run, snr, k, r))
            .collect::<Result<_>>()?;
        let runs = outcomes.len() as f64;
        let n_in = outcomes.iter().map(|o| o.1 as f64).sum::<f64>() / runs;
        let n_out = outcomes.iter().map(|o| o.2 as f64).sum::<f64>() / runs;
        for (d, name) in DETECTOR_NAMES.iter().enumerate() {
            let defined: Vec<f64> = outcomes.iter().filter_map(|o| o.0[d].0).collect();
            let p_false = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
            let inexact = outcomes.iter().filter(|o| o.0[d].1).count();
            rows.push(CompareRow {
                detector: name,
                snr_star_db: snr,
                n_in_sig: n_in,
                n_out,
                p_false,
                inexact,
            });
        }
    }
    Ok(rows)
}

/// Grid points where the proposed detector's false-detection probability is
/// at most the square-law detector's, out of all grid points. A point where
/// either value is undefined does not count as a win.
pub fn proposed_vs_sld(rows: &[CompareRow]) -> (usize, usize) {
    let mut grid: Vec<f64> = rows.iter().map(|r| r.snr_star_db).collect();
    grid.dedup();
    let p = |name: &str, snr: f64| {
        rows.iter()
            .find(|r| r.detector == name && r.snr_star_db == snr)
            .and_then(|r| r.p_false)
    };
    let wins = grid
        .iter()
        .filter(|&&s| matches!((p("proposed", s), p("sld", s)), (Some(a), Some(b)) if a <= b))
        .count();
    (wins, grid.len())
}

/// One heat-map cell.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatCell {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// RMS over trials of the final-window error of the located track
    /// nearest the source; `None` when no trial located it.
    pub rmse: Option<f64>,
    pub located_trials: usize,
    /// Worst-case error from a stalled height iteration, for the elevation
    /// seen from the middle of the trajectory.
    pub bound: Option<f64>,
}

/// Sweeps a single source over the configured grid.
pub fn heatmap(cfg: &RunConfig) -> Result<Vec<HeatCell>> {
    let run = PreparedRun::new(cfg)?;
    let h = &cfg.heatmap;
    let [x0, y0, x1, y1] = h.region;
    let nx = ((x1 - x0) / h.step + 1e-9).floor() as usize + 1;
    let ny = ((y1 - y0) / h.step + 1e-9).floor() as usize + 1;
    let cells: Vec<(f64, f64)> = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| (x0 + i as f64 * h.step, y0 + j as f64 * h.step)))
        .collect();
    let mid = run
        .trajectory
        .position_at(0.5 * (run.trajectory.start_time + run.trajectory.end_time()));
    let dz_max = run.base_map.max_height_difference();
    let s = &cfg.sources;
    cells
        .par_iter()
        .enumerate()
        .map(|(k, &(x, y))| {
            let z = run.base_map.height_at(x, y);
            let p = Vector3::new(x, y, z);
            let src = SourceSet::uniform(&[p], s.pulse_duration, s.pulse_power, s.mean_inter_pulse);
            let mut sq = 0.0;
            let mut located = 0;
            for t in 0..h.trials {
                let seed = trial_seed(cfg.seed, (k * h.trials + t) as u64);
                let scene = run.scene_with(src.clone(), seed)?;
                let rec = run.run_scene(t, &scene)?;
                let last = rec.windows.last().expect("at least one window");
                let best = last
                    .located()
                    .iter()
                    .map(|(_, q)| (q - rec.sources[0]).norm())
                    .fold(f64::INFINITY, f64::min);
                if best.is_finite() {
                    sq += best * best;
                    located += 1;
                }
            }
            let (theta, _) = angles_of(&(p - mid));
            let bound = worst_case_rmse(theta, 0.0, dz_max).ok().map(|b| b.e_max);
            Ok(HeatCell {
                x,
                y,
                z,
                rmse: (located > 0).then(|| (sq / located as f64).sqrt()),
                located_trials: located,
                bound,
            })
        })
        .collect()
}

/// One row of the height-error bound table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundRow {
    pub theta_deg: f64,
    /// Grid maximum of `||C^+ b||^2` over the azimuth difference.
    pub numeric_max: f64,
    pub argmax_dphi: f64,
    pub tan2: f64,
    pub e_max: f64,
}

pub fn analyze_bound(thetas_deg: &[f64], step: f64, dz_max: f64) -> Result<Vec<BoundRow>> {
    thetas_deg
        .iter()
        .map(|&t| {
            let theta = t.to_radians();
            let (argmax_dphi, numeric_max) = max_norm2_on_grid(theta, step, norm2_cb);
            let rep = worst_case_rmse(theta, argmax_dphi, dz_max)?;
            Ok(BoundRow {
                theta_deg: t,
                numeric_max,
                argmax_dphi,
                tan2: rep.max_norm2,
                e_max: rep.e_max,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparison_sources_follow_the_scenario() {
        let cfg = RunConfig::default();
        let s = comparison_sources(&cfg, 3);
        let r0 = Vector3::from(cfg.trajectory.initial_position);
        assert_eq!(s.len(), 11);
        for src in &s.sources {
            let d = src.position - r0;
            let (theta, _) = angles_of(&d);
            assert!((500.0..=2000.0).contains(&d.norm()));
            assert!(theta.to_degrees() >= 130.0 - 1e-9);
        }
        assert_eq!(comparison_sources(&cfg, 3), s);
    }

    #[test]
    fn bound_table_matches_tan_squared() {
        let rows = analyze_bound(&[10.0, 45.0, 80.0], 1e-3, 2.0).unwrap();
        for r in rows {
            assert!((r.numeric_max - r.tan2).abs() <= 1e-6 * r.tan2.max(1.0));
        }
    }

    #[test]
    fn sld_comparison_counting() {
        let row = |d: &'static str, s: f64, p: Option<f64>| CompareRow {
            detector: d,
            snr_star_db: s,
            n_in_sig: 0.0,
            n_out: 0.0,
            p_false: p,
            inexact: 0,
        };
        let rows = vec![
            row("proposed", 0.0, Some(0.1)),
            row("sld", 0.0, Some(0.2)),
            row("proposed", 5.0, None),
            row("sld", 5.0, None),
        ];
        assert_eq!(proposed_vs_sld(&rows), (1, 2));
    }
}
