//! Per-window orchestration: synthesis, detection, coarse and refined
//! directions, then the tracker.

use std::time::Instant;

use nalgebra::Vector3;
use rayon::prelude::*;

use super::config::{MapKind, RunConfig, SourcePreset};
use crate::detector::detect;
use crate::error::{Error, Result};
use crate::localization::{TrackerState, WindowUpdate};
use crate::manifold::{gate_new_directions, initial_manifold};
use crate::refiner::{read_aoas, refine_detection};
use crate::rng::trial_seed;
use crate::rough_aoa::{rough_aoa, SteeringTable};
use crate::scene::{build_city_map, ArrayGeometry, CityMap, SourceSet, Trajectory};
use crate::signal::{
    noise_variance_for_snr_star, unit_direction, Imperfections, NoiseModel, Simulator, SynthesisOptions, WindowCapture,
};
use crate::sparse::EpsilonModel;

/// Everything shared by the trials of one run.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub cfg: RunConfig,
    pub geometry: ArrayGeometry,
    pub trajectory: Trajectory,
    pub table: SteeringTable,
    pub model: EpsilonModel,
    /// Map before sources are placed on it.
    pub base_map: CityMap,
}

/// Scene of one trial.
#[derive(Debug, Clone)]
pub struct TrialScene {
    pub sources: SourceSet,
    pub true_map: CityMap,
    /// Map used by the localizer.
    pub receiver_map: CityMap,
    pub noise_var: f64,
    pub seed: u64,
}

/// Angles of one source seen from the true array position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthAngle {
    pub source: usize,
    pub theta: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackSnapshot {
    pub id: u64,
    pub position: Option<Vector3<f64>>,
    pub reliability: f64,
    pub hist: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowRecord {
    pub index: usize,
    pub midpoint: f64,
    pub reported_position: Vector3<f64>,
    pub true_position: Vector3<f64>,
    /// Sources with at least one pulse sample in the window.
    pub truth: Vec<TruthAngle>,
    pub detected: usize,
    pub noise_var_est: f64,
    pub noise_var_true: f64,
    pub inst_snr_est: f64,
    /// Of the retained columns; NaN when nothing was retained.
    pub inst_snr_true: f64,
    pub mdl_order: usize,
    pub rough: Vec<(f64, f64)>,
    /// Directions handed to the tracker, as `(theta, phi)`.
    pub estimates: Vec<(f64, f64)>,
    pub refine_iterations: usize,
    pub refine_converged: bool,
    pub update: WindowUpdate,
    pub tracks: Vec<TrackSnapshot>,
    pub error: Option<String>,
    pub seconds: f64,
}

impl WindowRecord {
    fn new(cap: &WindowCapture) -> Self {
        let truth = cap
            .truth
            .iter()
            .enumerate()
            .filter(|(_, t)| !t.active_columns.is_empty())
            .map(|(source, t)| TruthAngle {
                source,
                theta: t.theta,
                phi: t.phi,
            })
            .collect();
        Self {
            index: cap.index,
            midpoint: cap.midpoint,
            reported_position: cap.reported_pose.position,
            true_position: cap.true_pose.position,
            truth,
            detected: 0,
            noise_var_est: f64::NAN,
            noise_var_true: cap.noise_variance,
            inst_snr_est: f64::NAN,
            inst_snr_true: f64::NAN,
            mdl_order: 0,
            rough: Vec::new(),
            estimates: Vec::new(),
            refine_iterations: 0,
            refine_converged: false,
            update: WindowUpdate::default(),
            tracks: Vec::new(),
            error: None,
            seconds: 0.0,
        }
    }

    /// Located tracks as `(id, position)`.
    pub fn located(&self) -> Vec<(u64, Vector3<f64>)> {
        self.tracks
            .iter()
            .filter_map(|t| t.position.map(|p| (t.id, p)))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    /// True source positions after placement on the map.
    pub sources: Vec<Vector3<f64>>,
    pub windows: Vec<WindowRecord>,
}

/// Height of the flat stand-in map used when the receiver has no city model:
/// the lowest point of the true map.
fn flat_stand_in(truth: &CityMap) -> Result<CityMap> {
    let level = truth.heights().iter().copied().fold(f64::INFINITY, f64::min);
    let [ex, ey] = truth.extent();
    CityMap::new(vec![level.max(0.0)], 1, 1, truth.origin(), ex.max(ey))
}

impl PreparedRun {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let geometry = cfg.geometry()?;
        let trajectory = cfg.trajectory()?;
        let table = SteeringTable::new(&geometry, &cfg.grid.build()?);
        let model = match &cfg.epsilon_model {
            Some(p) => EpsilonModel::load(p)?,
            None => EpsilonModel::shipped(),
        };
        let base_map = match cfg.map.kind {
            MapKind::City => build_city_map(&cfg.map.city_params())?,
            MapKind::Flat => CityMap::flat(cfg.map.origin, cfg.map.extent, cfg.map.extent.max(cfg.map.cell_size))?,
        };
        Ok(Self {
            cfg: cfg.clone(),
            geometry,
            trajectory,
            table,
            model,
            base_map,
        })
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        trial_seed(self.cfg.seed, trial as u64)
    }

    /// Sources of `trial` as configured.
    pub fn configured_sources(&self, trial: usize) -> SourceSet {
        let s = &self.cfg.sources;
        match s.preset {
            SourcePreset::Random => {
                let [x0, y0, x1, y1] = s.random_region;
                SourceSet::random_on_map(
                    &self.base_map,
                    s.count.unwrap_or(1),
                    [x0, y0],
                    [x1, y1],
                    self.trial_seed(trial),
                    s.pulse_duration,
                    s.pulse_power,
                    s.mean_inter_pulse,
                )
            }
            _ => self.cfg.base_sources(),
        }
    }

    /// Places `sources` on a copy of the map and sets the noise level.
    pub fn scene_with(&self, mut sources: SourceSet, seed: u64) -> Result<TrialScene> {
        let mut true_map = self.base_map.clone();
        if self.cfg.sources.preset != SourcePreset::Random {
            sources.place_on(&mut true_map, self.cfg.map.placement(), self.cfg.map.pad);
        }
        let receiver_map = if self.cfg.imperfections.map {
            flat_stand_in(&true_map)?
        } else {
            true_map.clone()
        };
        let noise_var = if self.cfg.synthesis.noise_free {
            0.0
        } else {
            noise_variance_for_snr_star(&sources, &self.trajectory.initial_position, self.cfg.snr_star_db)?
        };
        Ok(TrialScene {
            sources,
            true_map,
            receiver_map,
            noise_var,
            seed,
        })
    }

    pub fn scene(&self, trial: usize) -> Result<TrialScene> {
        self.scene_with(self.configured_sources(trial), self.trial_seed(trial))
    }

    pub fn synthesis_options(&self, noise_var: f64) -> SynthesisOptions {
        let s = &self.cfg.synthesis;
        let im = &self.cfg.imperfections;
        SynthesisOptions {
            sample_rate: s.sample_rate,
            freeze_geometry: s.freeze_geometry,
            shape: s.pulse_shape(),
            noise: NoiseModel { variance: noise_var },
            imperfections: Imperfections {
                yaw_sd: im.dir.then(|| im.dir_sd_deg.to_radians()),
                position_sd: im.loc.then_some(im.loc_sd),
            },
        }
    }

    pub fn simulator(&self, scene: &TrialScene) -> Result<Simulator> {
        Simulator::new(
            self.geometry.clone(),
            self.trajectory.clone(),
            scene.sources.clone(),
            self.synthesis_options(scene.noise_var),
            scene.seed,
        )
    }

    pub fn run_trial(&self, trial: usize) -> Result<TrialRecord> {
        let scene = self.scene(trial)?;
        self.run_scene(trial, &scene)
    }

    /// Runs every window of one scene. Module failures inside a window are
    /// stored in its record; the window still counts for the tracker.
    pub fn run_scene(&self, trial: usize, scene: &TrialScene) -> Result<TrialRecord> {
        let sim = self.simulator(scene)?;
        let mut tracker = TrackerState::new(self.cfg.tracker, self.trajectory.start_time)?;
        let mut windows = Vec::with_capacity(self.trajectory.window_count);
        for i in 1..=self.trajectory.window_count {
            let clock = Instant::now();
            let cap = sim.synthesize_window(i)?;
            let mut rec = WindowRecord::new(&cap);
            let dirs = match self.process_window(&cap, &tracker, &mut rec) {
                Ok(d) => d,
                Err(e) => {
                    rec.error = Some(e.to_string());
                    Vec::new()
                }
            };
            let r = cap.reported_pose.position;
            match tracker.assign_and_update(&dirs, &r, cap.midpoint, &scene.receiver_map) {
                Ok(u) => rec.update = u,
                Err(e) => rec.error = Some(e.to_string()),
            }
            rec.tracks = tracker
                .tracks
                .iter()
                .map(|t| TrackSnapshot {
                    id: t.id,
                    position: t.position,
                    reliability: tracker.reliability(t),
                    hist: t.hist,
                })
                .collect();
            rec.seconds = clock.elapsed().as_secs_f64();
            windows.push(rec);
        }
        let sources = scene.sources.sources.iter().map(|s| s.position).collect();
        Ok(TrialRecord {
            trial,
            seed: scene.seed,
            sources,
            windows,
        })
    }

    /// Detection, coarse directions and (closed loop) refinement. Returns the
    /// unit directions for the tracker.
    fn process_window(
        &self,
        cap: &WindowCapture,
        tracker: &TrackerState,
        rec: &mut WindowRecord,
    ) -> Result<Vec<Vector3<f64>>> {
        let det = detect(&cap.samples, &self.cfg.detector)?;
        rec.detected = det.len();
        rec.noise_var_est = det.noise_var;
        rec.inst_snr_est = det.inst_snr;
        if det.is_empty() {
            return Ok(Vec::new());
        }
        rec.inst_snr_true = cap.true_snr(&det.kept);

        let rough = rough_aoa(&det.filtered, &self.table)?;
        rec.mdl_order = rough.order;
        rec.rough = rough.peaks.peaks.iter().map(|p| (p.theta, p.phi)).collect();
        let rough_dirs = rec
            .rough
            .iter()
            .map(|&(t, p)| unit_direction(t, p))
            .collect::<Result<Vec<_>>>()?;

        if !self.cfg.closed_loop {
            rec.estimates = rec.rough.clone();
            return Ok(rough_dirs);
        }

        let bank = tracker.direction_bank(&cap.reported_pose.position);
        let fresh = gate_new_directions(&rough_dirs, &bank, self.cfg.tracker.xi)?;
        let fresh: Vec<_> = fresh.into_iter().map(|k| (k, rough_dirs[k])).collect();
        let a0 = match initial_manifold(&bank, &fresh, &self.geometry) {
            Ok(a) => a,
            Err(Error::EmptyManifold) => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let report = refine_detection(&det, &a0, &self.model, &self.cfg.refiner)?;
        rec.refine_iterations = report.criteria.len();
        rec.refine_converged = report.converged;
        let rc = &self.cfg.refiner;
        rec.estimates = read_aoas(
            &report.manifold.columns,
            &self.table,
            &self.geometry,
            rc.zoom_levels,
            rc.zoom_factor,
        );
        rec.estimates.iter().map(|&(t, p)| unit_direction(t, p)).collect()
    }

    /// All configured trials; trials run in parallel and come back in order.
    pub fn run_trials(&self) -> Result<Vec<TrialRecord>> {
        (0..self.cfg.trials)
            .into_par_iter()
            .map(|t| self.run_trial(t))
            .collect()
    }
}
