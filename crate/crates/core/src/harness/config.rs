//! Run configuration, read from TOML. Every field has a default, so an empty
//! file describes the reference scenario.

use std::path::{Path, PathBuf};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::detector::DetectorConfig;
use crate::error::{Error, Result};
use crate::localization::TrackerConfig;
use crate::refiner::RefinerConfig;
use crate::rough_aoa::GridSpec;
use crate::scene::{ArrayGeometry, CityParams, SourcePlacement, SourceSet, Trajectory, REFERENCE_SOURCES};
use crate::signal::PulseShape;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArrayConfig {
    pub elements: usize,
    pub radius: f64,
    pub carrier_freq: f64,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        Self {
            elements: 6,
            radius: 0.2,
            carrier_freq: 0.5e9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub initial_position: [f64; 3],
    pub velocity: [f64; 3],
    pub start_time: f64,
    pub window_duration: f64,
    pub windows: usize,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            initial_position: [27.0, 11.0, 500.0],
            velocity: [44.0, 33.0, 0.0],
            start_time: 0.1,
            window_duration: 0.03,
            windows: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourcePreset {
    /// The built-in eleven-source table.
    #[default]
    Reference,
    /// `positions` from this file.
    Custom,
    /// `count` sources drawn uniformly over `random_region`.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    pub preset: SourcePreset,
    pub positions: Vec<[f64; 3]>,
    /// Keep only the `count` sources closest to the initial position
    /// (reference and custom presets) or draw this many (random preset).
    pub count: Option<usize>,
    /// `[x_min, y_min, x_max, y_max]` for the random preset.
    pub random_region: [f64; 4],
    pub pulse_duration: f64,
    pub pulse_power: f64,
    pub mean_inter_pulse: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            preset: SourcePreset::Reference,
            positions: Vec::new(),
            count: None,
            random_region: [-700.0, -700.0, 700.0, 700.0],
            pulse_duration: 3e-6,
            pulse_power: 3.0,
            mean_inter_pulse: 3e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapKind {
    #[default]
    City,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    #[default]
    Stamp,
    Snap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    pub kind: MapKind,
    pub seed: u64,
    pub extent: f64,
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub building: [f64; 2],
    pub height_range: [f64; 2],
    pub street_width: [f64; 2],
    pub placement: Placement,
    /// Footprint stamped under each source with the stamp placement (m).
    pub pad: [f64; 2],
}

impl Default for MapConfig {
    fn default() -> Self {
        let c = CityParams::default();
        Self {
            kind: MapKind::City,
            seed: c.seed,
            extent: c.extent,
            origin: c.origin,
            cell_size: c.cell_size,
            building: c.building,
            height_range: c.height_range,
            street_width: c.street_width,
            placement: Placement::Stamp,
            pad: [10.0, 10.0],
        }
    }
}

impl MapConfig {
    pub fn city_params(&self) -> CityParams {
        CityParams {
            seed: self.seed,
            extent: self.extent,
            origin: self.origin,
            cell_size: self.cell_size,
            building: self.building,
            height_range: self.height_range,
            street_width: self.street_width,
        }
    }

    pub fn placement(&self) -> SourcePlacement {
        match self.placement {
            Placement::Stamp => SourcePlacement::Stamp,
            Placement::Snap => SourcePlacement::Snap,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeConfig {
    #[default]
    Sine,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub sample_rate: f64,
    pub freeze_geometry: bool,
    pub noise_free: bool,
    pub shape: ShapeConfig,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            sample_rate: 10e6,
            freeze_geometry: false,
            noise_free: false,
            shape: ShapeConfig::Sine,
        }
    }
}

impl SynthesisConfig {
    pub fn pulse_shape(&self) -> PulseShape {
        match self.shape {
            ShapeConfig::Sine => PulseShape::Sine,
            ShapeConfig::Rectangular => PulseShape::Rectangular,
        }
    }
}

/// Receiver imperfection switches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImperfectionConfig {
    /// Perturb the reported array position.
    pub loc: bool,
    pub loc_sd: f64,
    /// Rotate the physical array about z each window.
    pub dir: bool,
    pub dir_sd_deg: f64,
    /// Localize against a flat map instead of the true one.
    pub map: bool,
}

impl Default for ImperfectionConfig {
    fn default() -> Self {
        Self {
            loc: false,
            loc_sd: 5.0,
            dir: false,
            dir_sd_deg: 5.0,
            map: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Great-circle matching radius for angles (deg).
    pub aoa_match_deg: f64,
    /// Matching radius for positions (m).
    pub pos_match_m: f64,
    /// A source enters the angle RMSE when it was matched in at least this
    /// fraction of the windows of the most-matched source.
    pub sufficiency: f64,
    /// Reliability above which a track counts as established.
    pub reliability_min: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            aoa_match_deg: 5.0,
            pos_match_m: 50.0,
            sufficiency: 0.5,
            reliability_min: 0.5,
        }
    }
}

/// Detector comparison scenario: random sources around the initial array
/// position, one window per noise realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub snr_grid_db: Vec<f64>,
    pub configurations: usize,
    pub realizations: usize,
    pub sources: usize,
    pub range: [f64; 2],
    pub theta_deg: [f64; 2],
    /// Run-length parameters of the proposed detector in this experiment.
    pub l_adj: usize,
    pub diff_max: usize,
    /// `n` of the binary n-of-M detector.
    pub binary_n: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0],
            configurations: 10,
            realizations: 2,
            sources: 11,
            range: [500.0, 2000.0],
            theta_deg: [130.0, 180.0],
            l_adj: 10,
            diff_max: 5,
            binary_n: 3,
        }
    }
}

/// Single-source localization error over a grid of source positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatmapConfig {
    /// Grid spacing (m).
    pub step: f64,
    /// `[x_min, y_min, x_max, y_max]` of the source grid.
    pub region: [f64; 4],
    pub trials: usize,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            step: 200.0,
            region: [-1000.0, -1000.0, 1000.0, 1000.0],
            trials: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub trials: usize,
    pub snr_star_db: f64,
    /// Run the manifold refiner; otherwise the coarse directions go straight
    /// to the tracker.
    pub closed_loop: bool,
    /// Threshold model file; the shipped model when absent.
    pub epsilon_model: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub array: ArrayConfig,
    pub trajectory: TrajectoryConfig,
    pub sources: SourceConfig,
    pub map: MapConfig,
    pub synthesis: SynthesisConfig,
    pub detector: DetectorConfig,
    pub grid: GridSpec,
    pub refiner: RefinerConfig,
    pub tracker: TrackerConfig,
    pub imperfections: ImperfectionConfig,
    pub metrics: MetricsConfig,
    pub compare: CompareConfig,
    pub heatmap: HeatmapConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 1,
            snr_star_db: 20.0,
            closed_loop: true,
            epsilon_model: None,
            output_dir: PathBuf::from("out"),
            array: ArrayConfig::default(),
            trajectory: TrajectoryConfig::default(),
            sources: SourceConfig::default(),
            map: MapConfig::default(),
            synthesis: SynthesisConfig::default(),
            detector: DetectorConfig::default(),
            grid: GridSpec::default(),
            refiner: RefinerConfig::default(),
            tracker: TrackerConfig::default(),
            imperfections: ImperfectionConfig::default(),
            metrics: MetricsConfig::default(),
            compare: CompareConfig::default(),
            heatmap: HeatmapConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if !self.snr_star_db.is_finite() {
            return Err(Error::Config("snr_star_db must be finite".into()));
        }
        self.detector.validate()?;
        self.refiner.validate()?;
        self.tracker.validate()?;
        self.grid.build()?;
        self.geometry()?;
        self.trajectory()?.validate()?;
        if self.sources.preset == SourcePreset::Custom && self.sources.positions.is_empty() {
            return Err(Error::Config("custom source preset needs positions".into()));
        }
        let m = &self.metrics;
        if !(m.aoa_match_deg > 0.0 && m.pos_match_m > 0.0 && (0.0..=1.0).contains(&m.sufficiency)) {
            return Err(Error::Config("invalid metric thresholds".into()));
        }
        let c = &self.compare;
        if c.configurations == 0 || c.realizations == 0 || c.sources == 0 || c.binary_n == 0 {
            return Err(Error::Config(
                "comparison needs configurations, realizations, sources and binary_n >= 1".into(),
            ));
        }
        if c.binary_n > self.array.elements || !(c.range[0] > 0.0 && c.range[1] >= c.range[0]) {
            return Err(Error::Config("invalid comparison scenario".into()));
        }
        let h = &self.heatmap;
        if !(h.step > 0.0) || h.trials == 0 || !(h.region[2] >= h.region[0] && h.region[3] >= h.region[1]) {
            return Err(Error::Config("invalid heatmap grid".into()));
        }
        let im = &self.imperfections;
        if !(im.loc_sd >= 0.0 && im.dir_sd_deg >= 0.0) {
            return Err(Error::Config("imperfection spreads must be non-negative".into()));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        ArrayGeometry::uca(self.array.elements, self.array.radius, self.array.carrier_freq)
    }

    pub fn trajectory(&self) -> Result<Trajectory> {
        let t = &self.trajectory;
        let traj = Trajectory {
            initial_position: Vector3::from(t.initial_position),
            velocity: Vector3::from(t.velocity),
            start_time: t.start_time,
            window_duration: t.window_duration,
            window_count: t.windows,
        };
        traj.validate()?;
        Ok(traj)
    }

    /// Configured sources before they are placed on a map. The random preset
    /// is drawn per trial elsewhere and yields an empty set here.
    pub fn base_sources(&self) -> SourceSet {
        let s = &self.sources;
        let mut pos: Vec<Vector3<f64>> = match s.preset {
            SourcePreset::Reference => REFERENCE_SOURCES.iter().map(|p| Vector3::from(*p)).collect(),
            SourcePreset::Custom => s.positions.iter().map(|p| Vector3::from(*p)).collect(),
            SourcePreset::Random => Vec::new(),
        };
        if let Some(n) = s.count {
            let r0 = Vector3::from(self.trajectory.initial_position);
            pos.sort_by(|a, b| (a - r0).norm().total_cmp(&(b - r0).norm()));
            pos.truncate(n);
        }
        SourceSet::uniform(&pos, s.pulse_duration, s.pulse_power, s.mean_inter_pulse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_reference_setup() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.detector.p0, 1e-3);
        assert_eq!(cfg.refiner.l_max, 3);
        assert_eq!(cfg.tracker.death_time, 0.3);
        assert_eq!(cfg.base_sources().len(), 11);
    }

    #[test]
    fn roundtrip_and_unknown_fields() {
        let mut cfg = RunConfig::default();
        cfg.snr_star_db = 12.0;
        cfg.imperfections.map = true;
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(RunConfig::from_toml("bogus = 1").is_err());
        assert!(RunConfig::from_toml("trials = 0").is_err());
    }

    #[test]
    fn count_keeps_the_nearest_sources() {
        let mut cfg = RunConfig::default();
        cfg.sources.count = Some(3);
        let s = cfg.base_sources();
        assert_eq!(s.len(), 3);
        let r0 = Vector3::from(cfg.trajectory.initial_position);
        let d: Vec<f64> = s.sources.iter().map(|x| (x.position - r0).norm()).collect();
        assert!(d.windows(2).all(|w| w[0] <= w[1]));
    }
}
