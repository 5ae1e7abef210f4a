//! Synthetic environment: city height map, array geometry, receiver
//! trajectory and the stationary emitters.

use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, Purpose};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Raster height map sampled nearest-cell. Cell `(ix, iy)` covers
/// `[origin + i*cell, origin + (i+1)*cell)` on each axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CityMap {
    heights: Vec<f64>,
    nx: usize,
    ny: usize,
    origin: [f64; 2],
    cell_size: f64,
}

impl CityMap {
    pub fn new(heights: Vec<f64>, nx: usize, ny: usize, origin: [f64; 2], cell_size: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || heights.len() != nx * ny {
            return Err(Error::Config(format!(
                "height grid has {} values for {nx}x{ny} cells",
                heights.len()
            )));
        }
        if !(cell_size > 0.0) || !cell_size.is_finite() {
            return Err(Error::Config("cell_size must be positive".into()));
        }
        if let Some(h) = heights.iter().find(|h| !h.is_finite() || **h < 0.0) {
            return Err(Error::Config(format!("invalid height {h}")));
        }
        Ok(Self {
            heights,
            nx,
            ny,
            origin,
            cell_size,
        })
    }

    /// Flat zero-height map covering `extent` (square) from `origin`.
    pub fn flat(origin: [f64; 2], extent: f64, cell_size: f64) -> Result<Self> {
        let n = cells_for(extent, cell_size)?;
        Self::new(vec![0.0; n * n], n, n, origin, cell_size)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn extent(&self) -> [f64; 2] {
        [self.nx as f64 * self.cell_size, self.ny as f64 * self.cell_size]
    }

    pub fn heights(&self) -> &[f64] {
        &self.heights
    }

    fn cell_of(&self, x: f64, y: f64) -> (usize, usize) {
        let fx = ((x - self.origin[0]) / self.cell_size).floor();
        let fy = ((y - self.origin[1]) / self.cell_size).floor();
        let clamp = |f: f64, n: usize| -> usize {
            if f.is_nan() || f < 0.0 {
                0
            } else {
                (f as usize).min(n - 1)
            }
        };
        (clamp(fx, self.nx), clamp(fy, self.ny))
    }

    /// Height of the containing cell; queries outside the map clamp to the
    /// nearest boundary cell.
    pub fn height_at(&self, x: f64, y: f64) -> f64 {
        let (ix, iy) = self.cell_of(x, y);
        self.heights[iy * self.nx + ix]
    }

    pub fn set_height(&mut self, ix: usize, iy: usize, h: f64) {
        self.heights[iy * self.nx + ix] = h;
    }

    /// Sets every cell whose center lies in the axis-aligned rectangle to `h`.
    pub fn fill_rect(&mut self, center: [f64; 2], size: [f64; 2], h: f64) {
        let (x0, y0) = self.cell_of(center[0] - size[0] / 2.0, center[1] - size[1] / 2.0);
        let (x1, y1) = self.cell_of(center[0] + size[0] / 2.0, center[1] + size[1] / 2.0);
        for iy in y0..=y1 {
            for ix in x0..=x1 {
                self.heights[iy * self.nx + ix] = h;
            }
        }
    }

    pub fn max_height_difference(&self) -> f64 {
        let (lo, hi) = self
            .heights
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &h| {
                (lo.min(h), hi.max(h))
            });
        hi - lo
    }

    /// Writes the grid as CSV: a `#` metadata line, then one row per y cell
    /// (south to north), one column per x cell.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        writeln!(
            file,
            "# origin_x={},origin_y={},cell_size={},nx={},ny={}",
            self.origin[0], self.origin[1], self.cell_size, self.nx, self.ny
        )?;
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
        for iy in 0..self.ny {
            let row = &self.heights[iy * self.nx..(iy + 1) * self.nx];
            w.write_record(row.iter().map(|h| format!("{h:.3}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn cells_for(extent: f64, cell_size: f64) -> Result<usize> {
    if !(extent > 0.0) || !extent.is_finite() {
        return Err(Error::Config("extent must be positive".into()));
    }
    if !(cell_size > 0.0) {
        return Err(Error::Config("cell_size must be positive".into()));
    }
    Ok(((extent / cell_size).round() as usize).max(1))
}

/// Parameters of the procedural city.
#[derive(Debug, Clone, PartialEq)]
pub struct CityParams {
    pub seed: u64,
    /// Side length of the square district (m).
    pub extent: f64,
    pub origin: [f64; 2],
    pub cell_size: f64,
    /// Building footprint (x, y) in meters.
    pub building: [f64; 2],
    /// Building heights are drawn uniformly from this range (m).
    pub height_range: [f64; 2],
    /// Street and alley widths are drawn uniformly from this range (m).
    pub street_width: [f64; 2],
}

impl Default for CityParams {
    fn default() -> Self {
        Self {
            seed: 7,
            extent: 2000.0,
            origin: [-1000.0, -1000.0],
            cell_size: 1.0,
            building: [10.0, 20.0],
            height_range: [3.5, 20.0],
            street_width: [4.0, 12.0],
        }
    }
}

impl CityParams {
    /// Amplitude of the uniform per-building height offset.
    pub fn offset_amplitude(&self) -> f64 {
        0.05 * (self.height_range[1] - self.height_range[0])
    }
}

/// Procedural city: a lattice of fixed-footprint buildings separated by
/// streets of random width. Ground (street) level is the lower end of the
/// height range; every building gets a uniform height plus a small uniform
/// offset.
pub fn build_city_map(p: &CityParams) -> Result<CityMap> {
    let [lo, hi] = p.height_range;
    if !(lo >= 0.0 && hi >= lo && hi <= 100.0) {
        return Err(Error::Config(format!(
            "height range [{lo}, {hi}] must lie within [0, 100]"
        )));
    }
    if p.building.iter().any(|b| !(*b > 0.0)) {
        return Err(Error::Config("building footprint must be positive".into()));
    }
    if !(p.street_width[0] >= 0.0 && p.street_width[1] >= p.street_width[0]) {
        return Err(Error::Config("invalid street width range".into()));
    }
    let n = cells_for(p.extent, p.cell_size)?;
    let mut rng = rng::stream(p.seed, Purpose::City, 0, 0);

    let lanes = |len: f64, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut pos = 0.0;
        loop {
            pos += uniform(rng, p.street_width);
            if pos + len > p.extent {
                break;
            }
            out.push((pos, pos + len));
            pos += len;
        }
        out
    };
    let cols = lanes(p.building[0], &mut rng);
    let rows = lanes(p.building[1], &mut rng);

    let mut heights = vec![lo; n * n];
    let delta = p.offset_amplitude();
    for &(y0, y1) in &rows {
        for &(x0, x1) in &cols {
            let h = (uniform(&mut rng, [lo, hi]) + uniform(&mut rng, [-delta, delta])).max(0.0);
            let (ix0, ix1) = cell_span(x0, x1, p.cell_size, n);
            let (iy0, iy1) = cell_span(y0, y1, p.cell_size, n);
            for iy in iy0..iy1 {
                for ix in ix0..ix1 {
                    heights[iy * n + ix] = h;
                }
            }
        }
    }
    CityMap::new(heights, n, n, p.origin, p.cell_size)
}

fn uniform<R: Rng>(rng: &mut R, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

fn cell_span(a: f64, b: f64, cell: f64, n: usize) -> (usize, usize) {
    let i0 = ((a / cell).round() as usize).min(n);
    let i1 = ((b / cell).round() as usize).min(n);
    (i0, i1.max(i0))
}

/// Antenna array: element offsets relative to the array center.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    offsets: Vec<Vector3<f64>>,
    carrier_freq: f64,
    wave_number: f64,
}

impl ArrayGeometry {
    pub fn new(offsets: Vec<Vector3<f64>>, carrier_freq: f64) -> Result<Self> {
        if offsets.len() < 2 {
            return Err(Error::Config("array needs at least two elements".into()));
        }
        if !(carrier_freq >= 0.0) || !carrier_freq.is_finite() {
            return Err(Error::Config("carrier frequency must be non-negative".into()));
        }
        Ok(Self {
            offsets,
            carrier_freq,
            wave_number: 2.0 * std::f64::consts::PI * carrier_freq / SPEED_OF_LIGHT,
        })
    }

    /// Uniform circular array in the xy plane; element `m` sits at angle
    /// `2*pi*m/M`.
    pub fn uca(elements: usize, radius: f64, carrier_freq: f64) -> Result<Self> {
        let offsets = (0..elements)
            .map(|m| {
                let a = 2.0 * std::f64::consts::PI * m as f64 / elements as f64;
                Vector3::new(radius * a.cos(), radius * a.sin(), 0.0)
            })
            .collect();
        Self::new(offsets, carrier_freq)
    }

    pub fn elements(&self) -> usize {
        self.offsets.len()
    }

    pub fn offsets(&self) -> &[Vector3<f64>] {
        &self.offsets
    }

    pub fn carrier_freq(&self) -> f64 {
        self.carrier_freq
    }

    pub fn wave_number(&self) -> f64 {
        self.wave_number
    }

    /// Same array rotated about the z axis by `yaw` radians.
    pub fn rotated_yaw(&self, yaw: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        let offsets = self
            .offsets
            .iter()
            .map(|d| Vector3::new(c * d.x - s * d.y, s * d.x + c * d.y, d.z))
            .collect();
        Self {
            offsets,
            ..self.clone()
        }
    }
}

/// Straight-line receiver motion and the window schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial_position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// Start of the first processing window `t0` (s).
    pub start_time: f64,
    /// Window duration `T` (s).
    pub window_duration: f64,
    pub window_count: usize,
}

impl Trajectory {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_duration > 0.0) {
            return Err(Error::Config("window duration must be positive".into()));
        }
        if self.window_count == 0 {
            return Err(Error::Config("need at least one window".into()));
        }
        if self.start_time < 0.0 {
            return Err(Error::Config("start time must be non-negative".into()));
        }
        Ok(())
    }

    pub fn position_at(&self, t: f64) -> Vector3<f64> {
        self.initial_position + self.velocity * t
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.window_count {
            return Err(Error::WindowIndex {
                index: i,
                count: self.window_count,
            });
        }
        Ok(())
    }

    /// Start of window `i` (1-based).
    pub fn window_start(&self, i: usize) -> Result<f64> {
        self.check_index(i)?;
        Ok(self.start_time + (i - 1) as f64 * self.window_duration)
    }

    /// Midpoint of window `i` (1-based).
    pub fn window_midpoint(&self, i: usize) -> Result<f64> {
        Ok(self.window_start(i)? + self.window_duration / 2.0)
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.window_count as f64 * self.window_duration
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Source {
    pub position: Vector3<f64>,
    /// Pulse duration `T_p` (s).
    pub pulse_duration: f64,
    /// Mean pulse power (W).
    pub pulse_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSet {
    pub sources: Vec<Source>,
    /// Mean inter-pulse interval `T_avg` (s).
    pub mean_inter_pulse: f64,
}

/// Emitter positions used by the reference scenario (m).
pub const REFERENCE_SOURCES: [[f64; 3]; 11] = [
    [0.0, 50.0, 4.46],
    [-13.0, -233.0, 3.47],
    [66.0, -85.0, 3.2],
    [53.33, -611.87, 2.85],
    [-240.22, 357.43, 10.69],
    [600.0, -300.0, 4.1],
    [-300.0, -100.0, 5.98],
    [520.0, 159.17, 20.46],
    [-250.0, -550.0, 10.27],
    [200.0, -300.0, 13.71],
    [406.0, -36.0, 4.09],
];

/// How configured source heights are reconciled with the height map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SourcePlacement {
    /// Raise/lower a building-sized pad under each source to its height.
    #[default]
    Stamp,
    /// Replace each source height with the map height beneath it.
    Snap,
}

impl SourceSet {
    pub fn uniform(positions: &[Vector3<f64>], pulse_duration: f64, pulse_power: f64, mean_inter_pulse: f64) -> Self {
        Self {
            sources: positions
                .iter()
                .map(|&position| Source {
                    position,
                    pulse_duration,
                    pulse_power,
                })
                .collect(),
            mean_inter_pulse,
        }
    }

    pub fn reference() -> Self {
        let pos: Vec<_> = REFERENCE_SOURCES
            .iter()
            .map(|p| Vector3::new(p[0], p[1], p[2]))
            .collect();
        Self::uniform(&pos, 3e-6, 3.0, 3e-3)
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mean_inter_pulse > 0.0) {
            return Err(Error::Config("mean inter-pulse interval must be positive".into()));
        }
        for s in &self.sources {
            if !(s.pulse_duration > 0.0) || !(s.pulse_power >= 0.0) {
                return Err(Error::Config("pulse duration and power must be positive".into()));
            }
            if s.pulse_duration >= self.mean_inter_pulse {
                return Err(Error::Config(
                    "pulses must be much shorter than the inter-pulse interval".into(),
                ));
            }
        }
        Ok(())
    }

    /// Makes every source lie on the map surface.
    pub fn place_on(&mut self, map: &mut CityMap, placement: SourcePlacement, pad: [f64; 2]) {
        match placement {
            SourcePlacement::Snap => {
                for s in &mut self.sources {
                    s.position.z = map.height_at(s.position.x, s.position.y);
                }
            }
            SourcePlacement::Stamp => {
                for s in &self.sources {
                    map.fill_rect([s.position.x, s.position.y], pad, s.position.z.max(0.0));
                }
                // Overlapping pads: the cell right under each source wins.
                for s in &mut self.sources {
                    let (ix, iy) = map.cell_of(s.position.x, s.position.y);
                    map.set_height(ix, iy, s.position.z.max(0.0));
                    s.position.z = map.height_at(s.position.x, s.position.y);
                }
            }
        }
    }

    /// Sources sampled uniformly over the rectangle `[lo, hi]` and snapped
    /// onto the map surface.
    pub fn random_on_map(
        map: &CityMap,
        count: usize,
        lo: [f64; 2],
        hi: [f64; 2],
        seed: u64,
        pulse_duration: f64,
        pulse_power: f64,
        mean_inter_pulse: f64,
    ) -> Self {
        let mut rng = rng::stream(seed, Purpose::Sources, 0, 0);
        let pos: Vec<_> = (0..count)
            .map(|_| {
                let x = uniform(&mut rng, [lo[0], hi[0]]);
                let y = uniform(&mut rng, [lo[1], hi[1]]);
                Vector3::new(x, y, map.height_at(x, y))
            })
            .collect();
        Self::uniform(&pos, pulse_duration, pulse_power, mean_inter_pulse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params(seed: u64) -> CityParams {
        CityParams {
            seed,
            extent: 200.0,
            origin: [0.0, 0.0],
            ..CityParams::default()
        }
    }

    #[test]
    fn city_heights_stay_in_range() {
        let p = CityParams {
            extent: 2000.0,
            ..CityParams::default()
        };
        let map = build_city_map(&p).unwrap();
        let d = p.offset_amplitude();
        assert!(map
            .heights()
            .iter()
            .all(|&h| h >= 3.5 - d - 1e-12 && h <= 20.0 + d + 1e-12));
        assert!(map.max_height_difference() > 10.0);
    }

    #[test]
    fn degenerate_range_is_flat() {
        let p = CityParams {
            height_range: [0.0, 0.0],
            ..small_params(3)
        };
        let map = build_city_map(&p).unwrap();
        assert!(map.heights().iter().all(|&h| h == 0.0));
        assert_eq!(map.height_at(37.0, 12.5), 0.0);
    }

    #[test]
    fn same_seed_same_grid() {
        let a = build_city_map(&small_params(11)).unwrap();
        let b = build_city_map(&small_params(11)).unwrap();
        assert_eq!(a, b);
        let c = build_city_map(&small_params(12)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_city_params() {
        assert!(build_city_map(&CityParams {
            extent: 0.0,
            ..small_params(1)
        })
        .is_err());
        assert!(build_city_map(&CityParams {
            height_range: [5.0, 2.0],
            ..small_params(1)
        })
        .is_err());
        assert!(build_city_map(&CityParams {
            height_range: [0.0, 150.0],
            ..small_params(1)
        })
        .is_err());
    }

    #[test]
    fn height_lookup_is_nearest_cell() {
        // two cells: street (x < 1) and a 15 m building (x >= 1)
        let map = CityMap::new(vec![0.0, 15.0], 2, 1, [0.0, 0.0], 1.0).unwrap();
        assert_eq!(map.height_at(0.99, 0.5), 0.0);
        assert_eq!(map.height_at(1.01, 0.5), 15.0);
        assert_eq!(map.height_at(1.5, 0.5), 15.0);
        // clamped outside the extent
        assert_eq!(map.height_at(-50.0, 0.5), 0.0);
        assert_eq!(map.height_at(50.0, 99.0), 15.0);
    }

    #[test]
    fn cell_center_lookup() {
        let mut map = CityMap::flat([0.0, 0.0], 10.0, 1.0).unwrap();
        map.set_height(3, 4, 12.0);
        assert_eq!(map.height_at(3.5, 4.5), 12.0);
    }

    #[test]
    fn trajectory_and_windows() {
        let t = Trajectory {
            initial_position: Vector3::new(27.0, 11.0, 500.0),
            velocity: Vector3::new(44.0, 33.0, 0.0),
            start_time: 0.1,
            window_duration: 0.03,
            window_count: 5,
        };
        assert_eq!(t.position_at(0.0), Vector3::new(27.0, 11.0, 500.0));
        assert_eq!(t.position_at(1.0), Vector3::new(71.0, 44.0, 500.0));
        assert!((t.window_midpoint(1).unwrap() - 0.115).abs() < 1e-12);
        assert!((t.window_midpoint(2).unwrap() - 0.145).abs() < 1e-12);
        assert!(matches!(t.window_midpoint(0), Err(Error::WindowIndex { .. })));
        assert!(t.window_midpoint(6).is_err());
        for i in 1..5 {
            let d = t.window_midpoint(i + 1).unwrap() - t.window_midpoint(i).unwrap();
            assert!((d - 0.03).abs() < 1e-15);
        }
        let still = Trajectory {
            velocity: Vector3::zeros(),
            ..t
        };
        assert_eq!(still.position_at(3.7), still.initial_position);
    }

    #[test]
    fn stamped_sources_sit_on_the_surface() {
        let mut map = build_city_map(&CityParams::default()).unwrap();
        let mut set = SourceSet::reference();
        set.place_on(&mut map, SourcePlacement::Stamp, [10.0, 20.0]);
        for s in &set.sources {
            assert!((s.position.z - map.height_at(s.position.x, s.position.y)).abs() <= 1e-6);
        }
        assert!((set.sources[7].position.z - 20.46).abs() < 1e-12);
    }

    #[test]
    fn uca_wave_number() {
        let g = ArrayGeometry::uca(6, 0.2, 0.5e9).unwrap();
        assert!((g.wave_number() - 2.0 * std::f64::consts::PI * 0.5e9 / SPEED_OF_LIGHT).abs() < 1e-12);
        assert!((g.offsets()[1] - Vector3::new(0.1, 0.2 * (std::f64::consts::PI / 3.0).sin(), 0.0)).norm() < 1e-12);
        assert!(ArrayGeometry::uca(1, 0.2, 1e9).is_err());
        let r = g.rotated_yaw(std::f64::consts::FRAC_PI_2);
        assert!((r.offsets()[0] - Vector3::new(0.0, 0.2, 0.0)).norm() < 1e-12);
    }
}
