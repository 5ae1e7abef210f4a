//! Coarse direction finding: sample covariance, MDL source count, 2D MUSIC
//! and peak picking on an elevation/azimuth grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig_desc, CMatrix, C64};
use crate::scene::ArrayGeometry;
use crate::signal::steering_vector;

/// Floor applied to eigenvalues inside the MDL logarithms.
pub const MDL_EIG_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid {
    thetas: Vec<f64>,
    phis: Vec<f64>,
}

/// Grid description in degrees, as it appears in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
    pub theta_step_deg: f64,
    pub phi_step_deg: f64,
}

impl Default for GridSpec {
    /// Lower hemisphere at 1 degree. A planar array cannot tell a direction
    /// from its mirror image through the array plane, and every emitter lies
    /// below the receiver.
    fn default() -> Self {
        Self {
            theta_min_deg: 90.0,
            theta_max_deg: 180.0,
            theta_step_deg: 1.0,
            phi_step_deg: 1.0,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<AngleGrid> {
        let (lo, hi, st) = (self.theta_min_deg, self.theta_max_deg, self.theta_step_deg);
        if !(0.0..=180.0).contains(&lo) || !(lo..=180.0).contains(&hi) || !(st > 0.0) || !(self.phi_step_deg > 0.0) {
            return Err(Error::Config("invalid angle grid".into()));
        }
        let nt = ((hi - lo) / st + 1e-9).floor() as usize + 1;
        let thetas = (0..nt).map(|k| (lo + k as f64 * st).min(180.0).to_radians()).collect();
        let np = (360.0 / self.phi_step_deg - 1e-9).ceil().max(1.0) as usize;
        let phis = (0..np).map(|k| (k as f64 * self.phi_step_deg).to_radians()).collect();
        AngleGrid::new(thetas, phis)
    }
}

impl AngleGrid {
    pub fn new(thetas: Vec<f64>, phis: Vec<f64>) -> Result<Self> {
        let two_pi = 2.0 * std::f64::consts::PI;
        let ok_t = thetas.iter().all(|t| (0.0..=std::f64::consts::PI + 1e-12).contains(t));
        let ok_p = phis.iter().all(|p| (0.0..two_pi).contains(p));
        let inc = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if thetas.is_empty() || phis.is_empty() || !ok_t || !ok_p || !inc(&thetas) || !inc(&phis) {
            return Err(Error::Config(
                "angle grid must be non-empty, in range and strictly increasing".into(),
            ));
        }
        Ok(Self { thetas, phis })
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn phis(&self) -> &[f64] {
        &self.phis
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.thetas.len(), self.phis.len())
    }

    pub fn len(&self) -> usize {
        self.thetas.len() * self.phis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn flat(&self, ti: usize, pi: usize) -> usize {
        ti * self.phis.len() + pi
    }

    pub fn angles(&self, flat: usize) -> (f64, f64) {
        let np = self.phis.len();
        (self.thetas[flat / np], self.phis[flat % np])
    }
}

/// Steering vectors of every grid point, one column per point in row-major
/// `(theta, phi)` order.
#[derive(Debug, Clone)]
pub struct SteeringTable {
    pub grid: AngleGrid,
    pub vectors: CMatrix,
}

impl SteeringTable {
    pub fn new(geom: &ArrayGeometry, grid: &AngleGrid) -> Self {
        let mut vectors = CMatrix::zeros(geom.elements(), grid.len());
        for (ti, &t) in grid.thetas().iter().enumerate() {
            for (pi, &p) in grid.phis().iter().enumerate() {
                vectors.set_column(grid.flat(ti, pi), &steering_vector(geom, t, p));
            }
        }
        Self {
            grid: grid.clone(),
            vectors,
        }
    }
}

/// `Y Y^H / G`.
pub fn sample_covariance(y: &CMatrix) -> Result<CMatrix> {
    if y.ncols() == 0 {
        return Err(Error::NoDetections);
    }
    let mut r = y * y.adjoint();
    r /= C64::new(y.ncols() as f64, 0.0);
    Ok(r)
}

/// MDL value for a candidate order `m`.
pub fn mdl_value(eigenvalues: &[f64], m: usize, snapshots: usize) -> f64 {
    let big_m = eigenvalues.len();
    let tail: Vec<f64> = eigenvalues[m..].iter().map(|&l| l.max(MDL_EIG_FLOOR)).collect();
    let k = tail.len() as f64;
    let log_geo = tail.iter().map(|l| l.ln()).sum::<f64>() / k;
    let arith = tail.iter().sum::<f64>() / k;
    let ln_rho = (log_geo - arith.ln()).min(0.0);
    let g = snapshots as f64;
    -2.0 * g * (big_m - m) as f64 * ln_rho + (m * (2 * big_m - m)) as f64 * g.ln()
}

/// Order in `0..M` minimizing the MDL criterion (first minimum on ties).
pub fn mdl_order(eigenvalues: &[f64], snapshots: usize) -> usize {
    let big_m = eigenvalues.len();
    (0..big_m)
        .map(|m| (m, mdl_value(eigenvalues, m, snapshots)))
        .fold(
            (0, f64::INFINITY),
            |best, (m, v)| if v < best.1 { (m, v) } else { best },
        )
        .0
}

#[derive(Debug, Clone)]
pub struct MusicSpectrum {
    /// Row-major `K_theta x K_phi` values.
    pub values: Vec<f64>,
    pub grid: AngleGrid,
}

impl MusicSpectrum {
    pub fn at(&self, ti: usize, pi: usize) -> f64 {
        self.values[self.grid.flat(ti, pi)]
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["theta_deg", "phi_deg", "value"])?;
        for (k, v) in self.values.iter().enumerate() {
            let (t, p) = self.grid.angles(k);
            w.write_record([
                format!("{:.4}", t.to_degrees()),
                format!("{:.4}", p.to_degrees()),
                v.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `1 / ||U_null^H a||^2` with `U_null` the `M - order` eigenvectors of the
/// smallest eigenvalues.
pub fn music_spectrum(r: &CMatrix, order: usize, table: &SteeringTable) -> Result<MusicSpectrum> {
    let m = r.nrows();
    if order >= m {
        return Err(Error::Argument(format!(
            "model order {order} must be below the array size {m}"
        )));
    }
    let (_, vecs) = hermitian_eig_desc(r);
    let null = vecs.columns(order, m - order).into_owned();
    let proj = null.adjoint() * &table.vectors;
    let floor = 1e-30;
    let values = (0..table.vectors.ncols())
        .map(|k| 1.0 / proj.column(k).norm_squared().max(floor))
        .collect();
    Ok(MusicSpectrum {
        values,
        grid: table.grid.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub theta: f64,
    pub phi: f64,
    pub value: f64,
    pub theta_index: usize,
    pub phi_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeakPick {
    pub peaks: Vec<Peak>,
    /// Fewer local maxima than requested were found.
    pub shortfall: bool,
}

/// The `count` largest local maxima of a gridded surface.
///
/// Neighborhoods are 8-connected with azimuth wrap-around. A cell qualifies
/// when it is strictly above the neighbors preceding it in row-major order,
/// at least as high as the ones following it, and strictly above at least
/// one neighbor; a flat-topped peak therefore yields one representative.
pub fn pick_peaks(spec: &MusicSpectrum, count: usize) -> PeakPick {
    let (nt, np) = spec.grid.shape();
    let mut found = Vec::new();
    for ti in 0..nt {
        for pi in 0..np {
            let v = spec.at(ti, pi);
            let here = spec.grid.flat(ti, pi);
            let mut ok = true;
            let mut above_one = false;
            'nb: for dt in -1i64..=1 {
                let t2 = ti as i64 + dt;
                if t2 < 0 || t2 >= nt as i64 {
                    continue;
                }
                for dp in -1i64..=1 {
                    if dt == 0 && dp == 0 {
                        continue;
                    }
                    let p2 = (pi as i64 + dp).rem_euclid(np as i64) as usize;
                    let other = spec.grid.flat(t2 as usize, p2);
                    if other == here {
                        continue;
                    }
                    let w = spec.values[other];
                    let earlier = other < here;
                    if (earlier && !(v > w)) || (!earlier && !(v >= w)) {
                        ok = false;
                        break 'nb;
                    }
                    if v > w {
                        above_one = true;
                    }
                }
            }
            if ok && above_one {
                found.push(Peak {
                    theta: spec.grid.thetas()[ti],
                    phi: spec.grid.phis()[pi],
                    value: v,
                    theta_index: ti,
                    phi_index: pi,
                });
            }
        }
    }
    found.sort_by(|a, b| {
        b.value
            .partial_cmp(&a.value)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.theta_index.cmp(&b.theta_index))
            .then(a.phi_index.cmp(&b.phi_index))
    });
    let shortfall = found.len() < count;
    found.truncate(count);
    PeakPick {
        peaks: found,
        shortfall,
    }
}

/// Output of the whole coarse stage for one window.
#[derive(Debug, Clone)]
pub struct RoughAoa {
    pub eigenvalues: Vec<f64>,
    pub order: usize,
    pub spectrum: MusicSpectrum,
    pub peaks: PeakPick,
}

pub fn rough_aoa(filtered: &CMatrix, table: &SteeringTable) -> Result<RoughAoa> {
    let r = sample_covariance(filtered)?;
    let (eigenvalues, _) = hermitian_eig_desc(&r);
    let order = mdl_order(&eigenvalues, filtered.ncols());
    let spectrum = music_spectrum(&r, order, table)?;
    let peaks = pick_peaks(&spectrum, order);
    Ok(RoughAoa {
        eigenvalues,
        order,
        spectrum,
        peaks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CVector;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn uca() -> ArrayGeometry {
        ArrayGeometry::uca(6, 0.2, 0.5e9).unwrap()
    }

    #[test]
    fn covariance_cases() {
        let y = CMatrix::from_column_slice(2, 1, &[c(1.0, 0.0), c(0.0, 1.0)]);
        let r = sample_covariance(&y).unwrap();
        let want = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(1.0, 0.0)]);
        assert!((r - want).norm() < 1e-15);

        let g = 4.0f64;
        let y = CMatrix::from_row_slice(
            2,
            4,
            &[
                c(1.0, 0.0),
                c(1.0, 0.0),
                c(1.0, 0.0),
                c(1.0, 0.0),
                c(1.0, 0.0),
                c(-1.0, 0.0),
                c(1.0, 0.0),
                c(-1.0, 0.0),
            ],
        );
        let r = sample_covariance(&y).unwrap();
        assert!((r - CMatrix::identity(2, 2) * c(g / 4.0, 0.0)).norm() < 1e-15);

        assert!(matches!(
            sample_covariance(&CMatrix::zeros(3, 0)),
            Err(Error::NoDetections)
        ));
    }

    #[test]
    fn mdl_examples() {
        assert_eq!(mdl_order(&[1.0; 6], 1000), 0);
        assert_eq!(mdl_order(&[100.0, 1.0, 1.0, 1.0, 1.0, 1.0], 1000), 1);
        assert_eq!(mdl_order(&[80.0, 30.0, 1.01, 1.0, 1.0, 0.99], 1000), 2);
        // exact rank deficiency stays finite
        assert_eq!(mdl_order(&[5.0, 0.0, 0.0, 0.0], 100), 1);
    }

    #[test]
    fn spectrum_peaks_at_the_source() {
        let geom = uca();
        let grid = GridSpec::default().build().unwrap();
        let table = SteeringTable::new(&geom, &grid);
        let (t0, p0) = (130f64.to_radians(), 40f64.to_radians());
        let a = steering_vector(&geom, t0, p0);
        let r = &a * a.adjoint() + CMatrix::identity(6, 6) * c(1e-3, 0.0);
        let s = music_spectrum(&r, 1, &table).unwrap();
        let best = s
            .values
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (k, &v)| if v > b.1 { (k, v) } else { b });
        let (bt, bp) = grid.angles(best.0);
        assert!((bt - t0).abs() < 1e-9 && (bp - p0).abs() < 1e-9);
        assert!(s.values.iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn zero_order_spectrum_is_flat() {
        let geom = uca();
        let grid = GridSpec {
            theta_step_deg: 10.0,
            phi_step_deg: 10.0,
            ..Default::default()
        }
        .build()
        .unwrap();
        let table = SteeringTable::new(&geom, &grid);
        let r = CMatrix::identity(6, 6);
        let s = music_spectrum(&r, 0, &table).unwrap();
        assert!(s.values.iter().all(|v| (v - 1.0 / 6.0).abs() < 1e-12));
        assert!(music_spectrum(&r, 6, &table).is_err());
        // constant surface has no strict maxima
        let flat = MusicSpectrum {
            values: vec![0.5; grid.len()],
            grid: grid.clone(),
        };
        let p = pick_peaks(&flat, 1);
        assert!(p.peaks.is_empty() && p.shortfall);
    }

    #[test]
    fn two_sources_two_peaks() {
        let geom = uca();
        let grid = GridSpec::default().build().unwrap();
        let table = SteeringTable::new(&geom, &grid);
        let dirs = [(120f64, 30f64), (150f64, 250f64)];
        let mut r = CMatrix::identity(6, 6) * c(1e-4, 0.0);
        for (t, p) in dirs {
            let a: CVector = steering_vector(&geom, t.to_radians(), p.to_radians());
            r += &a * a.adjoint();
        }
        let s = music_spectrum(&r, 2, &table).unwrap();
        let picked = pick_peaks(&s, 2);
        assert!(!picked.shortfall);
        for (t, p) in dirs {
            assert!(picked
                .peaks
                .iter()
                .any(|k| (k.theta.to_degrees() - t).abs() < 1e-6 && (k.phi.to_degrees() - p).abs() < 1e-6));
        }
    }

    #[test]
    fn peak_picking_wraps_azimuth() {
        let grid = AngleGrid::new(vec![0.5, 1.0, 1.5], (0..8).map(|k| k as f64 * 0.7).collect()).unwrap();
        let mut values = vec![1.0; 24];
        // peak at the last azimuth column, next to column 0 through the wrap
        values[grid.flat(1, 7)] = 5.0;
        values[grid.flat(1, 0)] = 4.0;
        let s = MusicSpectrum { values, grid };
        let p = pick_peaks(&s, 3);
        assert_eq!(p.peaks.len(), 1);
        assert_eq!((p.peaks[0].theta_index, p.peaks[0].phi_index), (1, 7));
        assert!(p.shortfall);
    }
}
