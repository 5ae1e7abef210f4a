//! Monte-Carlo calibration of the threshold function `f(N, gamma)`.
//!
//! For every dictionary size and SNR, random sparse codes are observed
//! through a random steering dictionary with random per-atom attenuation,
//! the threshold is swept, and the value minimizing the mean code error is
//! converted back to `f`. Per-cell values are cleaned of outliers, averaged,
//! and `log10` of the average is fitted with a quartic in `gamma` (dB).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::epsilon::EpsilonModel;
use super::recovery::SparseSolver;
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64};
use crate::rng::{self, complex_normal, Purpose};
use crate::scene::ArrayGeometry;
use crate::signal::{direction, steering_from_direction};

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationConfig {
    pub seed: u64,
    pub trials: usize,
    pub n_values: Vec<usize>,
    pub gamma_db: Vec<f64>,
    /// Columns `T` of each synthetic code matrix.
    pub columns: usize,
    /// Noise realizations averaged per SNR.
    pub realizations: usize,
    /// Probabilities of sparsity levels `0, 1, 2, ...`.
    pub sparsity_probs: Vec<f64>,
    pub l_max: usize,
    /// Swept `log10 f` grid: `(min, max, points)`.
    pub f_grid: (f64, f64, usize),
    /// Tukey fence multiplier for outlier removal on `log10 f`.
    pub iqr_factor: f64,
    /// Attenuation magnitudes are drawn uniformly from this range.
    pub attenuation: (f64, f64),
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trials: 500,
            n_values: (2..=11).collect(),
            gamma_db: (2..=21).map(f64::from).collect(),
            columns: 1000,
            realizations: 10,
            sparsity_probs: vec![0.1, 0.65, 0.2, 0.05],
            l_max: 3,
            f_grid: (-4.0, 2.0, 121),
            iqr_factor: 1.5,
            attenuation: (0.5, 1.0),
        }
    }
}

impl CalibrationConfig {
    /// Small configuration for smoke runs: `N in {2, 3}`, 20 trials.
    pub fn quick() -> Self {
        Self {
            trials: 20,
            n_values: vec![2, 3],
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.columns == 0 || self.realizations == 0 {
            return Err(Error::Config(
                "trials, columns and realizations must be positive".into(),
            ));
        }
        let mut ns = self.n_values.clone();
        ns.sort_unstable();
        if ns.is_empty() || ns[0] == 0 || ns.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::Config(
                "N values must be a contiguous range starting at 1 or more".into(),
            ));
        }
        if self.gamma_db.len() < 5 {
            return Err(Error::Config("need at least 5 SNR points for a quartic fit".into()));
        }
        let total: f64 = self.sparsity_probs.iter().sum();
        if self.sparsity_probs.iter().any(|p| *p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(
                "sparsity probabilities must be non-negative and sum to 1".into(),
            ));
        }
        if self.f_grid.2 < 2 || !(self.f_grid.0 < self.f_grid.1) {
            return Err(Error::Config("invalid f grid".into()));
        }
        Ok(())
    }
}

/// Averaged `f` of one `(N, gamma)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStat {
    pub n: usize,
    pub gamma_db: f64,
    pub mean_f: f64,
    pub kept: usize,
    pub total: usize,
}

#[derive(Debug, Clone)]
pub struct CalibrationReport {
    pub model: EpsilonModel,
    pub cells: Vec<CellStat>,
    /// RMS of `log10 f` fit residuals per `N`.
    pub fit_rms: Vec<(usize, f64)>,
    pub monotone_in_gamma: bool,
    pub monotone_in_n: bool,
}

/// One Monte-Carlo trial for one `N`: the selected `f` for every SNR.
pub fn trial_f_values(geom: &ArrayGeometry, cfg: &CalibrationConfig, n: usize, trial: usize) -> Vec<f64> {
    let mut r = rng::stream(cfg.seed, Purpose::Calibration, n as u64, trial as u64);
    let m = geom.elements();
    let t = cfg.columns;

    // dictionary: steering vectors toward random lower-hemisphere directions
    let a = CMatrix::from_columns(
        &(0..n)
            .map(|_| {
                let theta = (-r.random::<f64>()).acos();
                let phi = r.random_range(0.0..2.0 * std::f64::consts::PI);
                steering_from_direction(geom, &direction(theta, phi))
            })
            .collect::<Vec<_>>(),
    );
    let psi: Vec<C64> = (0..n)
        .map(|_| {
            let mag = if cfg.attenuation.1 > cfg.attenuation.0 {
                r.random_range(cfg.attenuation.0..cfg.attenuation.1)
            } else {
                cfg.attenuation.0
            };
            C64::from_polar(mag, r.random_range(0.0..2.0 * std::f64::consts::PI))
        })
        .collect();

    // target codes Psi S with the configured sparsity distribution
    let mut target = CMatrix::zeros(n, t);
    for c in 0..t {
        let level = draw_level(&mut r, &cfg.sparsity_probs).min(n);
        let mut idx: Vec<usize> = (0..n).collect();
        for k in 0..level {
            let j = r.random_range(k..n);
            idx.swap(k, j);
            target[(idx[k], c)] = psi[idx[k]] * complex_normal(&mut r, 1.0);
        }
    }
    let x = &a * &target;
    let e_avg = x.iter().map(|z| z.norm_sqr()).sum::<f64>() / (m * t) as f64;

    let solver = SparseSolver::new(&a, cfg.l_max);
    let levels = solver.max_level();
    let target_energy: Vec<f64> = (0..t).map(|c| target.column(c).norm_squared()).collect();
    let (g_lo, g_hi, g_n) = cfg.f_grid;
    let f_grid: Vec<f64> = (0..g_n)
        .map(|k| 10f64.powf(g_lo + (g_hi - g_lo) * k as f64 / (g_n - 1) as f64))
        .collect();

    let mut out = Vec::with_capacity(cfg.gamma_db.len());
    for (gi, &gdb) in cfg.gamma_db.iter().enumerate() {
        let var = e_avg / 10f64.powf(gdb / 10.0);
        let eps: Vec<f64> = f_grid
            .iter()
            .map(|f| (f * m as f64 * e_avg + m as f64 * var).sqrt())
            .collect();
        let mut mean_err = vec![0.0; f_grid.len()];
        for rep in 0..cfg.realizations {
            let mut nr = rng::stream(
                cfg.seed ^ 0x5eed,
                Purpose::Noise,
                (n * 1000 + gi) as u64,
                (trial * 1000 + rep) as u64,
            );
            let mut err_sq = vec![0.0; f_grid.len()];
            for c in 0..t {
                let y: CVector = x.column(c) + CVector::from_fn(m, |_, _| complex_normal(&mut nr, var));
                let ynorm = y.norm();
                let bests = solver.level_bests(&y);
                // code error if the column stops at level j (index 0 = zero code)
                let mut lvl_err = Vec::with_capacity(levels + 1);
                lvl_err.push(target_energy[c]);
                for b in &bests {
                    let mut e = target_energy[c];
                    for (&i, &v) in b.support.iter().zip(&b.coefficients) {
                        let tv = target[(i, c)];
                        e += (v - tv).norm_sqr() - tv.norm_sqr();
                    }
                    lvl_err.push(e.max(0.0));
                }
                for (k, &ep) in eps.iter().enumerate() {
                    let e = if ynorm <= ep {
                        lvl_err[0]
                    } else {
                        let j = bests
                            .iter()
                            .position(|b| b.residual <= ep)
                            .unwrap_or(levels.saturating_sub(1));
                        lvl_err[j + 1]
                    };
                    err_sq[k] += e;
                }
            }
            for k in 0..f_grid.len() {
                mean_err[k] += err_sq[k].sqrt() / cfg.realizations as f64;
            }
        }
        // smallest f reaching the minimum mean error
        let best = mean_err.iter().cloned().fold(f64::INFINITY, f64::min);
        let k = mean_err.iter().position(|&e| e <= best).unwrap_or(0);
        out.push(f_grid[k]);
    }
    out
}

fn draw_level(r: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = r.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Mean of the values whose `log10` lies within the Tukey fences.
pub fn robust_mean(values: &[f64], iqr_factor: f64) -> (f64, usize) {
    let mut logs: Vec<f64> = values.iter().map(|v| v.log10()).collect();
    logs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let (q1, q3) = (quantile(&logs, 0.25), quantile(&logs, 0.75));
    let (lo, hi) = (q1 - iqr_factor * (q3 - q1), q3 + iqr_factor * (q3 - q1));
    let kept: Vec<f64> = values
        .iter()
        .cloned()
        .filter(|v| (lo..=hi).contains(&v.log10()))
        .collect();
    (kept.iter().sum::<f64>() / kept.len().max(1) as f64, kept.len())
}

/// Least-squares polynomial coefficients `p_0..p_deg`.
pub fn polyfit(x: &[f64], y: &[f64], deg: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.len() <= deg {
        return Err(Error::Calibration("not enough points for the polynomial fit".into()));
    }
    let v = DMatrix::from_fn(x.len(), deg + 1, |r, c| x[r].powi(c as i32));
    let svd = v.svd(true, true);
    let sol = svd
        .solve(&DVector::from_column_slice(y), 1e-14)
        .map_err(|e| Error::Calibration(e.to_string()))?;
    Ok(sol.iter().cloned().collect())
}

pub fn calibrate_f(geom: &ArrayGeometry, cfg: &CalibrationConfig) -> Result<CalibrationReport> {
    cfg.validate()?;
    let mut ns = cfg.n_values.clone();
    ns.sort_unstable();

    let mut cells = Vec::new();
    let mut coeffs = Vec::new();
    let mut fit_rms = Vec::new();
    for &n in &ns {
        let per_trial: Vec<Vec<f64>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| trial_f_values(geom, cfg, n, t))
            .collect();
        let mut log_means = Vec::with_capacity(cfg.gamma_db.len());
        for (gi, &gdb) in cfg.gamma_db.iter().enumerate() {
            let vals: Vec<f64> = per_trial.iter().map(|v| v[gi]).collect();
            let (mean, kept) = robust_mean(&vals, cfg.iqr_factor);
            if kept == 0 {
                return Err(Error::Calibration(format!("no trials left for N={n}, gamma={gdb} dB")));
            }
            cells.push(CellStat {
                n,
                gamma_db: gdb,
                mean_f: mean,
                kept,
                total: vals.len(),
            });
            log_means.push(mean.log10());
        }
        let p = polyfit(&cfg.gamma_db, &log_means, 4)?;
        let rms = (cfg
            .gamma_db
            .iter()
            .zip(&log_means)
            .map(|(&x, &y)| {
                let fx = p.iter().rev().fold(0.0, |acc, c| acc * x + c);
                (fx - y).powi(2)
            })
            .sum::<f64>()
            / cfg.gamma_db.len() as f64)
            .sqrt();
        fit_rms.push((n, rms));
        coeffs.push([p[0], p[1], p[2], p[3], p[4]]);
    }

    let g_min = cfg.gamma_db.iter().cloned().fold(f64::INFINITY, f64::min);
    let g_max = cfg.gamma_db.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut model = EpsilonModel::new(ns[0], coeffs, (g_min, g_max))?;
    model.metadata = vec![
        ("trials".into(), cfg.trials.to_string()),
        ("columns".into(), cfg.columns.to_string()),
        ("realizations".into(), cfg.realizations.to_string()),
        ("seed".into(), cfg.seed.to_string()),
        ("elements".into(), geom.elements().to_string()),
        ("l_max".into(), cfg.l_max.to_string()),
        (
            "sparsity".into(),
            cfg.sparsity_probs
                .iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join("/"),
        ),
        (
            "attenuation".into(),
            format!("uniform({},{})", cfg.attenuation.0, cfg.attenuation.1),
        ),
        ("outliers".into(), format!("iqr{}", cfg.iqr_factor)),
    ];

    let (monotone_in_gamma, monotone_in_n) = check_monotone(&model, &cfg.gamma_db);
    Ok(CalibrationReport {
        model,
        cells,
        fit_rms,
        monotone_in_gamma,
        monotone_in_n,
    })
}

/// Whether the fitted `f` is non-increasing in `gamma` and non-decreasing in
/// `N` on the given SNR grid.
pub fn check_monotone(model: &EpsilonModel, gamma_db: &[f64]) -> (bool, bool) {
    let (lo, hi) = model.n_range();
    let f = |n: usize, gdb: f64| 10f64.powf(model.g(n, gdb).expect("calibrated"));
    let mut grid = gamma_db.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let in_gamma = (lo..=hi).all(|n| grid.windows(2).all(|w| f(n, w[1]) <= f(n, w[0])));
    let in_n = grid.iter().all(|&g| (lo..hi).all(|n| f(n + 1, g) >= f(n, g)));
    (in_gamma, in_n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polyfit_recovers_a_quartic() {
        let x: Vec<f64> = (2..=21).map(f64::from).collect();
        let p = [0.3, -0.2, 0.01, -3e-4, 2e-6];
        let y: Vec<f64> = x.iter().map(|&v| p.iter().rev().fold(0.0, |a, c| a * v + c)).collect();
        let q = polyfit(&x, &y, 4).unwrap();
        for j in 0..5 {
            assert!((p[j] - q[j]).abs() < 1e-8, "{j}: {} vs {}", p[j], q[j]);
        }
    }

    #[test]
    fn robust_mean_drops_outliers() {
        let mut v = vec![1.0; 20];
        v.push(1e6);
        let (m, kept) = robust_mean(&v, 1.5);
        assert_eq!(kept, 20);
        assert_eq!(m, 1.0);
    }

    #[test]
    fn trial_is_deterministic() {
        let geom = ArrayGeometry::uca(6, 0.2, 0.5e9).unwrap();
        let cfg = CalibrationConfig {
            columns: 100,
            realizations: 2,
            ..CalibrationConfig::quick()
        };
        let a = trial_f_values(&geom, &cfg, 2, 0);
        let b = trial_f_values(&geom, &cfg, 2, 0);
        assert_eq!(a, b);
        assert_eq!(a.len(), 20);
        assert!(a.iter().all(|f| *f > 0.0));
    }
}
