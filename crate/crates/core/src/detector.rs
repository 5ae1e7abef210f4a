//! Energy detector: iterative thresholding with a pulse-continuity filter.
//!
//! Column indices are 0-based throughout.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scene::SourceSet;
use crate::signal::received_peak_power;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub p0: f64,
    pub diff_max: usize,
    pub l_adj: usize,
    pub max_iters: usize,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            p0: 1e-3,
            diff_max: 20,
            l_adj: 5,
            max_iters: 10,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p0 > 0.0 && self.p0 < 1.0) {
            return Err(Error::Config(format!("p0 must lie in (0, 1), got {}", self.p0)));
        }
        if self.diff_max < 1 || self.l_adj < 2 || self.max_iters < 1 {
            return Err(Error::Config("need diff_max >= 1, l_adj >= 2, max_iters >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct DetectionResult {
    /// Retained column indices, strictly increasing.
    pub kept: Vec<usize>,
    /// The retained columns, in the order of `kept`.
    pub filtered: CMatrix,
    pub noise_var: f64,
    /// Instantaneous SNR estimate, clamped at 0.
    pub inst_snr: f64,
    /// Unclamped estimate.
    pub inst_snr_raw: f64,
    pub iterations: usize,
    /// Set when some iteration retained every column, so the noise estimate
    /// had to be carried over from the previous iteration.
    pub noise_carried: bool,
}

impl DetectionResult {
    pub fn len(&self) -> usize {
        self.kept.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["column", "energy"])?;
        for (k, &c) in self.kept.iter().enumerate() {
            let e: f64 = self.filtered.column(k).iter().map(|z| z.norm_sqr()).sum();
            w.write_record([c.to_string(), e.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `sqrt(-ln(p0) * noise_var)`.
pub fn threshold_from_p0(p0: f64, noise_var: f64) -> Result<f64> {
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::Argument(format!("p0 must lie in (0, 1), got {p0}")));
    }
    if !(noise_var >= 0.0) {
        return Err(Error::Argument("noise variance must be non-negative".into()));
    }
    Ok((-p0.ln() * noise_var).sqrt())
}

/// Keeps the members of every chain of at least `l_adj` indices whose
/// successive gaps are all `<= diff_max`.
///
/// In terms of the binary gap vector `q_adj`, this keeps each run of
/// `l_adj - 1` or more ones together with the element right after the run.
pub fn run_length_filter(indices: &[usize], diff_max: usize, l_adj: usize) -> Vec<usize> {
    run_length_filter_by(indices.len(), |k| indices[k + 1] - indices[k] <= diff_max, l_adj)
        .into_iter()
        .map(|k| indices[k])
        .collect()
}

/// Positions `0..len` kept by the run rule, where `adjacent(k)` says whether
/// elements `k` and `k + 1` are linked.
pub(crate) fn run_length_filter_by(len: usize, adjacent: impl Fn(usize) -> bool, l_adj: usize) -> Vec<usize> {
    let mut out = Vec::new();
    if len < 2 {
        return out;
    }
    let need = l_adj.saturating_sub(1).max(1);
    let mut k = 0;
    while k < len - 1 {
        if !adjacent(k) {
            k += 1;
            continue;
        }
        let start = k;
        while k < len - 1 && adjacent(k) {
            k += 1;
        }
        // ones at start..k, the element below the run is k
        if k - start >= need {
            out.extend(start..=k);
        }
    }
    out
}

/// Runs the detector on a full window with the default initial noise
/// estimate `||Y||_F^2 / (M G)`.
pub fn detect(block: &CMatrix, cfg: &DetectorConfig) -> Result<DetectionResult> {
    let labels: Vec<usize> = (0..block.ncols()).collect();
    detect_labeled(block, &labels, cfg, None)
}

/// Runs the detector on `block` whose columns carry the given increasing
/// labels (original column indices), optionally starting from a known noise
/// variance.
pub fn detect_labeled(
    block: &CMatrix,
    labels: &[usize],
    cfg: &DetectorConfig,
    initial_var: Option<f64>,
) -> Result<DetectionResult> {
    cfg.validate()?;
    let (m, g) = block.shape();
    if g == 0 || m == 0 {
        return Err(Error::Argument("empty sample block".into()));
    }
    if labels.len() != g || labels.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(
            "column labels must be strictly increasing, one per column".into(),
        ));
    }

    let mut col_max = vec![0.0f64; g];
    let mut col_energy = vec![0.0f64; g];
    for c in 0..g {
        let col = block.column(c);
        let (mut mx, mut e) = (0.0f64, 0.0);
        for z in col.iter() {
            let p = z.norm_sqr();
            mx = mx.max(p);
            e += p;
        }
        col_max[c] = mx;
        col_energy[c] = e;
    }
    let total: f64 = col_energy.iter().sum();

    let mut var = initial_var.unwrap_or(total / (m * g) as f64);
    let mut kept: Vec<usize> = Vec::new();
    let mut carried = false;
    let mut iterations = 0;
    let mut first = true;
    loop {
        let vth2 = threshold_from_p0(cfg.p0, var)?.powi(2);
        let old = std::mem::take(&mut kept);
        iterations += 1;
        let passing: Vec<usize> = (0..g).filter(|&c| col_max[c] > vth2).collect();
        kept = run_length_filter_by(
            passing.len(),
            |k| labels[passing[k + 1]] - labels[passing[k]] <= cfg.diff_max,
            cfg.l_adj,
        )
        .into_iter()
        .map(|k| passing[k])
        .collect();

        let kept_energy: f64 = kept.iter().map(|&c| col_energy[c]).sum();
        if kept.len() < g {
            var = (total - kept_energy).max(0.0) / (m * (g - kept.len())) as f64;
        } else {
            carried = true;
        }
        if (!first && old == kept) || iterations >= cfg.max_iters {
            break;
        }
        first = false;
    }

    let g_mrs = kept.len();
    let kept_energy: f64 = kept.iter().map(|&c| col_energy[c]).sum();
    let raw = if g_mrs > 0 && var > 0.0 {
        (kept_energy / (m * g_mrs) as f64 - var) / var
    } else if g_mrs > 0 {
        f64::INFINITY
    } else {
        0.0
    };
    let filtered = block.select_columns(kept.iter());
    Ok(DetectionResult {
        kept: kept.iter().map(|&c| labels[c]).collect(),
        filtered,
        noise_var: var,
        inst_snr: raw.max(0.0),
        inst_snr_raw: raw,
        iterations,
        noise_carried: carried,
    })
}

/// `sum_n P_n / (4 pi R_n^2 sigma_v^2)`.
pub fn snr_star(sources: &SourceSet, r0: &Vector3<f64>, noise_var: f64) -> Result<f64> {
    Ok(received_peak_power(sources, r0)? / noise_var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    #[test]
    fn threshold_cases() {
        assert!((threshold_from_p0((-1.0f64).exp(), 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((threshold_from_p0(1e-3, 4.0).unwrap() - 5.256_521_769_756_932).abs() < 1e-12);
        assert_eq!(threshold_from_p0(1e-3, 0.0).unwrap(), 0.0);
        assert!(threshold_from_p0(0.0, 1.0).is_err());
        assert!(threshold_from_p0(1.0, 1.0).is_err());
    }

    #[test]
    fn run_length_cases() {
        assert_eq!(run_length_filter(&[5, 6, 7, 8, 9, 40, 41], 20, 5), vec![5, 6, 7, 8, 9]);
        let all = vec![1, 4, 9, 10, 30];
        assert_eq!(run_length_filter(&all, 20, 2), all);
        assert!(run_length_filter(&[0, 50, 100, 150], 20, 2).is_empty());
        assert!(run_length_filter(&[], 20, 5).is_empty());
        assert!(run_length_filter(&[3], 20, 2).is_empty());
        // two runs separated by a gap keep their trailing elements
        assert_eq!(
            run_length_filter(&[0, 1, 2, 100, 101, 102], 5, 3),
            vec![0, 1, 2, 100, 101, 102]
        );
    }

    #[test]
    fn noise_free_pulse_is_isolated() {
        let mut y = CMatrix::zeros(4, 200);
        for c in 50..60 {
            for r in 0..4 {
                y[(r, c)] = C64::new(1.0, 0.5 * r as f64);
            }
        }
        let res = detect(&y, &DetectorConfig::default()).unwrap();
        assert_eq!(res.kept, (50..60).collect::<Vec<_>>());
        assert_eq!(res.noise_var, 0.0);
        assert_eq!(res.filtered.ncols(), 10);
    }

    #[test]
    fn everything_kept_carries_noise() {
        let y = CMatrix::from_element(2, 20, C64::new(1.0, 0.0));
        let res = detect_labeled(&y, &(0..20).collect::<Vec<_>>(), &DetectorConfig::default(), Some(0.1)).unwrap();
        assert_eq!(res.kept.len(), 20);
        assert!(res.noise_carried);
        assert_eq!(res.noise_var, 0.1);
    }

    #[test]
    fn rejects_bad_config() {
        let y = CMatrix::zeros(2, 4);
        assert!(detect(
            &y,
            &DetectorConfig {
                l_adj: 1,
                ..Default::default()
            }
        )
        .is_err());
        assert!(detect(&CMatrix::zeros(2, 0), &DetectorConfig::default()).is_err());
    }

    #[test]
    fn snr_star_cases() {
        let set = SourceSet::uniform(&[Vector3::new(0.0, 0.0, 0.0)], 3e-6, 4.0 * std::f64::consts::PI, 3e-3);
        let r0 = Vector3::new(1.0, 0.0, 0.0);
        assert!((snr_star(&set, &r0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let two = SourceSet::uniform(
            &[Vector3::zeros(), Vector3::zeros()],
            3e-6,
            4.0 * std::f64::consts::PI,
            3e-3,
        );
        assert!((snr_star(&two, &r0, 1.0).unwrap() - 2.0).abs() < 1e-15);
    }
}
