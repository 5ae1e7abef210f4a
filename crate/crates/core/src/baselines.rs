//! Reference per-snapshot detectors: binary n-of-M, GLRT and square law.
//!
//! Each one reduces a snapshot to a scalar statistic and detects when the
//! statistic reaches a threshold, so output sizes can be matched by ranking.

use serde::{Deserialize, Serialize};

use crate::linalg::{CMatrix, CVector};

/// Largest argument for which `ln I0` is summed as a power series.
pub const LN_I0_SERIES_MAX: f64 = 20.0;

/// `ln I0(x)` for `x >= 0`: power series up to [`LN_I0_SERIES_MAX`], the
/// large-argument expansion `x - ln sqrt(2 pi x) + ln(sum_k c_k / x^k)`
/// beyond it.
pub fn ln_i0(x: f64) -> f64 {
    let x = x.abs();
    if x <= LN_I0_SERIES_MAX {
        let q = x * x / 4.0;
        let (mut term, mut sum, mut k) = (1.0f64, 1.0f64, 0.0f64);
        loop {
            k += 1.0;
            term *= q / (k * k);
            sum += term;
            if term < 1e-17 * sum {
                return sum.ln();
            }
        }
    }
    // c_k = ((2k-1)!!)^2 / (k! 8^k)
    let (mut term, mut sum) = (1.0f64, 1.0f64);
    for k in 1..=14 {
        let kf = k as f64;
        term *= (2.0 * kf - 1.0).powi(2) / (kf * 8.0 * x);
        sum += term;
    }
    x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Baseline {
    /// At least `n` of the `M` moduli reach the threshold.
    Binary { n: usize },
    /// `sum ln I0(2 sqrt(snr / noise_var) |y_k|)`.
    Glrt { snr: f64, noise_var: f64 },
    /// `sum |y_k|^2`.
    SquareLaw,
}

impl Baseline {
    pub fn name(&self) -> &'static str {
        match self {
            Baseline::Binary { .. } => "binary",
            Baseline::Glrt { .. } => "glrt",
            Baseline::SquareLaw => "sld",
        }
    }

    /// Scalar statistic; the snapshot is detected iff it is `>=` the threshold.
    /// For the binary detector this is the `n`-th largest modulus.
    pub fn statistic(&self, y: &CVector) -> f64 {
        match *self {
            Baseline::Binary { n } => {
                let mut m: Vec<f64> = y.iter().map(|z| z.norm()).collect();
                m.sort_by(|a, b| b.total_cmp(a));
                let n = n.clamp(1, m.len().max(1));
                m.get(n - 1).copied().unwrap_or(0.0)
            }
            Baseline::Glrt { snr, noise_var } => {
                let g = 2.0 * (snr / noise_var).sqrt();
                y.iter().map(|z| ln_i0(g * z.norm())).sum()
            }
            Baseline::SquareLaw => y.iter().map(|z| z.norm_sqr()).sum(),
        }
    }

    pub fn detect(&self, y: &CVector, threshold: f64) -> bool {
        self.statistic(y) >= threshold
    }

    pub fn statistics(&self, block: &CMatrix) -> Vec<f64> {
        (0..block.ncols())
            .map(|g| self.statistic(&block.column(g).into_owned()))
            .collect()
    }
}

pub fn binary_detector(y: &CVector, threshold: f64, n: usize) -> bool {
    Baseline::Binary { n }.detect(y, threshold)
}

pub fn glrt_detector(y: &CVector, threshold: f64, snr: f64, noise_var: f64) -> bool {
    Baseline::Glrt { snr, noise_var }.detect(y, threshold)
}

pub fn sld_detector(y: &CVector, threshold: f64) -> bool {
    Baseline::SquareLaw.detect(y, threshold)
}

/// Threshold chosen for a target output size.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedThreshold {
    pub threshold: f64,
    /// Columns detected at this threshold, increasing.
    pub detected: Vec<usize>,
    /// False when ties in the statistic made the target size unreachable.
    pub exact: bool,
}

/// Threshold at which the detector keeps `n_out` columns: the `n_out`-th
/// largest statistic, or just above the maximum for `n_out = 0`. Ties at
/// the threshold keep every tied column.
pub fn match_output_size(stats: &[f64], n_out: usize) -> MatchedThreshold {
    let n_out = n_out.min(stats.len());
    let mut sorted: Vec<f64> = stats.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let threshold = if n_out == 0 {
        sorted.first().map_or(f64::INFINITY, |&m| m.next_up())
    } else {
        sorted[n_out - 1]
    };
    let detected: Vec<usize> = (0..stats.len()).filter(|&g| stats[g] >= threshold).collect();
    let exact = detected.len() == n_out;
    MatchedThreshold {
        threshold,
        detected,
        exact,
    }
}

/// Fraction of `detected` columns that are not in `signal` (both
/// increasing); `None` when nothing was detected.
pub fn false_detection_probability(detected: &[usize], signal: &[usize]) -> Option<f64> {
    if detected.is_empty() {
        return None;
    }
    let false_hits = detected.iter().filter(|g| signal.binary_search(g).is_err()).count();
    Some(false_hits as f64 / detected.len() as f64)
}
