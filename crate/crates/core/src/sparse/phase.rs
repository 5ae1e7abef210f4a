//! Phase smoothing of recovered codes.
//!
//! A source's code row carries a real pulse times a slowly rotating complex
//! gain, so after folding the sign ambiguity away its phase barely moves
//! from one sample of a pulse to the next. Entries that are not part of such
//! a smooth, contiguous run are discarded.

use serde::{Deserialize, Serialize};

use crate::detector::run_length_filter_by;
use crate::linalg::{CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseConfig {
    pub diff_max: usize,
    pub l_adj: usize,
    /// Phase continuity tolerance (rad).
    pub eps_phi: f64,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            diff_max: 20,
            l_adj: 5,
            eps_phi: std::f64::consts::PI / 10.0,
        }
    }
}

/// Smoothed code matrix with all-zero rows removed.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedCodes {
    pub matrix: CMatrix,
    /// `row_map[k]` is the input row of output row `k`.
    pub row_map: Vec<usize>,
}

/// Phase in `[0, pi]` after flipping entries with negative imaginary part.
fn folded_phase(z: C64) -> f64 {
    let w = if z.im < 0.0 { -z } else { z };
    let p = w.im.atan2(w.re);
    if p < 0.0 {
        p + 2.0 * std::f64::consts::PI
    } else {
        p
    }
}

/// Keeps, per row, the entries that form runs of at least `l_adj` samples
/// whose column gaps (in original indices `q_mrs`) are below `diff_max` and
/// whose folded phase changes by less than `eps_phi` (or more than
/// `pi - eps_phi`, the same line seen across the fold).
pub fn phase_smooth(codes: &CMatrix, q_mrs: &[usize], cfg: &PhaseConfig) -> SmoothedCodes {
    assert_eq!(codes.ncols(), q_mrs.len(), "one column index per code column");
    let pi = std::f64::consts::PI;
    let mut rows: Vec<(usize, Vec<(usize, C64)>)> = Vec::new();
    for n in 0..codes.nrows() {
        let nz: Vec<usize> = (0..codes.ncols())
            .filter(|&c| codes[(n, c)] != C64::new(0.0, 0.0))
            .collect();
        let phase: Vec<f64> = nz.iter().map(|&c| folded_phase(codes[(n, c)])).collect();
        let linked = |k: usize| {
            let dphi = (phase[k + 1] - phase[k]).abs();
            let smooth = dphi < cfg.eps_phi || dphi > pi - cfg.eps_phi;
            smooth && q_mrs[nz[k + 1]] - q_mrs[nz[k]] < cfg.diff_max
        };
        let keep = run_length_filter_by(nz.len(), linked, cfg.l_adj);
        if !keep.is_empty() {
            rows.push((n, keep.into_iter().map(|k| (nz[k], codes[(n, nz[k])])).collect()));
        }
    }
    let mut matrix = CMatrix::zeros(rows.len(), codes.ncols());
    for (k, (_, entries)) in rows.iter().enumerate() {
        for &(c, v) in entries {
            matrix[(k, c)] = v;
        }
    }
    SmoothedCodes {
        matrix,
        row_map: rows.into_iter().map(|r| r.0).collect(),
    }
}
