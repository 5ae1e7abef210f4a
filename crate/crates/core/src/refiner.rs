//! Closed-loop refinement of the array manifold for one window.
//!
//! Each iteration codes the retained snapshots sparsely against the current
//! manifold, smooths the codes, re-estimates the manifold by least squares and
//! then sweeps every column once with a rank-1 (K-SVD) update. The refined
//! columns are finally read out as angles by beamforming.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::DetectionResult;
use crate::error::{Error, Result};
use crate::linalg::{canonical_column, frobenius_sq, leading_singular, pinv, CMatrix, CVector, C64};
use crate::manifold::{ColumnTag, ManifoldEstimate};
use crate::rough_aoa::SteeringTable;
use crate::scene::ArrayGeometry;
use crate::signal::steering_vector;
use crate::sparse::{epsilon_opt, phase_smooth, recover_with, EpsilonModel, PhaseConfig, SparseSolver};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinerConfig {
    pub l_max: usize,
    pub eps_aoa: f64,
    pub max_iters: usize,
    pub phase: PhaseConfig,
    /// Local refinement passes after the grid search in [`read_aoas`].
    pub zoom_levels: usize,
    /// Step reduction per zoom pass.
    pub zoom_factor: usize,
}

impl Default for RefinerConfig {
    fn default() -> Self {
        Self {
            l_max: 3,
            eps_aoa: 1e-4,
            max_iters: 20,
            phase: PhaseConfig::default(),
            zoom_levels: 5,
            zoom_factor: 10,
        }
    }
}

impl RefinerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_max == 0 || self.max_iters == 0 || !(self.eps_aoa >= 0.0) {
            return Err(Error::Config(
                "refiner needs l_max >= 1, max_iters >= 1, eps_aoa >= 0".into(),
            ));
        }
        if self.zoom_levels > 0 && self.zoom_factor < 2 {
            return Err(Error::Config("zoom_factor must be at least 2".into()));
        }
        if self.phase.l_adj == 0 || !(self.phase.eps_phi > 0.0) {
            return Err(Error::Config("phase smoother needs l_adj >= 1 and eps_phi > 0".into()));
        }
        Ok(())
    }
}

/// `Y S^+`, computed as `Y S^H (S S^H)^+`.
pub fn ls_manifold_update(block: &CMatrix, s: &CMatrix) -> CMatrix {
    assert_eq!(
        block.ncols(),
        s.ncols(),
        "codes and snapshots must have the same columns"
    );
    let sh = s.adjoint();
    (block * &sh) * pinv(&(s * &sh))
}

/// Restricted residual norms around one K-SVD column update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsvdStep {
    pub column: usize,
    pub before: f64,
    pub after: f64,
    pub skipped: bool,
}

/// One sweep over the columns of `a`. Column `j` becomes the leading left
/// singular vector of `Y - A_j S_j` restricted to the support of row `j`, and
/// that support is refilled with `sigma v^H`. Rows without support are left
/// untouched.
pub fn ksvd_pass(block: &CMatrix, a: &mut CMatrix, s: &mut CMatrix) -> Vec<KsvdStep> {
    assert_eq!(a.ncols(), s.nrows(), "one code row per manifold column");
    assert_eq!(block.ncols(), s.ncols());
    let mut steps = Vec::with_capacity(a.ncols());
    for j in 0..a.ncols() {
        let support: Vec<usize> = (0..s.ncols()).filter(|&c| s[(j, c)] != C64::new(0.0, 0.0)).collect();
        if support.is_empty() {
            steps.push(KsvdStep {
                column: j,
                before: 0.0,
                after: 0.0,
                skipped: true,
            });
            continue;
        }
        let y_sub = block.select_columns(support.iter());
        let s_sub = s.select_columns(support.iter());
        let full = &y_sub - &*a * &s_sub;
        let aj: CVector = a.column(j).into_owned();
        let sj = s_sub.row(j).into_owned();
        let yr = &full + &aj * &sj;
        let before = frobenius_sq(&full).sqrt();
        match leading_singular(&yr) {
            Some((u, _sigma, row)) => {
                let after = frobenius_sq(&(&yr - &u * &row)).sqrt();
                a.set_column(j, &u);
                for (k, &c) in support.iter().enumerate() {
                    s[(j, c)] = row[k];
                }
                steps.push(KsvdStep {
                    column: j,
                    before,
                    after,
                    skipped: false,
                });
            }
            None => steps.push(KsvdStep {
                column: j,
                before,
                after: before,
                skipped: true,
            }),
        }
    }
    steps
}

/// Puts column `j` in canonical form and compensates row `j` of the codes.
fn canonicalize_pair(a: &mut CMatrix, s: &mut CMatrix, j: usize) {
    let col: CVector = a.column(j).into_owned();
    let c = canonical_column(&col);
    let scale = col.dotc(&c).conj();
    if scale.norm() == 0.0 {
        return;
    }
    a.set_column(j, &c);
    for g in 0..s.ncols() {
        s[(j, g)] *= scale;
    }
}

#[derive(Debug, Clone)]
pub struct RefineReport {
    /// Refined manifold; empty when smoothing removed every row.
    pub manifold: ManifoldEstimate,
    /// Smoothed codes aligned with the manifold columns.
    pub codes: CMatrix,
    /// Convergence criterion after each iteration.
    pub criteria: Vec<f64>,
    pub converged: bool,
}

impl RefineReport {
    /// No source survived smoothing in this window.
    pub fn exhausted(&self) -> bool {
        self.manifold.is_empty()
    }
}

/// Runs the refinement loop on the retained snapshots `block` whose original
/// sample indices are `q_mrs`.
#[allow(clippy::too_many_arguments)]
pub fn refine_manifold(
    block: &CMatrix,
    q_mrs: &[usize],
    a0: &ManifoldEstimate,
    noise_var: f64,
    inst_snr: f64,
    model: &EpsilonModel,
    cfg: &RefinerConfig,
) -> Result<RefineReport> {
    cfg.validate()?;
    if a0.is_empty() {
        return Err(Error::EmptyManifold);
    }
    if block.ncols() == 0 {
        return Err(Error::NoDetections);
    }
    if q_mrs.len() != block.ncols() {
        return Err(Error::Argument("one sample index per retained column".into()));
    }
    let m = block.nrows();
    let mut a = a0.columns.clone();
    for j in 0..a.ncols() {
        let c = canonical_column(&a.column(j).into_owned());
        a.set_column(j, &c);
    }
    let mut tags = a0.tags.clone();
    let mut codes = CMatrix::zeros(a.ncols(), block.ncols());
    // signal energy per entry; taken from the data when the noise estimate is zero
    let e_avg = if inst_snr.is_finite() {
        inst_snr * noise_var
    } else {
        frobenius_sq(block) / (m * block.ncols()) as f64
    };
    let mut criteria = Vec::new();
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let eps = epsilon_opt(model, a.ncols(), inst_snr, m, e_avg, noise_var)?;
        let solver = SparseSolver::new(&a, cfg.l_max);
        let est = recover_with(&solver, block, eps);
        let smoothed = phase_smooth(&est.matrix, q_mrs, &cfg.phase);
        if smoothed.row_map.is_empty() {
            let empty = ManifoldEstimate {
                columns: CMatrix::zeros(m, 0),
                tags: Vec::new(),
                iterations: criteria.len() + 1,
            };
            return Ok(RefineReport {
                manifold: empty,
                codes: CMatrix::zeros(0, block.ncols()),
                criteria,
                converged: false,
            });
        }
        let old = a.select_columns(smoothed.row_map.iter());
        tags = smoothed.row_map.iter().map(|&r| tags[r]).collect();
        let mut s = smoothed.matrix;
        a = ls_manifold_update(block, &s);
        ksvd_pass(block, &mut a, &mut s);
        for j in 0..a.ncols() {
            canonicalize_pair(&mut a, &mut s, j);
        }
        codes = s;
        let crit = frobenius_sq(&(&a - &old)).sqrt() / a.ncols() as f64;
        criteria.push(crit);
        if crit <= cfg.eps_aoa {
            converged = true;
            break;
        }
    }
    let iterations = criteria.len();
    Ok(RefineReport {
        manifold: ManifoldEstimate {
            columns: a,
            tags,
            iterations,
        },
        codes,
        criteria,
        converged,
    })
}

/// [`refine_manifold`] fed directly from a detector result.
pub fn refine_detection(
    det: &DetectionResult,
    a0: &ManifoldEstimate,
    model: &EpsilonModel,
    cfg: &RefinerConfig,
) -> Result<RefineReport> {
    refine_manifold(&det.filtered, &det.kept, a0, det.noise_var, det.inst_snr, model, cfg)
}

/// Angles read from one refined column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedAoa {
    pub tag: ColumnTag,
    pub theta: f64,
    pub phi: f64,
}

fn wrap_phi(p: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let w = p.rem_euclid(two_pi);
    if w >= two_pi {
        0.0
    } else {
        w
    }
}

/// Beamforming readout: per column, the grid point maximizing `|a^H c|`
/// (lowest indices win ties), then `zoom_levels` passes over a finer local
/// grid of `(2 zoom_factor + 1)^2` points, each shrinking the step by
/// `zoom_factor`. Elevation stays inside the grid's range.
pub fn read_aoas(
    columns: &CMatrix,
    table: &SteeringTable,
    geom: &ArrayGeometry,
    zoom_levels: usize,
    zoom_factor: usize,
) -> Vec<(f64, f64)> {
    let grid = &table.grid;
    let scores = table.vectors.adjoint() * columns;
    let (ts, ps) = (grid.thetas(), grid.phis());
    let t_range = (ts[0], ts[ts.len() - 1]);
    let t_step0 = if ts.len() > 1 { ts[1] - ts[0] } else { 0.0 };
    let p_step0 = if ps.len() > 1 {
        ps[1] - ps[0]
    } else {
        2.0 * std::f64::consts::PI
    };
    let f = zoom_factor as i64;
    (0..columns.ncols())
        .map(|n| {
            let mut best_k = 0;
            let mut best = f64::NEG_INFINITY;
            for k in 0..scores.nrows() {
                let v = scores[(k, n)].norm();
                if v > best {
                    best = v;
                    best_k = k;
                }
            }
            let (mut t, mut p) = grid.angles(best_k);
            let c = columns.column(n);
            let (mut dt, mut dp) = (t_step0, p_step0);
            for _ in 0..zoom_levels {
                let (ct, cp) = (t, p);
                dt /= zoom_factor as f64;
                dp /= zoom_factor as f64;
                for a in -f..=f {
                    let tt = (ct + a as f64 * dt).clamp(t_range.0, t_range.1);
                    for b in -f..=f {
                        let pp = wrap_phi(cp + b as f64 * dp);
                        let v = steering_vector(geom, tt, pp).dotc(&c).norm();
                        if v > best {
                            best = v;
                            t = tt;
                            p = pp;
                        }
                    }
                }
            }
            (t, p)
        })
        .collect()
}

/// Tags the readout of a refined manifold.
pub fn refined_aoas(
    manifold: &ManifoldEstimate,
    table: &SteeringTable,
    geom: &ArrayGeometry,
    cfg: &RefinerConfig,
) -> Vec<RefinedAoa> {
    read_aoas(&manifold.columns, table, geom, cfg.zoom_levels, cfg.zoom_factor)
        .into_iter()
        .zip(&manifold.tags)
        .map(|((theta, phi), &tag)| RefinedAoa { tag, theta, phi })
        .collect()
}

pub fn tag_label(tag: ColumnTag) -> String {
    match tag {
        ColumnTag::Tracked(id) => format!("track{id}"),
        ColumnTag::Candidate(k) => format!("new{k}"),
    }
}

/// CSV rows `window,tag,theta,phi` (radians).
pub fn write_refined_csv(path: &Path, rows: &[(usize, RefinedAoa)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["window", "tag", "theta", "phi"])?;
    for (i, r) in rows {
        w.write_record([i.to_string(), tag_label(r.tag), r.theta.to_string(), r.phi.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
