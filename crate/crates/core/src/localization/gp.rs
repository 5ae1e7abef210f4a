//! Single-source localization on a height map from bearing lines.
//!
//! Every anchor contributes the line through the array position `r` along the
//! measured unit direction `u`. The source is the map point minimizing the sum
//! of squared distances to all lines; for fixed height the minimizer in the
//! plane has a closed form, and the height is then re-read from the map.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::CityMap;

/// Relative singular-value cutoff of the 2x2 pseudo-inverse.
pub const GP_RCOND: f64 = 1e-12;

/// Squared distance from `w` to the line `r + alpha u`.
pub fn line_distance_sq(w: &Vector3<f64>, r: &Vector3<f64>, u: &Vector3<f64>) -> f64 {
    let d = w - r;
    (d.norm_squared() - d.dot(u).powi(2)).max(0.0)
}

/// Sum of squared distances from `w` to every anchor line.
pub fn sum_line_distance_sq(w: &Vector3<f64>, anchors: &[(Vector3<f64>, Vector3<f64>)]) -> f64 {
    anchors.iter().map(|(r, u)| line_distance_sq(w, r, u)).sum()
}

/// Running sums `C`, `h`, `b` over all anchors of one source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorSummary {
    pub c: Matrix2<f64>,
    pub h: Vector2<f64>,
    pub b: Vector2<f64>,
    pub count: usize,
}

impl Default for AnchorSummary {
    fn default() -> Self {
        Self {
            c: Matrix2::zeros(),
            h: Vector2::zeros(),
            b: Vector2::zeros(),
            count: 0,
        }
    }
}

impl AnchorSummary {
    pub fn from_anchor(r: &Vector3<f64>, u: &Vector3<f64>) -> Self {
        accumulate_anchor(&Self::default(), r, u)
    }

    pub fn from_anchors(anchors: &[(Vector3<f64>, Vector3<f64>)]) -> Self {
        anchors
            .iter()
            .fold(Self::default(), |s, (r, u)| accumulate_anchor(&s, r, u))
    }

    pub fn push(&mut self, r: &Vector3<f64>, u: &Vector3<f64>) {
        *self = accumulate_anchor(self, r, u);
    }
}

/// Adds the line through `r` along `u`: with `F = I - u u^T`,
/// `C += F[0..2, 0..2]`, `h += F[0..2, :] r`, `b += F[0..2, 2]`.
pub fn accumulate_anchor(s: &AnchorSummary, r: &Vector3<f64>, u: &Vector3<f64>) -> AnchorSummary {
    let f = Matrix3::identity() - u * u.transpose();
    let top = f.fixed_rows::<2>(0);
    AnchorSummary {
        c: s.c + top.fixed_columns::<2>(0),
        h: s.h + top * r,
        b: s.b + top.column(2),
        count: s.count + 1,
    }
}

fn pinv2(c: &Matrix2<f64>) -> Matrix2<f64> {
    let svd = c.svd(true, true);
    let smax = svd.singular_values.max();
    if smax <= 0.0 {
        return Matrix2::zeros();
    }
    svd.pseudo_inverse(GP_RCOND * smax).unwrap_or_else(|_| Matrix2::zeros())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    /// Step-size tolerance (m).
    pub eps_loc: f64,
    pub max_iters: usize,
    /// Starting height.
    pub z0: f64,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            eps_loc: 1e-2,
            max_iters: 15,
            z0: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpSolution {
    pub position: Vector3<f64>,
    pub iterations: usize,
    /// Length of the final step.
    pub last_step: f64,
    /// Iteration cap reached with a final step above `10 eps_loc`.
    pub diverged: bool,
}

/// Alternates `w' = C^+ (h - b z)` and `z = map(w')`, starting from
/// `w' = 0`, `z = z0`, until a step no longer than `eps_loc` or the
/// iteration cap.
pub fn gp_solve(s: &AnchorSummary, map: &CityMap, cfg: &GpConfig) -> Result<GpSolution> {
    if s.count == 0 {
        return Err(Error::Argument("localization needs at least one anchor".into()));
    }
    if cfg.max_iters == 0 || !(cfg.eps_loc > 0.0) {
        return Err(Error::Config("gp_solve needs max_iters >= 1 and eps_loc > 0".into()));
    }
    let ci = pinv2(&s.c);
    let mut w = Vector2::zeros();
    let mut z = cfg.z0;
    let mut step = f64::INFINITY;
    let mut k = 0;
    while k < cfg.max_iters {
        k += 1;
        let w_new = ci * (s.h - s.b * z);
        let z_new = map.height_at(w_new.x, w_new.y);
        step = ((w_new - w).norm_squared() + (z_new - z).powi(2)).sqrt();
        w = w_new;
        z = z_new;
        if step <= cfg.eps_loc {
            break;
        }
    }
    Ok(GpSolution {
        position: Vector3::new(w.x, w.y, z),
        iterations: k,
        last_step: step,
        diverged: step > 10.0 * cfg.eps_loc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> CityMap {
        CityMap::flat([-1000.0, -1000.0], 2000.0, 10.0).unwrap()
    }

    #[test]
    fn line_distance_cases() {
        let (r, u) = (Vector3::zeros(), Vector3::z());
        assert_eq!(line_distance_sq(&Vector3::new(3.0, 4.0, 7.0), &r, &u), 25.0);
        assert_eq!(line_distance_sq(&Vector3::new(0.0, 0.0, -9.0), &r, &u), 0.0);
        let w = Vector3::new(1.0, -2.0, 5.0);
        assert_eq!(line_distance_sq(&w, &r, &u), line_distance_sq(&w, &r, &-u));
    }

    #[test]
    fn vertical_and_horizontal_contributions() {
        let r = Vector3::new(5.0, -3.0, 100.0);
        let s = AnchorSummary::from_anchor(&r, &-Vector3::z());
        assert_eq!(s.c, Matrix2::identity());
        assert_eq!(s.b, Vector2::zeros());
        assert_eq!(s.h, Vector2::new(5.0, -3.0));
        let s = AnchorSummary::from_anchor(&r, &Vector3::x());
        assert_eq!(s.c, Matrix2::new(0.0, 0.0, 0.0, 1.0));
    }

    #[test]
    fn two_exact_bearings_on_flat_ground() {
        let target = Vector3::new(50.0, 50.0, 0.0);
        let anchors: Vec<_> = [Vector3::new(0.0, 0.0, 100.0), Vector3::new(100.0, 0.0, 100.0)]
            .into_iter()
            .map(|r| (r, (target - r).normalize()))
            .collect();
        let sol = gp_solve(&AnchorSummary::from_anchors(&anchors), &flat(), &GpConfig::default()).unwrap();
        assert!((sol.position - target).norm() < 1e-6);
        assert_eq!(sol.iterations, 2);
        assert!(!sol.diverged);
    }

    #[test]
    fn single_vertical_anchor_lands_underneath() {
        let r = Vector3::new(12.0, -7.0, 300.0);
        let sol = gp_solve(
            &AnchorSummary::from_anchor(&r, &-Vector3::z()),
            &flat(),
            &GpConfig::default(),
        )
        .unwrap();
        assert!((sol.position - Vector3::new(12.0, -7.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn empty_summary_is_rejected() {
        assert!(gp_solve(&AnchorSummary::default(), &flat(), &GpConfig::default()).is_err());
    }
}
