//! Worst-case localization error when the height iteration stalls in a local
//! optimum, for two anchors seeing the source at the same elevation.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// `||C^+ b||^2` for two anchors at elevation `theta` whose azimuths differ by
/// `dphi`.
pub fn norm2_cb(theta: f64, dphi: f64) -> f64 {
    let (s2, c2) = (theta.sin().powi(2), theta.cos().powi(2));
    let (sd2, cd) = (dphi.sin().powi(2), dphi.cos());
    let num = 2.0 * s2 * c2 * (4.0 + 4.0 * cd - 4.0 * s2 * sd2 + s2 * s2 * sd2 * (1.0 - cd));
    let den = (s2 * s2 * sd2 + 4.0 * c2).powi(2);
    num / den
}

/// Same quantity built from the anchor terms and a numerical pseudo-inverse.
pub fn norm2_cb_direct(theta: f64, dphi: f64) -> f64 {
    let mut c = Matrix2::zeros();
    let mut b = Vector2::zeros();
    for phi in [0.0, dphi] {
        let u = Vector2::new(f64::cos(phi), f64::sin(phi));
        c += Matrix2::identity() - theta.sin().powi(2) * u * u.transpose();
        b -= 0.5 * (2.0 * theta).sin() * u;
    }
    let smax = c.svd(false, false).singular_values.max();
    let x = c.pseudo_inverse(1e-12 * smax).expect("2x2 pseudo-inverse") * b;
    x.norm_squared()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub norm2: f64,
    /// `max over dphi`, equal to `tan^2 theta`.
    pub max_norm2: f64,
    pub e_max: f64,
}

/// `e_max = dz_max sqrt(tan^2 theta + 1)` together with `||C^+ b||^2` at
/// `dphi`. The bound is symmetric under `theta -> pi - theta`, so elevations
/// below the horizon are accepted as well.
pub fn worst_case_rmse(theta: f64, dphi: f64, dz_max: f64) -> Result<BoundReport> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    if !(theta > 0.0 && theta < std::f64::consts::PI) || (theta - half_pi).abs() < 1e-12 {
        return Err(Error::Domain(format!("elevation {theta} rad gives no finite bound")));
    }
    if !(dz_max >= 0.0) {
        return Err(Error::Argument("dz_max must be non-negative".into()));
    }
    let max_norm2 = theta.tan().powi(2);
    Ok(BoundReport {
        norm2: norm2_cb(theta, dphi),
        max_norm2,
        e_max: dz_max * (max_norm2 + 1.0).sqrt(),
    })
}

/// Grid search of `norm2` over `dphi = k step`, `|dphi| <= pi`. Returns the
/// maximizing `dphi` and the maximum.
pub fn max_norm2_on_grid(theta: f64, step: f64, norm2: impl Fn(f64, f64) -> f64) -> (f64, f64) {
    let kmax = (std::f64::consts::PI / step).floor() as i64;
    let mut best = (0.0, f64::NEG_INFINITY);
    for k in -kmax..=kmax {
        let d = k as f64 * step;
        let v = norm2(theta, d);
        if v > best.1 {
            best = (d, v);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_matches_construction() {
        for t in 1..30 {
            let theta = t as f64 * 0.05;
            for k in -30..=30 {
                let d = k as f64 * 0.1;
                let (a, b) = (norm2_cb(theta, d), norm2_cb_direct(theta, d));
                assert!((a - b).abs() <= 1e-9 * b.max(1.0), "theta={theta} dphi={d}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn forty_five_degrees() {
        let r = worst_case_rmse(std::f64::consts::FRAC_PI_4, 0.0, 10.0).unwrap();
        assert!((r.norm2 - 1.0).abs() < 1e-12);
        assert!((r.e_max - 10.0 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(worst_case_rmse(0.3, 0.2, 0.0).unwrap().e_max, 0.0);
        assert!(worst_case_rmse(std::f64::consts::FRAC_PI_2, 0.0, 1.0).is_err());
    }
}
