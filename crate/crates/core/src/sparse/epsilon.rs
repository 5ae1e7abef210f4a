//! Residual threshold model for sparse coding.
//!
//! The squared threshold is `f(N, gamma) M E + M sigma^2`, where `f` is an
//! empirical function of the dictionary size `N` and the SNR. For each
//! calibrated `N`, `log10 f` is a degree-4 polynomial in `gamma` (dB); sizes
//! outside the calibrated range are extrapolated linearly in `N`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Calibrated coefficient table shipped with the crate.
pub const SHIPPED_MODEL: &str = include_str!("../../data/epsilon_model.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonModel {
    n_min: usize,
    /// `coeffs[k]` holds `P_0..P_4` for `N = n_min + k`.
    coeffs: Vec<[f64; 5]>,
    /// SNR range (dB) the polynomials were fitted on; queries are clamped.
    gamma_db: (f64, f64),
    /// Free-form `key=value` calibration metadata.
    pub metadata: Vec<(String, String)>,
}

impl EpsilonModel {
    pub fn new(n_min: usize, coeffs: Vec<[f64; 5]>, gamma_db: (f64, f64)) -> Result<Self> {
        if n_min == 0 || coeffs.is_empty() {
            return Err(Error::Config("epsilon model needs at least one N >= 1".into()));
        }
        if !(gamma_db.0 <= gamma_db.1) || coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Config("invalid epsilon model coefficients".into()));
        }
        Ok(Self {
            n_min,
            coeffs,
            gamma_db,
            metadata: Vec::new(),
        })
    }

    /// Model with `f` identically zero (threshold set by noise alone).
    pub fn zero() -> Self {
        Self {
            n_min: 1,
            coeffs: vec![[f64::NEG_INFINITY, 0.0, 0.0, 0.0, 0.0]],
            gamma_db: (0.0, 0.0),
            metadata: Vec::new(),
        }
    }

    pub fn shipped() -> Self {
        Self::parse(SHIPPED_MODEL).expect("shipped epsilon model parses")
    }

    pub fn n_range(&self) -> (usize, usize) {
        (self.n_min, self.n_min + self.coeffs.len() - 1)
    }

    pub fn gamma_db_range(&self) -> (f64, f64) {
        self.gamma_db
    }

    pub fn coefficients(&self, n: usize) -> Option<[f64; 5]> {
        n.checked_sub(self.n_min).and_then(|k| self.coeffs.get(k)).copied()
    }

    /// `log10 f` polynomial for a calibrated `n` at `gamma_db` (clamped).
    pub fn g(&self, n: usize, gamma_db: f64) -> Option<f64> {
        let p = self.coefficients(n)?;
        let x = gamma_db.clamp(self.gamma_db.0, self.gamma_db.1);
        Some((((p[4] * x + p[3]) * x + p[2]) * x + p[1]) * x + p[0])
    }

    fn f_calibrated(&self, n: usize, gamma_db: f64) -> f64 {
        10f64.powf(self.g(n, gamma_db).expect("calibrated n"))
    }

    /// `f(N, gamma)` for a linear SNR `gamma`, floored at 0.
    pub fn f(&self, n: usize, gamma: f64) -> Result<f64> {
        if n == 0 {
            return Err(Error::Argument("N must be at least 1".into()));
        }
        let gdb = if gamma > 0.0 {
            10.0 * gamma.log10()
        } else {
            f64::NEG_INFINITY
        };
        let (lo, hi) = self.n_range();
        let v = if lo == hi {
            self.f_calibrated(lo, gdb)
        } else if n < lo {
            let (a, b) = (self.f_calibrated(lo, gdb), self.f_calibrated(lo + 1, gdb));
            a - (lo - n) as f64 * (b - a)
        } else if n > hi {
            let (a, b) = (self.f_calibrated(hi - 1, gdb), self.f_calibrated(hi, gdb));
            b + (n - hi) as f64 * (b - a)
        } else {
            self.f_calibrated(n, gdb)
        };
        Ok(v.max(0.0))
    }

    /// CSV text: one `#` metadata line, a header, then `N,P0..P4` rows.
    pub fn to_csv(&self) -> String {
        let mut meta = vec![
            ("version".to_string(), "1".to_string()),
            ("gamma_db_min".to_string(), format!("{}", self.gamma_db.0)),
            ("gamma_db_max".to_string(), format!("{}", self.gamma_db.1)),
        ];
        meta.extend(
            self.metadata
                .iter()
                .filter(|(k, _)| !matches!(k.as_str(), "version" | "gamma_db_min" | "gamma_db_max"))
                .cloned(),
        );
        let mut s = String::from("# ");
        s.push_str(
            &meta
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(";"),
        );
        s.push_str("\nN,P0,P1,P2,P3,P4\n");
        for (k, p) in self.coeffs.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{:e},{:e},{:e},{:e},{:e}",
                self.n_min + k,
                p[0],
                p[1],
                p[2],
                p[3],
                p[4]
            );
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let first = lines
            .next()
            .ok_or_else(|| Error::Format("empty epsilon model".into()))?;
        let meta_str = first
            .strip_prefix('#')
            .ok_or_else(|| Error::Format("missing metadata line".into()))?;
        let metadata: Vec<(String, String)> = meta_str
            .trim()
            .split(';')
            .filter_map(|kv| {
                kv.split_once('=')
                    .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            })
            .collect();
        let get = |k: &str| -> Result<f64> {
            metadata
                .iter()
                .find(|(key, _)| key == k)
                .and_then(|(_, v)| v.parse().ok())
                .ok_or_else(|| Error::Format(format!("metadata field {k} missing")))
        };
        let gamma_db = (get("gamma_db_min")?, get("gamma_db_max")?);
        let body: String = lines.collect::<Vec<_>>().join("\n");
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let mut rows: Vec<(usize, [f64; 5])> = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() != 6 {
                return Err(Error::Format("epsilon model rows need 6 fields".into()));
            }
            let n: usize = rec[0].trim().parse().map_err(|_| Error::Format("bad N".into()))?;
            let mut p = [0.0; 5];
            for j in 0..5 {
                p[j] = rec[j + 1]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Format("bad coefficient".into()))?;
            }
            rows.push((n, p));
        }
        rows.sort_by_key(|r| r.0);
        if rows.is_empty() || rows.windows(2).any(|w| w[1].0 != w[0].0 + 1) {
            return Err(Error::Format("epsilon model needs a contiguous N range".into()));
        }
        let mut m = Self::new(rows[0].0, rows.into_iter().map(|r| r.1).collect(), gamma_db)?;
        m.metadata = metadata;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// `sqrt(f(N, gamma) M E + M sigma^2)`.
pub fn epsilon_opt(model: &EpsilonModel, n: usize, gamma: f64, m: usize, e_avg: f64, noise_var: f64) -> Result<f64> {
    let f = model.f(n, gamma)?;
    Ok((f * m as f64 * e_avg.max(0.0) + m as f64 * noise_var.max(0.0)).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> EpsilonModel {
        // log10 f = -0.1 gamma_db + 0.01 N-dependent offset
        let coeffs = (2..=11).map(|n| [0.05 * n as f64, -0.1, 0.0, 0.0, 0.0]).collect();
        EpsilonModel::new(2, coeffs, (2.0, 21.0)).unwrap()
    }

    #[test]
    fn zero_model_is_noise_only() {
        let e = epsilon_opt(&EpsilonModel::zero(), 4, 10.0, 6, 3.0, 0.5).unwrap();
        assert!((e - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn extrapolation_rules() {
        let m = toy();
        let gamma = 10f64.powf(0.8);
        let f = |n| m.f(n, gamma).unwrap();
        assert!((f(1) - (2.0 * f(2) - f(3)).max(0.0)).abs() < 1e-15);
        let want13 = 3.0 * f(11) - 2.0 * f(10);
        assert!((f(13) - want13).abs() < 1e-12);
        let want12 = 2.0 * f(11) - f(10);
        assert!((f(12) - want12).abs() < 1e-12);
        assert!(m.f(0, 1.0).is_err());
    }

    #[test]
    fn gamma_is_clamped_to_the_fit_range() {
        let m = toy();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs();
        assert!(close(m.f(3, 1e-9).unwrap(), m.f(3, 10f64.powf(0.2)).unwrap()));
        assert!(close(m.f(3, 0.0).unwrap(), m.f(3, 10f64.powf(0.2)).unwrap()));
        assert!(close(m.f(3, 1e9).unwrap(), m.f(3, 10f64.powf(2.1)).unwrap()));
    }

    #[test]
    fn csv_roundtrip() {
        let mut m = toy();
        m.metadata.push(("trials".into(), "7".into()));
        let back = EpsilonModel::parse(&m.to_csv()).unwrap();
        assert_eq!(back.n_range(), (2, 11));
        for n in 2..=11 {
            let (a, b) = (m.coefficients(n).unwrap(), back.coefficients(n).unwrap());
            for j in 0..5 {
                assert!((a[j] - b[j]).abs() <= 1e-12 * a[j].abs().max(1.0));
            }
        }
        assert!(back.metadata.iter().any(|(k, v)| k == "trials" && v == "7"));
        assert!(EpsilonModel::parse("N,P0\n2,1").is_err());
    }

    #[test]
    fn shipped_model_loads() {
        let m = EpsilonModel::shipped();
        let (lo, hi) = m.n_range();
        assert!(lo <= 2 && hi >= 3);
    }
}
