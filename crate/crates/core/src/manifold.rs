//! Initial array manifold for a window: directions toward already known
//! sources plus rough-stage directions that match none of them.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::scene::ArrayGeometry;
use crate::signal::steering_from_direction;

/// Provenance of a manifold column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ColumnTag {
    /// Direction toward an existing track.
    Tracked(u64),
    /// New direction from the rough stage (index into its peak list).
    Candidate(usize),
}

/// Last known directions of the tracked sources.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DirectionBank {
    pub dirs: Vec<Vector3<f64>>,
    pub ids: Vec<u64>,
}

impl DirectionBank {
    pub fn push(&mut self, id: u64, dir: Vector3<f64>) {
        self.ids.push(id);
        self.dirs.push(dir);
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    /// `max |u . U_D|`, 0 for an empty bank.
    pub fn max_alignment(&self, u: &Vector3<f64>) -> f64 {
        self.dirs.iter().map(|d| u.dot(d).abs()).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldEstimate {
    pub columns: CMatrix,
    pub tags: Vec<ColumnTag>,
    pub iterations: usize,
}

impl ManifoldEstimate {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }
}

/// Unit directions from `from` toward each position. Positions coinciding
/// with `from` are skipped; their indices are returned separately.
pub fn directions_to_estimates(positions: &[Vector3<f64>], from: &Vector3<f64>) -> (Vec<Vector3<f64>>, Vec<usize>) {
    let mut dirs = Vec::with_capacity(positions.len());
    let mut skipped = Vec::new();
    for (k, p) in positions.iter().enumerate() {
        let d = p - from;
        let n = d.norm();
        if n > 0.0 {
            dirs.push(d / n);
        } else {
            skipped.push(k);
        }
    }
    (dirs, skipped)
}

/// Indices of the new directions whose largest alignment with the bank is
/// below `xi`.
pub fn gate_new_directions(new_dirs: &[Vector3<f64>], bank: &DirectionBank, xi: f64) -> Result<Vec<usize>> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::Argument(format!("xi must lie in (0, 1), got {xi}")));
    }
    Ok(new_dirs
        .iter()
        .enumerate()
        .filter(|(_, u)| bank.max_alignment(u) < xi)
        .map(|(k, _)| k)
        .collect())
}

/// `exp(j K D^T [U_D, U_3])` with tags `[Tracked.., Candidate..]`.
pub fn initial_manifold(
    bank: &DirectionBank,
    new_dirs: &[(usize, Vector3<f64>)],
    geom: &ArrayGeometry,
) -> Result<ManifoldEstimate> {
    let n = bank.len() + new_dirs.len();
    if n == 0 {
        return Err(Error::EmptyManifold);
    }
    let mut columns = CMatrix::zeros(geom.elements(), n);
    let mut tags = Vec::with_capacity(n);
    for (k, (id, d)) in bank.ids.iter().zip(&bank.dirs).enumerate() {
        columns.set_column(k, &steering_from_direction(geom, d));
        tags.push(ColumnTag::Tracked(*id));
    }
    for (k, (cand, d)) in new_dirs.iter().enumerate() {
        columns.set_column(bank.len() + k, &steering_from_direction(geom, d));
        tags.push(ColumnTag::Candidate(*cand));
    }
    Ok(ManifoldEstimate {
        columns,
        tags,
        iterations: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use crate::signal::steering_vector;

    #[test]
    fn directions_cases() {
        let r = Vector3::new(10.0, 20.0, 300.0);
        let (d, skipped) = directions_to_estimates(
            &[r + Vector3::new(0.0, 0.0, -100.0), r + Vector3::new(3.0, 4.0, 0.0), r],
            &r,
        );
        assert!((d[0] - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-15);
        assert!((d[1] - Vector3::new(0.6, 0.8, 0.0)).norm() < 1e-15);
        assert_eq!(skipped, vec![2]);
    }

    #[test]
    fn gating_cases() {
        let xi = 10f64.to_radians().cos();
        let mut bank = DirectionBank::default();
        assert_eq!(
            gate_new_directions(&[Vector3::x(), Vector3::y()], &bank, xi).unwrap(),
            vec![0, 1]
        );
        bank.push(1, Vector3::z());
        assert_eq!(
            gate_new_directions(&[Vector3::x(), Vector3::z(), -Vector3::z()], &bank, xi).unwrap(),
            vec![0]
        );
        assert!(gate_new_directions(&[], &bank, 1.0).is_err());
    }

    #[test]
    fn manifold_columns_are_steering_vectors() {
        let geom = ArrayGeometry::uca(6, 0.2, 0.5e9).unwrap();
        let mut bank = DirectionBank::default();
        bank.push(4, Vector3::new(0.0, 0.0, -1.0));
        bank.push(9, crate::signal::direction(2.0, 1.0));
        let a = initial_manifold(&bank, &[(0, crate::signal::direction(2.5, 4.0))], &geom).unwrap();
        assert_eq!(
            a.tags,
            vec![ColumnTag::Tracked(4), ColumnTag::Tracked(9), ColumnTag::Candidate(0)]
        );
        assert!(a
            .columns
            .column(0)
            .iter()
            .all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
        assert!((a.columns.column(2) - steering_vector(&geom, 2.5, 4.0)).norm() < 1e-12);
        assert!(a.columns.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
        assert!(matches!(
            initial_manifold(&DirectionBank::default(), &[], &geom),
            Err(Error::EmptyManifold)
        ));
    }
}
