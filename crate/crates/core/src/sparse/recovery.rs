//! L0 sparse coding by exhaustive least-squares search over column subsets.

use crate::linalg::{column_basis, pinv, CMatrix, CVector, C64};

/// One candidate support with its precomputed projector pieces.
#[derive(Debug, Clone)]
struct Combo {
    idx: Vec<usize>,
    /// Orthonormal basis of the selected columns.
    basis: CMatrix,
    pinv: CMatrix,
}

/// Solver bound to one dictionary. Every support of size `1..=min(L_max, N)`
/// is enumerated once, in lexicographic order within each size.
#[derive(Debug, Clone)]
pub struct SparseSolver {
    levels: Vec<Vec<Combo>>,
    atoms: usize,
    rows: usize,
}

/// Sparse code of one column.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseColumn {
    /// Selected atoms, increasing.
    pub support: Vec<usize>,
    pub coefficients: Vec<C64>,
    pub residual: f64,
}

/// Best support of one size for one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelBest {
    pub support: Vec<usize>,
    pub coefficients: Vec<C64>,
    pub residual: f64,
}

pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut c: Vec<usize> = (0..k).collect();
    loop {
        out.push(c.clone());
        let mut i = k;
        while i > 0 && c[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        c[i - 1] += 1;
        for j in i..k {
            c[j] = c[j - 1] + 1;
        }
    }
}

impl SparseSolver {
    pub fn new(a: &CMatrix, l_max: usize) -> Self {
        let n = a.ncols();
        let levels = (1..=l_max.min(n))
            .map(|j| {
                combinations(n, j)
                    .into_iter()
                    .map(|idx| {
                        let sub = a.select_columns(idx.iter());
                        Combo {
                            basis: column_basis(&sub),
                            pinv: pinv(&sub),
                            idx,
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            levels,
            atoms: n,
            rows: a.nrows(),
        }
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn max_level(&self) -> usize {
        self.levels.len()
    }

    /// Index of the combo at `level` (1-based) with the smallest projection
    /// residual, found as the largest captured energy `||Q^H y||`. The first
    /// enumerated wins ties.
    fn best_combo(&self, level: usize, y: &CVector) -> &Combo {
        let mut best = &self.levels[level - 1][0];
        let mut best_energy = f64::NEG_INFINITY;
        for c in &self.levels[level - 1] {
            let mut e = 0.0;
            for k in 0..c.basis.ncols() {
                e += c.basis.column(k).dotc(y).norm_sqr();
            }
            if e > best_energy {
                best_energy = e;
                best = c;
            }
        }
        best
    }

    fn finish(&self, c: &Combo, y: &CVector) -> LevelBest {
        let coef = &c.pinv * y;
        let r = y - &c.basis * (c.basis.adjoint() * y);
        LevelBest {
            support: c.idx.clone(),
            coefficients: coef.iter().cloned().collect(),
            residual: r.norm(),
        }
    }

    /// Best support for each level `1..=max_level`.
    pub fn level_bests(&self, y: &CVector) -> Vec<LevelBest> {
        (1..=self.max_level())
            .map(|j| self.finish(self.best_combo(j, y), y))
            .collect()
    }

    /// Sparsest support whose least-squares residual is within `eps`,
    /// searched level by level; falls back to the best `L_max` support.
    pub fn solve(&self, y: &CVector, eps: f64) -> SparseColumn {
        debug_assert_eq!(y.len(), self.rows);
        let norm = y.norm();
        if norm <= eps || self.levels.is_empty() {
            return SparseColumn {
                support: Vec::new(),
                coefficients: Vec::new(),
                residual: norm,
            };
        }
        let mut last = None;
        for j in 1..=self.max_level() {
            let b = self.finish(self.best_combo(j, y), y);
            let done = b.residual <= eps;
            last = Some(b);
            if done {
                break;
            }
        }
        let b = last.expect("at least one level");
        SparseColumn {
            support: b.support,
            coefficients: b.coefficients,
            residual: b.residual,
        }
    }
}

/// Single-column convenience wrapper.
pub fn sparse_recover(y: &CVector, a: &CMatrix, eps: f64, l_max: usize) -> SparseColumn {
    SparseSolver::new(a, l_max).solve(y, eps)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseEstimate {
    /// `N x G` code matrix.
    pub matrix: CMatrix,
    pub supports: Vec<Vec<usize>>,
}

/// Column-wise sparse coding of `block` with one shared threshold.
pub fn recover_matrix(block: &CMatrix, a: &CMatrix, eps: f64, l_max: usize) -> SparseEstimate {
    let solver = SparseSolver::new(a, l_max);
    recover_with(&solver, block, eps)
}

pub fn recover_with(solver: &SparseSolver, block: &CMatrix, eps: f64) -> SparseEstimate {
    let g = block.ncols();
    let mut matrix = CMatrix::zeros(solver.atoms(), g);
    let mut supports = Vec::with_capacity(g);
    for c in 0..g {
        let y: CVector = block.column(c).into_owned();
        let col = solver.solve(&y, eps);
        for (&i, &v) in col.support.iter().zip(&col.coefficients) {
            matrix[(i, c)] = v;
        }
        supports.push(col.support);
    }
    SparseEstimate { matrix, supports }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, complex_normal, Purpose};

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(
            combinations(4, 2),
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert!(combinations(2, 3).is_empty());
        assert_eq!(combinations(11, 3).len(), 165);
    }

    #[test]
    fn zero_observation_has_empty_support() {
        let a = CMatrix::identity(3, 3);
        let s = sparse_recover(&CVector::zeros(3), &a, 0.0, 2);
        assert!(s.support.is_empty());
    }

    #[test]
    fn identity_dictionary() {
        let a = CMatrix::identity(3, 3);
        let y = CVector::from_vec(vec![C64::new(0.0, 0.0), C64::new(5.0, 0.0), C64::new(0.0, 0.0)]);
        let s = sparse_recover(&y, &a, 1e-6, 3);
        assert_eq!(s.support, vec![1]);
        assert!((s.coefficients[0] - C64::new(5.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn falls_back_to_max_level() {
        let a = CMatrix::identity(3, 3);
        let y = CVector::from_element(3, C64::new(1.0, 0.0));
        let s = sparse_recover(&y, &a, 1e-9, 2);
        assert_eq!(s.support.len(), 2);
        assert!((s.residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planted_support_is_recovered() {
        let mut r = rng::stream(3, Purpose::Scenario, 0, 0);
        let a = CMatrix::from_fn(4, 6, |_, _| complex_normal(&mut r, 1.0));
        let solver = SparseSolver::new(&a, 2);
        let y = a.column(1) * C64::new(0.7, -0.2) + a.column(4) * C64::new(-1.1, 0.3);
        let s = solver.solve(&y, 1e-9 * y.norm());
        assert_eq!(s.support, vec![1, 4]);
        assert!((s.coefficients[0] - C64::new(0.7, -0.2)).norm() < 1e-9);
    }

    #[test]
    fn column_permutation_commutes() {
        let mut r = rng::stream(5, Purpose::Scenario, 0, 0);
        let a = CMatrix::from_fn(4, 5, |_, _| complex_normal(&mut r, 1.0));
        let block = CMatrix::from_fn(4, 6, |_, _| complex_normal(&mut r, 1.0));
        let perm = [3, 0, 5, 1, 4, 2];
        let e1 = recover_matrix(&block, &a, 0.5, 2);
        let e2 = recover_matrix(&block.select_columns(perm.iter()), &a, 0.5, 2);
        for (k, &p) in perm.iter().enumerate() {
            assert_eq!(e2.matrix.column(k), e1.matrix.column(p));
        }
    }
}
