//! Small complex linear-algebra helpers shared by the estimation stages.
//!
//! Everything here is a thin layer over nalgebra's SVD and Hermitian
//! eigendecomposition with the cutoff and ordering conventions the rest of
//! the crate relies on.

use nalgebra::{Complex, DMatrix, DVector, RowDVector, SymmetricEigen};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;
pub type CRow = RowDVector<C64>;

/// Relative singular-value cutoff used by every pseudo-inverse in the crate.
pub const PINV_RCOND: f64 = 1e-12;

/// Moore-Penrose pseudo-inverse, discarding singular values below
/// `PINV_RCOND * sigma_max`.
pub fn pinv(m: &CMatrix) -> CMatrix {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return CMatrix::zeros(cols, rows);
    }
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return CMatrix::zeros(cols, rows);
    }
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut out = CMatrix::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= PINV_RCOND * smax {
            continue;
        }
        // out += v_k (1/s) u_k^H
        let inv = 1.0 / s;
        for c in 0..rows {
            let uc = u[(c, k)].conj() * inv;
            for r in 0..cols {
                out[(r, c)] += vt[(k, r)].conj() * uc;
            }
        }
    }
    out
}

/// Orthonormal basis of the column space (numerical rank by `PINV_RCOND`).
pub fn column_basis(m: &CMatrix) -> CMatrix {
    let svd = m.clone().svd(true, false);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let u = svd.u.expect("u requested");
    let keep: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| smax > 0.0 && s > PINV_RCOND * smax)
        .map(|(k, _)| k)
        .collect();
    CMatrix::from_fn(m.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

/// Eigenpairs of a Hermitian matrix, eigenvalues sorted in descending order.
/// Column `k` of the returned matrix belongs to eigenvalue `k`.
pub fn hermitian_eig_desc(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    // Symmetrize so tiny round-off asymmetry never leaks into the solver.
    let h = CMatrix::from_fn(n, n, |r, c| (m[(r, c)] + m[(c, r)].conj()) * 0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Leading singular triplet of `m` as `(u, sigma, sigma * v^H)`.
///
/// `u` is normalized so that its first nonzero entry is real and positive;
/// the returned row absorbs the compensating phase, so the rank-1 product is
/// unchanged. Returns `None` for an all-zero matrix.
pub fn leading_singular(m: &CMatrix) -> Option<(CVector, f64, CRow)> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return None;
    }
    let gram = m * m.adjoint();
    let (vals, vecs) = hermitian_eig_desc(&gram);
    let lambda = vals[0].max(0.0);
    if lambda <= 0.0 {
        return None;
    }
    let mut u: CVector = vecs.column(0).into_owned();
    let norm = u.norm();
    if norm == 0.0 {
        return None;
    }
    u /= C64::new(norm, 0.0);
    rotate_first_real(&mut u);
    let row = u.adjoint() * m;
    Some((u, lambda.sqrt(), row))
}

/// Rotates `v` so that its first entry of modulus above `1e-12` is real and
/// positive.
pub fn rotate_first_real(v: &mut CVector) {
    if let Some(first) = v.iter().find(|z| z.norm() > 1e-12) {
        let phase = first.conj() / first.norm();
        *v *= phase;
    }
}

/// Unit-norm copy of `v` with the phase convention of [`rotate_first_real`].
/// A zero vector is returned unchanged.
pub fn canonical_column(v: &CVector) -> CVector {
    let n = v.norm();
    if n == 0.0 {
        return v.clone();
    }
    let mut u = v / C64::new(n, 0.0);
    rotate_first_real(&mut u);
    u
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}
