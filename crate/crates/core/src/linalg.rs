//! Small dense helpers shared by the solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{JpsaError, Result};

/// Ridge added to every solved system.
pub const SOLVE_RIDGE: f64 = 1e-10;

/// Solve `sys · Z = rhs` for symmetric positive definite `sys`.
///
/// A ridge of [`SOLVE_RIDGE`] is added to the diagonal. Falls back to LU when
/// the Cholesky factorization fails (e.g. an indefinite Laplacian term from
/// rounding).
pub fn solve_spd(sys: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sys.nrows();
    if sys.ncols() != n || rhs.nrows() != n {
        return Err(JpsaError::Internal(format!(
            "solve shape mismatch: system {}x{}, rhs {}x{}",
            sys.nrows(),
            sys.ncols(),
            rhs.nrows(),
            rhs.ncols()
        )));
    }
    let mut a = sys.clone();
    for i in 0..n {
        a[(i, i)] += SOLVE_RIDGE;
    }
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(rhs));
    }
    let lu = a.clone().lu();
    match lu.solve(rhs) {
        Some(z) if z.iter().all(|v| v.is_finite()) => Ok(z),
        _ => Err(JpsaError::numerical(format!(
            "singular {n}x{n} system (condition estimate {:.3e})",
            condition_estimate(&a)
        ))),
    }
}

/// Compute `numer · sys⁻¹` for symmetric `sys` without forming the inverse.
pub fn solve_spd_right(numer: &DMatrix<f64>, sys: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(solve_spd(sys, &numer.transpose())?.transpose())
}

/// Ratio of extreme absolute eigenvalues of the symmetric part of `a`.
pub fn condition_estimate(a: &DMatrix<f64>) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    let ev = SymmetricEigen::new(sym).eigenvalues;
    let max = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted ascending.
/// Eigenvectors are the columns of the returned matrix.
pub fn sym_eigen_ascending(a: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// Flip each row so that its largest-magnitude entry is positive.
pub fn sign_normalize_rows(m: &mut DMatrix<f64>) {
    for r in 0..m.nrows() {
        let mut best = 0usize;
        for c in 1..m.ncols() {
            if m[(r, c)].abs() > m[(r, best)].abs() {
                best = c;
            }
        }
        if m.ncols() > 0 && m[(r, best)] < 0.0 {
            m.row_mut(r).neg_mut();
        }
    }
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Squared Euclidean distance between column `i` of `a` and column `j` of `b`.
pub fn col_dist2(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    a.column(i)
        .iter()
        .zip(b.column(j).iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Select a subset of columns in the given order.
pub fn select_columns(m: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}
