//! Linear embeddings used as a baseline (PCA) and as the per-layer
//! initializer (LPP).

use nalgebra::{DMatrix, DVector};

use crate::error::{JpsaError, Result};
use crate::graph::SparseMatrix;
use crate::linalg::{sign_normalize_rows, sym_eigen_ascending};

/// Ridge added to `X D Xᵀ` before the generalized eigensolve.
pub const LPP_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    Pca,
    Lpp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearEmbedding {
    /// `d_out × d_in`, one component per row.
    pub projection: DMatrix<f64>,
    pub kind: EmbeddingKind,
    pub eigenvalues: Vec<f64>,
    /// Column mean subtracted before projecting (PCA only).
    pub mean: Option<DVector<f64>>,
}

impl LinearEmbedding {
    pub fn transform(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.mean {
            Some(mu) => {
                let mut centered = x.clone();
                for mut col in centered.column_iter_mut() {
                    col -= mu;
                }
                &self.projection * centered
            }
            None => &self.projection * x,
        }
    }
}

fn column_mean(x: &DMatrix<f64>) -> DVector<f64> {
    let n = x.ncols().max(1) as f64;
    x.column_sum() / n
}

/// Principal components of the mean-centered columns of `x`.
///
/// Rows are the top `d_out` eigenvectors of the sample covariance (normalized
/// by `n − 1`), eigenvalues nonincreasing.
pub fn pca_fit(x: &DMatrix<f64>, d_out: usize) -> Result<LinearEmbedding> {
    let (d_in, n) = x.shape();
    if d_out == 0 || d_out > d_in.min(n) {
        return Err(JpsaError::input(format!(
            "PCA output dimension {d_out} must lie in 1..={} (d_in = {d_in}, n = {n})",
            d_in.min(n)
        )));
    }
    let mean = column_mean(x);
    let mut xc = x.clone();
    for mut col in xc.column_iter_mut() {
        col -= &mean;
    }
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let cov = (&xc * xc.transpose()) / denom;
    let (vals, vecs) = sym_eigen_ascending(&cov);
    let mut projection = DMatrix::zeros(d_out, d_in);
    let mut eigenvalues = Vec::with_capacity(d_out);
    for r in 0..d_out {
        let src = d_in - 1 - r;
        projection.set_row(r, &vecs.column(src).transpose());
        eigenvalues.push(vals[src]);
    }
    sign_normalize_rows(&mut projection);
    Ok(LinearEmbedding {
        projection,
        kind: EmbeddingKind::Pca,
        eigenvalues,
        mean: Some(mean),
    })
}

/// Numerical rank of `x` from the spectrum of `x xᵀ`.
pub fn numerical_rank(x: &DMatrix<f64>) -> usize {
    if x.is_empty() {
        return 0;
    }
    let gram = x * x.transpose();
    let (vals, _) = sym_eigen_ascending(&gram);
    let max = vals.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 {
        return 0;
    }
    let tol = (x.nrows().max(x.ncols()) as f64 * f64::EPSILON).sqrt() * max.sqrt();
    vals.iter().filter(|&&v| v.max(0.0).sqrt() > tol).count()
}

/// Locality preserving projections.
///
/// Solves `X L Xᵀ a = λ (X D Xᵀ + ridge·I) a` and keeps the `d_out` smallest
/// eigenvalues. `degree` holds the diagonal of `D`.
pub fn lpp_fit(
    x: &DMatrix<f64>,
    lap: &SparseMatrix,
    degree: &[f64],
    d_out: usize,
) -> Result<LinearEmbedding> {
    let (d_in, n) = x.shape();
    if lap.n() != n || degree.len() != n {
        return Err(JpsaError::input(format!(
            "LPP shape mismatch: {n} samples, Laplacian {}x{0}, degree {}",
            lap.n(),
            degree.len()
        )));
    }
    if degree.iter().any(|&d| !(d > 0.0)) {
        return Err(JpsaError::input("LPP needs a strictly positive degree for every sample"));
    }
    let rank = numerical_rank(x);
    if d_out == 0 || d_out > rank {
        return Err(JpsaError::input(format!(
            "LPP output dimension {d_out} exceeds achievable rank {rank}"
        )));
    }
    let a = lap.sandwich(x);
    let mut xd = x.clone();
    for (j, mut col) in xd.column_iter_mut().enumerate() {
        col *= degree[j];
    }
    let mut b = &xd * x.transpose();
    b = (&b + b.transpose()) * 0.5;
    for i in 0..d_in {
        b[(i, i)] += LPP_RIDGE;
    }
    let chol = b
        .cholesky()
        .ok_or_else(|| JpsaError::numerical("X D Xᵀ is not positive definite"))?;
    let l = chol.l();
    // M = L⁻¹ A L⁻ᵀ
    let linv_a = l
        .solve_lower_triangular(&a)
        .ok_or_else(|| JpsaError::numerical("triangular solve failed"))?;
    let m = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or_else(|| JpsaError::numerical("triangular solve failed"))?;
    let (vals, vecs) = sym_eigen_ascending(&m);
    let lt = l.transpose();
    let mut projection = DMatrix::zeros(d_out, d_in);
    let mut eigenvalues = Vec::with_capacity(d_out);
    for r in 0..d_out {
        let y = vecs.column(r).into_owned();
        let av = lt
            .solve_upper_triangular(&y)
            .ok_or_else(|| JpsaError::numerical("triangular solve failed"))?;
        projection.set_row(r, &av.transpose());
        eigenvalues.push(vals[r].max(0.0));
    }
    if projection.iter().any(|v| !v.is_finite()) {
        return Err(JpsaError::numerical("LPP produced non-finite components"));
    }
    sign_normalize_rows(&mut projection);
    Ok(LinearEmbedding {
        projection,
        kind: EmbeddingKind::Lpp,
        eigenvalues,
        mean: None,
    })
}
