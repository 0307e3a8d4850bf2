//! Spectral kNN graphs, the superpixel alignment graph and the fused
//! two-stream Laplacian.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{JpsaError, Result};
use crate::linalg::col_dist2;

const SYMMETRY_TOL: f64 = 1e-10;

/// Square sparse matrix in coordinate form. Entries are kept sorted by
/// `(row, col)` with no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, entries: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            entries: (0..n).map(|i| (i, i, 1.0)).collect(),
        }
    }

    /// Build from triplets; duplicates are summed, explicit zeros dropped.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, w) in triplets {
            if i >= n || j >= n {
                return Err(JpsaError::input(format!("entry ({i}, {j}) outside {n}x{n}")));
            }
            *map.entry((i, j)).or_insert(0.0) += w;
        }
        Ok(Self::from_map(n, map))
    }

    fn from_map(n: usize, map: BTreeMap<(usize, usize), f64>) -> Self {
        let entries = map
            .into_iter()
            .filter(|&(_, w)| w != 0.0)
            .map(|((i, j), w)| (i, j, w))
            .collect();
        Self { n, entries }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(JpsaError::input(format!("matrix {}x{} is not square", m.nrows(), m.ncols())));
        }
        let n = m.nrows();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if m[(i, j)] != 0.0 {
                    entries.push((i, j, m[(i, j)]));
                }
            }
        }
        Ok(Self { n, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries
            .binary_search_by(|&(r, c, _)| (r, c).cmp(&(i, j)))
            .map(|k| self.entries[k].2)
            .unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j, w) in &self.entries {
            m[(i, j)] = w;
        }
        m
    }

    pub fn row_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for &(i, _, w) in &self.entries {
            s[i] += w;
        }
        s
    }

    pub fn transpose(&self) -> Self {
        let map = self.entries.iter().map(|&(i, j, w)| ((j, i), w)).collect();
        Self::from_map(self.n, map)
    }

    /// Largest `|w_ij - w_ji|` over all stored entries.
    pub fn asymmetry(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(i, j, w)| (w - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn min_entry(&self) -> f64 {
        self.entries.iter().map(|e| e.2).fold(f64::INFINITY, f64::min)
    }

    /// `X · self` for a dense `X` with `n` columns.
    pub fn left_mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        assert_eq!(x.ncols(), self.n, "left_mul shape mismatch");
        let mut out = DMatrix::zeros(x.nrows(), self.n);
        for &(i, j, w) in &self.entries {
            let src = x.column(i);
            let mut dst = out.column_mut(j);
            dst.axpy(w, &src, 1.0);
        }
        out
    }

    /// `X · self · Xᵀ`.
    pub fn sandwich(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let xl = self.left_mul(x);
        let s = xl * x.transpose();
        (&s + s.transpose()) * 0.5
    }

    /// Coordinate-list text dump: one `i j w` line per entry, sorted.
    pub fn to_coo_text(&self) -> String {
        let mut out = String::new();
        for &(i, j, w) in &self.entries {
            let _ = writeln!(out, "{i} {j} {w}");
        }
        out
    }
}

/// Symmetric kNN graph with heat-kernel weights over the columns of `feats`.
///
/// Each column connects to its `k` Euclidean-nearest other columns (ties
/// broken by lower index) with weight `exp(-‖xᵢ-xⱼ‖²/(2σ²))`. The directed
/// graph is symmetrized by elementwise max; the diagonal is zero.
pub fn knn_heat_graph(feats: &DMatrix<f64>, k: usize, sigma: f64) -> Result<SparseMatrix> {
    let n = feats.ncols();
    if k >= n {
        return Err(JpsaError::input(format!("k = {k} must be below sample count {n}")));
    }
    if !(sigma > 0.0) {
        return Err(JpsaError::input(format!("sigma must be positive, got {sigma}")));
    }
    let denom = 2.0 * sigma * sigma;
    let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        cand.extend((0..n).filter(|&j| j != i).map(|j| (col_dist2(feats, i, feats, j), j)));
        cand.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(d2, j) in &cand[..k] {
            let w = (-d2 / denom).exp();
            for key in [(i, j), (j, i)] {
                let e = map.entry(key).or_insert(0.0);
                *e = e.max(w);
            }
        }
    }
    Ok(SparseMatrix::from_map(n, map))
}

/// Binary membership graph: `W[i][j] = 1` iff columns `i` and `j` lie in the
/// same segment (self-pairs included).
pub fn alignment_graph(segment_of: &[usize]) -> SparseMatrix {
    let n = segment_of.len();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &s) in segment_of.iter().enumerate() {
        groups.entry(s).or_default().push(i);
    }
    let mut entries = Vec::new();
    for members in groups.values() {
        for &i in members {
            for &j in members {
                entries.push((i, j, 1.0));
            }
        }
    }
    entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    SparseMatrix { n, entries }
}

/// `L = D − W` with `D = diag(row sums)`.
pub fn laplacian(w: &SparseMatrix) -> Result<SparseMatrix> {
    if w.nnz() > 0 && w.min_entry() < 0.0 {
        return Err(JpsaError::input(format!("negative weight {}", w.min_entry())));
    }
    let asym = w.asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(JpsaError::input(format!("weights asymmetric by {asym:e}")));
    }
    let deg = w.row_sums();
    let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for &(i, j, v) in w.entries() {
        *map.entry((i, j)).or_insert(0.0) -= v;
    }
    for (i, d) in deg.into_iter().enumerate() {
        *map.entry((i, i)).or_insert(0.0) += d;
    }
    Ok(SparseMatrix::from_map(w.n(), map))
}

/// The three adjacency blocks plus the fused `2n×2n` graph and its Laplacian.
#[derive(Debug, Clone)]
pub struct GraphBundle {
    pub wp: SparseMatrix,
    pub wsp: SparseMatrix,
    pub wa: SparseMatrix,
    pub wf: SparseMatrix,
    pub degree: Vec<f64>,
    pub lf: SparseMatrix,
}

impl GraphBundle {
    pub fn n_pixels(&self) -> usize {
        self.wp.n()
    }

    pub fn degree_matrix(&self) -> SparseMatrix {
        SparseMatrix {
            n: self.degree.len(),
            entries: self
                .degree
                .iter()
                .enumerate()
                .filter(|(_, &d)| d != 0.0)
                .map(|(i, &d)| (i, i, d))
                .collect(),
        }
    }
}

/// Assemble `W^f = [[Wᵖ, Wᵃ], [Wᵃ, Wˢᵖ]]` and `L^f = D^f − W^f`.
pub fn assemble_fused(wp: SparseMatrix, wsp: SparseMatrix, wa: SparseMatrix) -> Result<GraphBundle> {
    let n = wp.n();
    if wsp.n() != n || wa.n() != n {
        return Err(JpsaError::input(format!(
            "block sizes differ: wp {n}, wsp {}, wa {}",
            wsp.n(),
            wa.n()
        )));
    }
    for (name, block) in [("wp", &wp), ("wsp", &wsp), ("wa", &wa)] {
        let asym = block.asymmetry();
        if asym > SYMMETRY_TOL {
            return Err(JpsaError::input(format!("{name} asymmetric by {asym:e}")));
        }
        if block.nnz() > 0 && block.min_entry() < 0.0 {
            return Err(JpsaError::input(format!("{name} has a negative weight")));
        }
    }
    let mut trip = Vec::with_capacity(wp.nnz() + wsp.nnz() + 2 * wa.nnz());
    trip.extend(wp.entries().iter().copied());
    trip.extend(wa.entries().iter().map(|&(i, j, w)| (i, j + n, w)));
    trip.extend(wa.entries().iter().map(|&(i, j, w)| (i + n, j, w)));
    trip.extend(wsp.entries().iter().map(|&(i, j, w)| (i + n, j + n, w)));
    let wf = SparseMatrix::from_triplets(2 * n, trip)?;
    let degree = wf.row_sums();
    let lf = laplacian(&wf)?;
    Ok(GraphBundle {
        wp,
        wsp,
        wa,
        wf,
        degree,
        lf,
    })
}

/// Build the full fused graph from a pixel block, its superpixel stream and
/// the segment id of every column.
pub fn build_fused_graph(
    pixels: &DMatrix<f64>,
    stream: &DMatrix<f64>,
    segment_of: &[usize],
    k: usize,
    sigma: f64,
) -> Result<GraphBundle> {
    if pixels.shape() != stream.shape() || segment_of.len() != pixels.ncols() {
        return Err(JpsaError::input(format!(
            "graph inputs disagree: pixels {:?}, stream {:?}, {} segment ids",
            pixels.shape(),
            stream.shape(),
            segment_of.len()
        )));
    }
    let wp = knn_heat_graph(pixels, k, sigma)?;
    let wsp = knn_heat_graph(stream, k, sigma)?;
    let wa = alignment_graph(segment_of);
    assemble_fused(wp, wsp, wa)
}
