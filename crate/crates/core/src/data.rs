//! Core value types: feature matrices, one-hot targets, splits and
//! hyperparameters.
//!
//! Features are stored one column per sample; every projection multiplies on
//! the left. Class ids are 1-based at the API boundary (0 means unlabeled) and
//! become 0-based row indices inside [`OneHotLabels`].

use nalgebra::DMatrix;

use crate::error::{JpsaError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    Pixel,
    SuperpixelStream,
    /// `[X  Xˢᵖ]`: pixel block followed by a superpixel block of equal width.
    TwoStream,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: DMatrix<f64>,
    kind: StreamKind,
}

impl FeatureMatrix {
    pub fn new(values: DMatrix<f64>, kind: StreamKind) -> Result<Self> {
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(JpsaError::input(format!(
                "non-finite feature value at flat index {pos}"
            )));
        }
        if kind == StreamKind::TwoStream && values.ncols() % 2 != 0 {
            return Err(JpsaError::input(format!(
                "two-stream matrix needs an even column count, got {}",
                values.ncols()
            )));
        }
        Ok(Self { values, kind })
    }

    pub fn pixel(values: DMatrix<f64>) -> Result<Self> {
        Self::new(values, StreamKind::Pixel)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn kind(&self) -> StreamKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.values.ncols()
    }

    /// Number of pixels represented: half the columns for a two-stream matrix.
    pub fn n_pixels(&self) -> usize {
        match self.kind {
            StreamKind::TwoStream => self.values.ncols() / 2,
            _ => self.values.ncols(),
        }
    }

    /// Columns `[0, n)` of a two-stream matrix (or the whole matrix otherwise).
    pub fn pixel_block(&self) -> DMatrix<f64> {
        let n = self.n_pixels();
        self.values.columns(0, n).into_owned()
    }

    /// Columns `[n, 2n)` of a two-stream matrix.
    pub fn stream_block(&self) -> Result<DMatrix<f64>> {
        if self.kind != StreamKind::TwoStream {
            return Err(JpsaError::input("stream_block requires a two-stream matrix"));
        }
        let n = self.n_pixels();
        Ok(self.values.columns(n, n).into_owned())
    }
}

/// Concatenate a pixel matrix and its superpixel stream column-wise.
pub fn two_stream_concat(x: &FeatureMatrix, xsp: &FeatureMatrix) -> Result<FeatureMatrix> {
    if x.kind() != StreamKind::Pixel || xsp.kind() != StreamKind::SuperpixelStream {
        return Err(JpsaError::input(format!(
            "two_stream_concat expects (pixel, superpixel_stream), got ({:?}, {:?})",
            x.kind(),
            xsp.kind()
        )));
    }
    let (a, b) = (x.values(), xsp.values());
    if a.shape() != b.shape() {
        return Err(JpsaError::input(format!(
            "shape mismatch: pixel {:?} vs stream {:?}",
            a.shape(),
            b.shape()
        )));
    }
    let n = a.ncols();
    let mut out = DMatrix::zeros(a.nrows(), 2 * n);
    out.columns_mut(0, n).copy_from(a);
    out.columns_mut(n, n).copy_from(b);
    FeatureMatrix::new(out, StreamKind::TwoStream)
}

/// One-hot class matrix, `L` rows by one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotLabels {
    values: DMatrix<f64>,
    class_names: Vec<String>,
}

impl OneHotLabels {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn n_classes(&self) -> usize {
        self.values.nrows()
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_classes() {
            return Err(JpsaError::input(format!(
                "{} class names for {} classes",
                names.len(),
                self.n_classes()
            )));
        }
        self.class_names = names;
        Ok(self)
    }

    /// `[Y  Y]`, the targets for a two-stream matrix.
    pub fn duplicated(&self) -> DMatrix<f64> {
        let n = self.values.ncols();
        let mut out = DMatrix::zeros(self.values.nrows(), 2 * n);
        out.columns_mut(0, n).copy_from(&self.values);
        out.columns_mut(n, n).copy_from(&self.values);
        out
    }
}

/// Encode 1-based class ids into a one-hot matrix with `n_classes` rows.
pub fn one_hot_encode(labels: &[usize], n_classes: usize) -> Result<OneHotLabels> {
    if n_classes == 0 {
        return Err(JpsaError::input("class count must be positive"));
    }
    let mut values = DMatrix::zeros(n_classes, labels.len());
    for (i, &label) in labels.iter().enumerate() {
        if label == 0 || label > n_classes {
            return Err(JpsaError::input(format!(
                "label {label} at index {i} outside 1..={n_classes}"
            )));
        }
        values[(label - 1, i)] = 1.0;
    }
    let class_names = (1..=n_classes).map(|c| format!("class{c}")).collect();
    Ok(OneHotLabels {
        values,
        class_names,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SampleSplit {
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub unlabeled_indices: Vec<usize>,
}

impl SampleSplit {
    /// Check pairwise disjointness and that every index is below `n_pixels`.
    pub fn validate(&self, n_pixels: usize) -> Result<()> {
        let mut owner = vec![0u8; n_pixels];
        let lists = [
            (1u8, "train", &self.train_indices),
            (2, "test", &self.test_indices),
            (3, "unlabeled", &self.unlabeled_indices),
        ];
        for (tag, name, list) in lists {
            for &i in list.iter() {
                if i >= n_pixels {
                    return Err(JpsaError::input(format!(
                        "{name} index {i} out of range for {n_pixels} pixels"
                    )));
                }
                if owner[i] != 0 {
                    return Err(JpsaError::input(format!(
                        "pixel {i} appears in more than one split list ({name})"
                    )));
                }
                owner[i] = tag;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Graph weight of the layer-wise pre-training problem.
    pub eta: f64,
    pub m: usize,
    pub dims: Vec<usize>,
    pub knn_k: usize,
    pub sigma: f64,
    pub zeta: f64,
    pub max_outer_iters: usize,
    pub superpixel_fraction: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.1,
            gamma: 0.1,
            eta: 0.1,
            m: 2,
            dims: vec![20, 20],
            knn_k: 10,
            sigma: 1.0,
            zeta: 1e-4,
            max_outer_iters: 50,
            superpixel_fraction: 0.10,
        }
    }
}

impl HyperParams {
    /// Uniform dimension `d` over `m` layers, everything else default.
    pub fn with_layers(m: usize, d: usize) -> Self {
        Self {
            m,
            dims: vec![d; m],
            ..Self::default()
        }
    }

    /// Best cell reported for the Indian Pines scene (m = 4, d = 20).
    pub fn preset_indian_pines() -> Self {
        Self::with_layers(4, 20)
    }

    /// Best cell reported for the University of Houston scene (m = 3, d = 30).
    pub fn preset_houston() -> Self {
        Self::with_layers(3, 30)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("eta", self.eta),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(JpsaError::input(format!("{name} must be a nonnegative real, got {v}")));
            }
        }
        if self.m == 0 {
            return Err(JpsaError::input("layer count m must be at least 1"));
        }
        if self.dims.len() != self.m {
            return Err(JpsaError::input(format!(
                "dims has {} entries but m = {}",
                self.dims.len(),
                self.m
            )));
        }
        if let Some(l) = self.dims.iter().position(|&d| d == 0) {
            return Err(JpsaError::input(format!("layer {} has dimension 0", l + 1)));
        }
        if self.knn_k == 0 {
            return Err(JpsaError::input("knn_k must be at least 1"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(JpsaError::input(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.zeta > 0.0 && self.zeta.is_finite()) {
            return Err(JpsaError::input(format!("zeta must be positive, got {}", self.zeta)));
        }
        if !(self.superpixel_fraction > 0.0 && self.superpixel_fraction <= 1.0) {
            return Err(JpsaError::input(format!(
                "superpixel_fraction must lie in (0, 1], got {}",
                self.superpixel_fraction
            )));
        }
        Ok(())
    }
}

/// How the ADMM auxiliaries start out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxInit {
    /// `H = Θ⁰X̃`; `G`, `Q`, `S` zero.
    Zero,
    /// `G = Θ⁰`; `H`, `Q`, `S` all equal to `Θ⁰X̃` (projected onto their sets).
    Consensus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    pub mu0: f64,
    pub mu_max: f64,
    pub rho: f64,
    pub eps: f64,
    pub max_iters: usize,
    pub init: AuxInit,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            mu0: 1e-3,
            mu_max: 1e6,
            rho: 2.0,
            eps: 1e-6,
            max_iters: 500,
            init: AuxInit::Zero,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu0 > 0.0 && self.mu0 <= self.mu_max && self.mu_max.is_finite()) {
            return Err(JpsaError::input(format!(
                "need 0 < mu0 <= mu_max, got mu0 = {}, mu_max = {}",
                self.mu0, self.mu_max
            )));
        }
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return Err(JpsaError::input(format!("rho must exceed 1, got {}", self.rho)));
        }
        if !(self.eps > 0.0) {
            return Err(JpsaError::input(format!("eps must be positive, got {}", self.eps)));
        }
        if self.max_iters == 0 {
            return Err(JpsaError::input("max_iters must be at least 1"));
        }
        Ok(())
    }
}
