//! Desk-scale benchmark scene: tiled class regions, smooth per-class
//! spectra, strong class-independent nuisance factors and sensor noise.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::config::SyntheticSpec;
use crate::data::FeatureMatrix;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub cube: FeatureMatrix,
    pub labels: Vec<usize>,
    pub width: usize,
    pub height: usize,
}

/// Sum of a few Gaussian bumps over the band axis.
fn bumps(bands: usize, count: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    let mut v = DVector::zeros(bands);
    let b = bands as f64;
    for _ in 0..count {
        let center = rng.random_range(0.0..b);
        let width = rng.random_range(0.04 * b..0.12 * b).max(1.0);
        let amp = rng.random_range(0.5..1.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        for i in 0..bands {
            let t = (i as f64 - center) / width;
            v[i] += amp * (-0.5 * t * t).exp();
        }
    }
    v
}

/// Class id (1-based) per pixel. Tiles of side `blob` are dealt to classes
/// round-robin in shuffled order, so every class gets an equal share of
/// tiles (up to one).
pub fn tile_labels(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let tw = spec.width.div_ceil(spec.blob);
    let th = spec.height.div_ceil(spec.blob);
    let mut order: Vec<usize> = (0..tw * th).collect();
    order.shuffle(rng);
    let mut class_of_tile = vec![0; tw * th];
    for (rank, &t) in order.iter().enumerate() {
        class_of_tile[t] = rank % spec.n_classes + 1;
    }
    let mut labels = Vec::with_capacity(spec.width * spec.height);
    for r in 0..spec.height {
        for c in 0..spec.width {
            labels.push(class_of_tile[(r / spec.blob) * tw + c / spec.blob]);
        }
    }
    labels
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let labels = tile_labels(spec, &mut rng);
    let bands = spec.bands;

    let base = DVector::from_fn(bands, |i, _| {
        let t = i as f64 / bands as f64;
        1.0 + 0.3 * (std::f64::consts::PI * t).sin()
    });
    let signatures: Vec<DVector<f64>> = (0..spec.n_classes)
        .map(|_| &base + bumps(bands, 3, &mut rng) * spec.separation)
        .collect();
    let nuisance_dirs: Vec<DVector<f64>> = (0..spec.nuisance_dims)
        .map(|_| {
            let v = bumps(bands, 2, &mut rng);
            let n = v.norm();
            if n > 0.0 { v / n } else { v }
        })
        .collect();

    let noise = Normal::new(0.0, spec.noise.max(0.0)).expect("finite std");
    let n = spec.width * spec.height;
    let mut x = DMatrix::zeros(bands, n);
    for p in 0..n {
        let g: f64 = StandardNormal.sample(&mut rng);
        let illum = (1.0 + spec.illumination * g).max(0.05);
        let mut col = &signatures[labels[p] - 1] * illum;
        for u in &nuisance_dirs {
            let z: f64 = StandardNormal.sample(&mut rng);
            col.axpy(spec.nuisance * z, u, 1.0);
        }
        for i in 0..bands {
            col[i] += noise.sample(&mut rng);
        }
        x.set_column(p, &col);
    }
    Ok(SyntheticScene {
        cube: FeatureMatrix::pixel(x)?,
        labels,
        width: spec.width,
        height: spec.height,
    })
}
