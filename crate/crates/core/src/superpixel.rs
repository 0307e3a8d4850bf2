//! SLIC superpixels over a hyperspectral cube and the per-pixel superpixel
//! mean stream.

use std::collections::VecDeque;

use nalgebra::DMatrix;

use crate::data::{FeatureMatrix, StreamKind};
use crate::embed::pca_fit;
use crate::error::{JpsaError, Result};

pub const DEFAULT_COMPACTNESS: f64 = 10.0;
pub const DEFAULT_SLIC_ITERS: usize = 10;
/// Spectra are reduced to this many principal components before clustering.
pub const SLIC_COMPONENTS: usize = 3;
/// Range the first principal component is stretched to, so the compactness
/// scale matches classical SLIC on CIELAB (L ∈ [0, 100]).
const FEATURE_RANGE: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentCenter {
    pub row: f64,
    pub col: f64,
    pub feature_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    /// Segment id per pixel, raster order.
    pub labels: Vec<usize>,
    pub n_segments: usize,
    pub centers: Vec<SegmentCenter>,
    pub width: usize,
    pub height: usize,
}

impl Segmentation {
    pub fn n_pixels(&self) -> usize {
        self.labels.len()
    }

    /// Pixel count of every segment.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.n_segments];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }

    /// Segmentation given directly by ids; ids are compacted to `0..n`.
    pub fn from_labels(labels: &[usize], width: usize, height: usize) -> Result<Self> {
        if labels.len() != width * height {
            return Err(JpsaError::input(format!(
                "{} labels for a {width}x{height} image",
                labels.len()
            )));
        }
        let (labels, n_segments) = compact_ids(labels);
        let centers = spatial_centers(&labels, n_segments, width, &[]);
        Ok(Self {
            labels,
            n_segments,
            centers,
            width,
            height,
        })
    }
}

/// Segment count from the superpixel fraction, at least one.
pub fn segment_count(n_pixels: usize, fraction: f64) -> usize {
    ((fraction * n_pixels as f64).round() as usize).clamp(1, n_pixels.max(1))
}

fn compact_ids(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    (out, map.len())
}

fn spatial_centers(labels: &[usize], n: usize, width: usize, feats: &[Vec<f64>]) -> Vec<SegmentCenter> {
    let nf = feats.len();
    let mut acc = vec![(0.0, 0.0, vec![0.0; nf], 0usize); n];
    for (p, &l) in labels.iter().enumerate() {
        let a = &mut acc[l];
        a.0 += (p / width) as f64;
        a.1 += (p % width) as f64;
        for (f, feat) in feats.iter().enumerate() {
            a.2[f] += feat[p];
        }
        a.3 += 1;
    }
    acc.into_iter()
        .map(|(r, c, f, cnt)| {
            let k = cnt.max(1) as f64;
            SegmentCenter {
                row: r / k,
                col: c / k,
                feature_mean: f.into_iter().map(|v| v / k).collect(),
            }
        })
        .collect()
}

/// Seed grid with exactly `k` seeds: `ny` rows, seeds spread evenly inside
/// each row, positions at cell centers.
fn seed_grid(width: usize, height: usize, k: usize) -> Vec<(f64, f64)> {
    let mut ny = ((k as f64 * height as f64 / width as f64).sqrt().round() as usize).clamp(1, height.min(k));
    while k.div_ceil(ny) > width && ny < height {
        ny += 1;
    }
    let base = k / ny;
    let extra = k % ny;
    let mut seeds = Vec::with_capacity(k);
    for r in 0..ny {
        let in_row = base + usize::from(r < extra);
        let y = (r as f64 + 0.5) * height as f64 / ny as f64 - 0.5;
        for c in 0..in_row {
            let x = (c as f64 + 0.5) * width as f64 / in_row as f64 - 0.5;
            seeds.push((y, x));
        }
    }
    seeds
}

/// Reduced per-pixel features used for clustering, as `f` rows of length n.
fn slic_features(cube: &DMatrix<f64>) -> Result<Vec<Vec<f64>>> {
    let (bands, n) = cube.shape();
    let comps = SLIC_COMPONENTS.min(bands).min(n);
    let pca = pca_fit(cube, comps)?;
    let mut scores = pca.transform(cube);
    let first = scores.row(0);
    let range = first.max() - first.min();
    if range > 0.0 {
        scores *= FEATURE_RANGE / range;
    }
    Ok((0..comps).map(|r| scores.row(r).iter().copied().collect()).collect())
}

/// SLIC segmentation of a `bands × (width·height)` cube in raster order.
///
/// Distance is `D = sqrt(d_feat² + (d_xy/S)²·compactness²)` with
/// `S = sqrt(n_pixels / n_segments)`. Disconnected pieces of a segment are
/// merged into the largest adjacent segment afterwards, so the returned count
/// can differ from `n_segments`.
pub fn slic_segment(
    cube: &FeatureMatrix,
    width: usize,
    height: usize,
    n_segments: usize,
    compactness: f64,
    max_iters: usize,
) -> Result<Segmentation> {
    let n = width * height;
    let values = cube.values();
    if values.ncols() != n {
        return Err(JpsaError::input(format!(
            "cube has {} pixels, expected {width}x{height} = {n}",
            values.ncols()
        )));
    }
    if n_segments == 0 || n_segments > n {
        return Err(JpsaError::input(format!(
            "n_segments = {n_segments} must lie in 1..={n}"
        )));
    }
    let feats = slic_features(values)?;
    let nf = feats.len();
    let step = (n as f64 / n_segments as f64).sqrt();
    let spatial_w = compactness * compactness / (step * step);

    let nearest_pixel = |y: f64, x: f64| -> usize {
        let r = (y.round().max(0.0) as usize).min(height - 1);
        let c = (x.round().max(0.0) as usize).min(width - 1);
        r * width + c
    };
    // (row, col, features)
    let mut centers: Vec<(f64, f64, Vec<f64>)> = seed_grid(width, height, n_segments)
        .into_iter()
        .map(|(y, x)| {
            let p = nearest_pixel(y, x);
            (y, x, feats.iter().map(|f| f[p]).collect())
        })
        .collect();

    let dist2 = |c: &(f64, f64, Vec<f64>), p: usize| -> f64 {
        let (r, col) = ((p / width) as f64, (p % width) as f64);
        let dxy = (r - c.0).powi(2) + (col - c.1).powi(2);
        let df: f64 = (0..nf).map(|f| (feats[f][p] - c.2[f]).powi(2)).sum();
        df + dxy * spatial_w
    };

    let mut assign = vec![usize::MAX; n];
    let reach = (2.0 * step).ceil() as isize;
    for _ in 0..max_iters.max(1) {
        let mut best = vec![f64::INFINITY; n];
        assign.fill(usize::MAX);
        for (k, c) in centers.iter().enumerate() {
            let (cy, cx) = (c.0.round() as isize, c.1.round() as isize);
            let r0 = (cy - reach).max(0) as usize;
            let r1 = ((cy + reach).max(-1) as usize).min(height - 1);
            let c0 = (cx - reach).max(0) as usize;
            let c1 = ((cx + reach).max(-1) as usize).min(width - 1);
            for r in r0..=r1 {
                for col in c0..=c1 {
                    let p = r * width + col;
                    let d = dist2(c, p);
                    if d < best[p] {
                        best[p] = d;
                        assign[p] = k;
                    }
                }
            }
        }
        for p in 0..n {
            if assign[p] == usize::MAX {
                let (k, _) = centers
                    .iter()
                    .enumerate()
                    .map(|(k, c)| (k, dist2(c, p)))
                    .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
                assign[p] = k;
            }
        }
        let mut acc = vec![(0.0, 0.0, vec![0.0; nf], 0usize); centers.len()];
        for p in 0..n {
            let a = &mut acc[assign[p]];
            a.0 += (p / width) as f64;
            a.1 += (p % width) as f64;
            for f in 0..nf {
                a.2[f] += feats[f][p];
            }
            a.3 += 1;
        }
        let mut moved = false;
        for (c, a) in centers.iter_mut().zip(acc) {
            if a.3 == 0 {
                continue;
            }
            let k = a.3 as f64;
            let next = (a.0 / k, a.1 / k, a.2.into_iter().map(|v| v / k).collect::<Vec<_>>());
            if next != *c {
                moved = true;
            }
            *c = next;
        }
        if !moved {
            break;
        }
    }

    enforce_connectivity(&mut assign, width, height);
    let (labels, n_segments) = compact_ids(&assign);
    let centers = spatial_centers(&labels, n_segments, width, &feats);
    Ok(Segmentation {
        labels,
        n_segments,
        centers,
        width,
        height,
    })
}

fn neighbors(p: usize, width: usize, height: usize) -> impl Iterator<Item = usize> {
    let (r, c) = (p / width, p % width);
    let up = (r > 0).then(|| p - width);
    let down = (r + 1 < height).then(|| p + width);
    let left = (c > 0).then(|| p - 1);
    let right = (c + 1 < width).then(|| p + 1);
    [up, down, left, right].into_iter().flatten()
}

/// 4-connected components of a label image, in raster order of first pixel.
fn components(labels: &[usize], width: usize, height: usize) -> Vec<Vec<usize>> {
    let n = labels.len();
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(p) = queue.pop_front() {
            comp.push(p);
            for q in neighbors(p, width, height) {
                if !seen[q] && labels[q] == labels[start] {
                    seen[q] = true;
                    queue.push_back(q);
                }
            }
        }
        comps.push(comp);
    }
    comps
}

/// Keep the largest component of every label; merge each other component
/// into its largest adjacent segment. Repeats until every label is connected.
fn enforce_connectivity(labels: &mut [usize], width: usize, height: usize) {
    loop {
        let comps = components(labels, width, height);
        let max_label = labels.iter().copied().max().unwrap_or(0);
        let mut main: Vec<Option<usize>> = vec![None; max_label + 1];
        for (ci, comp) in comps.iter().enumerate() {
            let l = labels[comp[0]];
            match main[l] {
                Some(m) if comps[m].len() >= comp.len() => {}
                _ => main[l] = Some(ci),
            }
        }
        let orphans: Vec<usize> = (0..comps.len())
            .filter(|&ci| main[labels[comps[ci][0]]] != Some(ci))
            .collect();
        if orphans.is_empty() {
            return;
        }
        let mut sizes = vec![0usize; max_label + 1];
        for &l in labels.iter() {
            sizes[l] += 1;
        }
        for ci in orphans {
            let comp = &comps[ci];
            let own = labels[comp[0]];
            let mut target: Option<usize> = None;
            for &p in comp {
                for q in neighbors(p, width, height) {
                    let l = labels[q];
                    if l == own {
                        continue;
                    }
                    target = match target {
                        Some(t) if sizes[t] > sizes[l] || (sizes[t] == sizes[l] && t < l) => Some(t),
                        _ => Some(l),
                    };
                }
            }
            if let Some(t) = target {
                for &p in comp {
                    labels[p] = t;
                }
                sizes[own] -= comp.len();
                sizes[t] += comp.len();
            }
        }
    }
}

/// Replace each pixel's spectrum by the mean spectrum of its segment.
pub fn superpixel_stream(cube: &FeatureMatrix, seg: &Segmentation) -> Result<FeatureMatrix> {
    let values = cube.values();
    if values.ncols() != seg.n_pixels() {
        return Err(JpsaError::input(format!(
            "segmentation covers {} pixels, cube has {}",
            seg.n_pixels(),
            values.ncols()
        )));
    }
    let d = values.nrows();
    let mut sums = DMatrix::zeros(d, seg.n_segments);
    let mut counts = vec![0usize; seg.n_segments];
    for (p, &s) in seg.labels.iter().enumerate() {
        let mut col = sums.column_mut(s);
        col += values.column(p);
        counts[s] += 1;
    }
    if let Some(s) = counts.iter().position(|&c| c == 0) {
        return Err(JpsaError::Internal(format!("segment {s} is empty")));
    }
    for (s, &c) in counts.iter().enumerate() {
        let mut col = sums.column_mut(s);
        col /= c as f64;
    }
    let out = DMatrix::from_fn(d, seg.n_pixels(), |r, p| sums[(r, seg.labels[p])]);
    FeatureMatrix::new(out, StreamKind::SuperpixelStream)
}

/// Labels of the superpixel-stream columns: each column keeps its own
/// pixel's label.
pub fn stream_labels(labels: &[usize], seg: &Segmentation) -> Vec<usize> {
    debug_assert_eq!(labels.len(), seg.n_pixels());
    labels.to_vec()
}
