//! End-to-end runs: data, split, reduction method, 1-NN, metrics, artifacts.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{DataSource, ExperimentConfig, Method};
use super::synthetic::generate_synthetic;
use crate::data::{FeatureMatrix, SampleSplit};
use crate::embed::{lpp_fit, pca_fit};
use crate::error::{JpsaError, Result, StageContext};
use crate::graph::{knn_heat_graph, laplacian};
use crate::io::{self, ClassPalette};
use crate::jpsa::{jpsa_fit, transform, unit_ball_scale, FitReport, ProjectionStack};
use crate::linalg::select_columns;
use crate::metrics::{evaluate, nn_classify, ConfusionMatrix, MetricsReport};
use crate::superpixel::{segment_count, slic_segment, superpixel_stream, Segmentation};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub cube: FeatureMatrix,
    /// Class per pixel, 0 = unlabeled.
    pub labels: Vec<usize>,
    pub width: usize,
    pub height: usize,
    pub n_classes: usize,
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let (cube, labels, width, height) = match &cfg.data {
        DataSource::Synthetic(spec) => {
            let s = generate_synthetic(spec)?;
            (s.cube, s.labels, s.width, s.height)
        }
        DataSource::Files {
            header,
            payload,
            labels,
        } => {
            let (cube, h) = io::load_cube(header, payload)?;
            let lab = io::load_labels(labels, h.n_pixels())?;
            (cube, lab, h.width, h.height)
        }
    };
    let n_classes = labels.iter().copied().max().unwrap_or(0);
    Ok(Dataset {
        cube,
        labels,
        width,
        height,
        n_classes,
    })
}

/// Per class, a seeded shuffle picks `train_per_class` training pixels; a
/// `test_fraction` share of the remaining labeled pixels is tested and the
/// rest, with all label-0 pixels, forms the unlabeled pool.
pub fn make_split(
    labels: &[usize],
    n_classes: usize,
    train_per_class: usize,
    test_fraction: f64,
    seed: u64,
) -> Result<SampleSplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5151_7e57);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut unlabeled: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == 0).collect();
    for c in 1..=n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.len() <= train_per_class {
            return Err(JpsaError::Config(format!(
                "class {c} has {} pixels, needs more than train_per_class = {train_per_class}",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..train_per_class]);
        let rest = &members[train_per_class..];
        let n_test = ((test_fraction * rest.len() as f64).round() as usize).clamp(1, rest.len());
        test.extend_from_slice(&rest[..n_test]);
        unlabeled.extend_from_slice(&rest[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    unlabeled.sort_unstable();
    let split = SampleSplit {
        train_indices: train,
        test_indices: test,
        unlabeled_indices: unlabeled,
    };
    split.validate(labels.len())?;
    Ok(split)
}

pub fn segment_dataset(cfg: &ExperimentConfig, ds: &Dataset) -> Result<Segmentation> {
    let k = segment_count(ds.width * ds.height, cfg.hp.superpixel_fraction);
    slic_segment(&ds.cube, ds.width, ds.height, k, cfg.slic_compactness, cfg.slic_iters)
}

/// A fitted reduction applied to every pixel of the scene.
#[derive(Debug, Clone)]
pub struct Reduced {
    /// `d × n_pixels`
    pub features: DMatrix<f64>,
    pub stack: Option<ProjectionStack>,
    pub fit: Option<FitReport>,
}

/// Fit `cfg.method` on the `train` pixels (plus, for JPSA with unlabeled
/// columns enabled, a capped prefix of `pool`) and embed the whole scene.
pub fn fit_reduction(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    seg: Option<&Segmentation>,
    train: &[usize],
    pool: &[usize],
) -> Result<Reduced> {
    let x = ds.cube.values();
    let d = *cfg.hp.dims.last().unwrap();
    let xt = select_columns(x, train);
    match cfg.method {
        Method::Raw => Ok(Reduced {
            features: x.clone(),
            stack: None,
            fit: None,
        }),
        Method::Pca => {
            let e = pca_fit(&xt, d).stage("pca")?;
            Ok(Reduced {
                features: e.transform(x),
                stack: Some(ProjectionStack::new(vec![e.projection], None)?),
                fit: None,
            })
        }
        Method::Lpp => {
            let scale = unit_ball_scale(&xt);
            let xs = &xt * scale;
            let w = knn_heat_graph(&xs, cfg.hp.knn_k, cfg.hp.sigma).stage("graph")?;
            let e = lpp_fit(&xs, &laplacian(&w)?, &w.row_sums(), d).stage("lpp")?;
            let mut stack = ProjectionStack::new(vec![e.projection], None)?;
            stack.input_scale = scale;
            Ok(Reduced {
                features: transform(&stack, &ds.cube)?.into_values(),
                stack: Some(stack),
                fit: None,
            })
        }
        Method::Jpsa => {
            let seg = seg.ok_or_else(|| JpsaError::Internal("JPSA needs a segmentation".into()))?;
            let stream = superpixel_stream(&ds.cube, seg).stage("superpixel")?;
            let mut cols = train.to_vec();
            let mut col_labels: Vec<usize> = train.iter().map(|&i| ds.labels[i]).collect();
            if cfg.include_unlabeled {
                for &i in pool.iter().take(cfg.max_unlabeled) {
                    cols.push(i);
                    col_labels.push(0);
                }
            }
            let xp = FeatureMatrix::pixel(select_columns(x, &cols))?;
            let xsp = FeatureMatrix::new(select_columns(stream.values(), &cols), crate::data::StreamKind::SuperpixelStream)?;
            let seg_of: Vec<usize> = cols.iter().map(|&i| seg.labels[i]).collect();
            let (stack, report) = jpsa_fit(&xp, &xsp, &col_labels, &seg_of, &cfg.hp, &cfg.admm).stage("jpsa_fit")?;
            let features = transform(&stack, &ds.cube).stage("transform")?.into_values();
            Ok(Reduced {
                features,
                stack: Some(stack),
                fit: Some(report),
            })
        }
    }
}

/// Unlabeled pool for the graph: deterministic shuffle so the cap does not
/// favour one image region.
fn graph_pool(split: &SampleSplit, seed: u64) -> Vec<usize> {
    let mut pool = split.unlabeled_indices.clone();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x9001));
    pool
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub metrics: MetricsReport,
    pub confusion: ConfusionMatrix,
    /// Predicted class of every pixel.
    pub predictions: Vec<usize>,
    pub split: SampleSplit,
    pub reduced: Reduced,
}

/// Train on the split's training pixels, test on its test pixels.
pub fn evaluate_split(
    cfg: &ExperimentConfig,
    ds: &Dataset,
    seg: Option<&Segmentation>,
    split: &SampleSplit,
) -> Result<ExperimentOutcome> {
    let pool = graph_pool(split, cfg.seed);
    let reduced = fit_reduction(cfg, ds, seg, &split.train_indices, &pool)?;
    let train_labels: Vec<usize> = split.train_indices.iter().map(|&i| ds.labels[i]).collect();
    let train_feats = select_columns(&reduced.features, &split.train_indices);
    let predictions = nn_classify(&train_feats, &train_labels, &reduced.features).stage("classify")?;
    let truth: Vec<usize> = split.test_indices.iter().map(|&i| ds.labels[i]).collect();
    let pred: Vec<usize> = split.test_indices.iter().map(|&i| predictions[i]).collect();
    let (confusion, metrics) = evaluate(&truth, &pred, ds.n_classes).stage("metrics")?;
    Ok(ExperimentOutcome {
        metrics,
        confusion,
        predictions,
        split: split.clone(),
        reduced,
    })
}

/// Load, split, segment (JPSA only) and evaluate, without writing anything.
pub fn run_in_memory(cfg: &ExperimentConfig) -> Result<(Dataset, ExperimentOutcome)> {
    cfg.validate()?;
    let ds = load_dataset(cfg).stage("load")?;
    let split = make_split(
        &ds.labels,
        ds.n_classes,
        cfg.split.train_per_class,
        cfg.split.test_fraction,
        cfg.seed,
    )
    .stage("split")?;
    let seg = match cfg.method {
        Method::Jpsa => Some(segment_dataset(cfg, &ds).stage("segment")?),
        _ => None,
    };
    let out = evaluate_split(cfg, &ds, seg.as_ref(), &split)?;
    Ok((ds, out))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| JpsaError::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| JpsaError::io(dir, e))
}

/// Full run with artifacts in `cfg.out`: `config.txt`, `metrics.csv`,
/// `per_class.csv`, `confusion.csv`, `convergence.csv`, `admm_layer<l>.csv`
/// (JPSA), `map.ppm` and `model.bin` (all but raw).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let (ds, out) = run_in_memory(cfg)?;
    let dir = cfg.out.as_path();
    ensure_dir(dir).stage("write")?;
    write_text(&dir.join("config.txt"), &cfg.echo())?;
    write_text(
        &dir.join("metrics.csv"),
        &format!("{}\n{}\n", MetricsReport::CSV_HEADER, out.metrics.csv_row(cfg.method.name())),
    )?;
    write_text(&dir.join("per_class.csv"), &out.metrics.per_class_csv())?;
    write_text(&dir.join("confusion.csv"), &out.confusion.to_csv())?;
    let convergence = match &out.reduced.fit {
        Some(rep) => {
            for (l, r) in rep.pretrain.iter().enumerate() {
                write_text(&dir.join(format!("admm_layer{}.csv", l + 1)), &r.to_csv())?;
            }
            rep.to_csv()
        }
        None => "outer_iter,objective\n".to_string(),
    };
    write_text(&dir.join("convergence.csv"), &convergence)?;
    let map = io::render_class_map(&out.predictions, ds.width, ds.height, &ClassPalette::new(ds.n_classes))
        .stage("render")?;
    fs::write(dir.join("map.ppm"), map).map_err(|e| JpsaError::io(dir.join("map.ppm"), e))?;
    if let Some(stack) = &out.reduced.stack {
        io::save_model(&dir.join("model.bin"), stack).stage("write")?;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub m: usize,
    pub metrics: MetricsReport,
}

/// JPSA at every layer count in `m_list`, same data and split.
pub fn layer_sweep(cfg: &ExperimentConfig, m_list: &[usize]) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let ds = load_dataset(cfg).stage("load")?;
    let split = make_split(&ds.labels, ds.n_classes, cfg.split.train_per_class, cfg.split.test_fraction, cfg.seed)
        .stage("split")?;
    let seg = segment_dataset(cfg, &ds).stage("segment")?;
    let mut rows = Vec::with_capacity(m_list.len());
    for &m in m_list {
        let mut c = cfg.clone();
        c.method = Method::Jpsa;
        c.set("jpsa.m", &m.to_string())?;
        let out = evaluate_split(&c, &ds, Some(&seg), &split)?;
        rows.push(SweepRow { m, metrics: out.metrics });
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("m,oa,aa,kappa\n");
    for r in rows {
        s.push_str(&format!("{},{:.6},{:.6},{:.6}\n", r.m, r.metrics.oa, r.metrics.aa, r.metrics.kappa));
    }
    s
}
