//! Stratified k-fold cross-validated grid search over config keys.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{default_grid, ExperimentConfig, Method};
use super::experiment::{evaluate_split, load_dataset, make_split, segment_dataset};
use crate::data::SampleSplit;
use crate::error::{JpsaError, Result, StageContext};

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub id: usize,
    pub overrides: Vec<(String, String)>,
    pub fold_oa: Vec<f64>,
    pub mean_oa: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub keys: Vec<String>,
    pub cells: Vec<CellResult>,
    /// Index into `cells`.
    pub best: usize,
}

impl GridResult {
    pub fn best_cell(&self) -> &CellResult {
        &self.cells[self.best]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("cell");
        for k in &self.keys {
            s.push(',');
            s.push_str(k);
        }
        s.push_str(",mean_oa,folds\n");
        for c in &self.cells {
            s.push_str(&c.id.to_string());
            for (_, v) in &c.overrides {
                s.push(',');
                s.push_str(v);
            }
            s.push_str(&format!(",{:.6},{}\n", c.mean_oa, c.fold_oa.len()));
        }
        s
    }
}

/// Cartesian product in key order, last key varying fastest.
pub fn grid_cells(grid: &BTreeMap<String, Vec<String>>) -> Vec<Vec<(String, String)>> {
    let mut cells: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (k, vals) in grid {
        let mut next = Vec::with_capacity(cells.len() * vals.len());
        for c in &cells {
            for v in vals {
                let mut c2 = c.clone();
                c2.push((k.clone(), v.clone()));
                next.push(c2);
            }
        }
        cells = next;
    }
    cells
}

/// Ids of the cells kept under `budget`: all of them, or a seeded sample in
/// ascending order.
pub fn budget_cells(n_cells: usize, budget: Option<usize>, seed: u64) -> Vec<usize> {
    match budget {
        Some(b) if b < n_cells => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6121d);
            let mut ids = rand::seq::index::sample(&mut rng, n_cells, b).into_vec();
            ids.sort_unstable();
            ids
        }
        _ => (0..n_cells).collect(),
    }
}

/// Fold of every training pixel: per class a seeded shuffle, then
/// round-robin over folds.
pub fn stratified_folds(train: &[usize], labels: &[usize], folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xf01d);
    let mut fold_of = vec![0; train.len()];
    let mut classes: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    classes.sort_unstable();
    classes.dedup();
    for c in classes {
        let mut pos: Vec<usize> = (0..train.len()).filter(|&k| labels[train[k]] == c).collect();
        pos.shuffle(&mut rng);
        for (r, &k) in pos.iter().enumerate() {
            fold_of[k] = r % folds;
        }
    }
    fold_of
}

fn cell_score(base: &ExperimentConfig, overrides: &[(String, String)]) -> Result<Vec<f64>> {
    let mut cfg = base.clone();
    for (k, v) in overrides {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    let ds = load_dataset(&cfg).stage("load")?;
    let split = make_split(&ds.labels, ds.n_classes, cfg.split.train_per_class, cfg.split.test_fraction, cfg.seed)
        .stage("split")?;
    let seg = match cfg.method {
        Method::Jpsa => Some(segment_dataset(&cfg, &ds).stage("segment")?),
        _ => None,
    };
    let fold_of = stratified_folds(&split.train_indices, &ds.labels, cfg.cv_folds, cfg.seed);
    let mut scores = Vec::with_capacity(cfg.cv_folds);
    for f in 0..cfg.cv_folds {
        let (held, kept): (Vec<_>, Vec<_>) = split
            .train_indices
            .iter()
            .zip(&fold_of)
            .partition(|(_, &fo)| fo == f);
        if held.is_empty() {
            continue;
        }
        let inner = SampleSplit {
            train_indices: kept.into_iter().map(|(&i, _)| i).collect(),
            test_indices: held.into_iter().map(|(&i, _)| i).collect(),
            // the outer test pixels never enter training
            unlabeled_indices: split.unlabeled_indices.clone(),
        };
        scores.push(evaluate_split(&cfg, &ds, seg.as_ref(), &inner)?.metrics.oa);
    }
    Ok(scores)
}

/// Mean cross-validated OA of every grid cell on the training pixels only.
/// The highest mean wins; ties go to the earliest cell.
pub fn grid_search_cv(cfg: &ExperimentConfig) -> Result<GridResult> {
    cfg.validate()?;
    let grid = if cfg.grid.is_empty() { default_grid() } else { cfg.grid.clone() };
    if grid.values().any(Vec::is_empty) {
        return Err(JpsaError::Config("grid has an empty candidate list".into()));
    }
    let all = grid_cells(&grid);
    let ids = budget_cells(all.len(), cfg.grid_budget, cfg.seed);
    if ids.is_empty() {
        return Err(JpsaError::Config("grid budget selects no cells".into()));
    }
    let cells: Vec<CellResult> = ids
        .par_iter()
        .map(|&id| {
            let fold_oa = cell_score(cfg, &all[id]).map_err(|e| JpsaError::Config(format!("grid cell {id}: {e}")))?;
            let mean_oa = fold_oa.iter().sum::<f64>() / fold_oa.len().max(1) as f64;
            Ok(CellResult {
                id,
                overrides: all[id].clone(),
                fold_oa,
                mean_oa,
            })
        })
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, c) in cells.iter().enumerate() {
        if c.mean_oa > cells[best].mean_oa {
            best = i;
        }
    }
    Ok(GridResult {
        keys: grid.keys().cloned().collect(),
        cells,
        best,
    })
}

/// `cfg` with the winning cell's overrides applied.
pub fn best_config(cfg: &ExperimentConfig, result: &GridResult) -> Result<ExperimentConfig> {
    let mut out = cfg.clone();
    for (k, v) in &result.best_cell().overrides {
        out.set(k, v)?;
    }
    out.grid.clear();
    Ok(out)
}
