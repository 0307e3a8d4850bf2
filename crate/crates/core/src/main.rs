use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use jpsa::error::StageContext;
use jpsa::harness::experiment::{ensure_dir, fit_reduction, load_dataset, make_split, segment_dataset, sweep_csv};
use jpsa::harness::grid::best_config;
use jpsa::harness::{grid_search_cv, layer_sweep, run_experiment, DataSource, ExperimentConfig, Method};
use jpsa::io::{self, ClassPalette, Dtype};
use jpsa::{JpsaError, Result};

#[derive(Parser)]
#[command(name = "jpsa", about = "Semi-supervised hyperspectral dimensionality reduction")]
struct Cli {
    /// Flat key = value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for data generation, splits and folds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Cap on evaluated grid cells.
    #[arg(long, global = true)]
    grid_budget: Option<usize>,
    /// Add unlabeled (never test) pixels as graph-only columns.
    #[arg(long, global = true)]
    include_unlabeled_in_graph: bool,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write the synthetic scene as cube.json, cube.bin and labels.txt.
    Generate,
    /// SLIC superpixels; writes segments.txt.
    Segment,
    /// Fit the configured method on the training split; writes model.bin.
    Fit,
    /// Project the scene through a saved model; writes embedding.json/.bin.
    Transform {
        #[arg(long)]
        model: PathBuf,
    },
    /// Full train/test run with metrics, traces, map and model.
    Evaluate,
    /// Cross-validated grid search over the config's grid.* keys.
    Grid,
    /// JPSA at several layer counts.
    SweepLayers {
        /// Comma-separated layer counts; defaults to sweep.m.
        #[arg(long, value_delimiter = ',')]
        m: Option<Vec<usize>>,
    },
    /// Render a label file as a P6 class map.
    RenderMap {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        width: usize,
        #[arg(long)]
        height: usize,
        /// Palette size; defaults to the largest label.
        #[arg(long)]
        classes: Option<usize>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| JpsaError::io(p, e))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    for o in &cli.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| JpsaError::Config(format!("--set expects key=value, got '{o}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
        if let DataSource::Synthetic(spec) = &mut cfg.data {
            spec.seed = s;
        }
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(b) = cli.grid_budget {
        cfg.grid_budget = Some(b);
    }
    if cli.include_unlabeled_in_graph {
        cfg.include_unlabeled = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| JpsaError::io(path, e))
}

fn indices_text(idx: &[usize]) -> String {
    io::format_labels(idx)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli).stage("config")?;
    let out = cfg.out.clone();
    match &cli.cmd {
        Cmd::Generate => {
            let ds = load_dataset(&cfg).stage("generate")?;
            ensure_dir(&out)?;
            io::write_cube(&out.join("cube.json"), &out.join("cube.bin"), &ds.cube, ds.width, ds.height, Dtype::F64le)
                .stage("write")?;
            io::write_labels(&out.join("labels.txt"), &ds.labels).stage("write")?;
            println!("wrote {}x{}x{} cube with {} classes to {}", ds.width, ds.height, ds.cube.dim(), ds.n_classes, out.display());
        }
        Cmd::Segment => {
            let ds = load_dataset(&cfg).stage("load")?;
            let seg = segment_dataset(&cfg, &ds).stage("segment")?;
            ensure_dir(&out)?;
            io::write_labels(&out.join("segments.txt"), &seg.labels).stage("write")?;
            println!("{} segments", seg.n_segments);
        }
        Cmd::Fit => {
            let ds = load_dataset(&cfg).stage("load")?;
            let split = make_split(&ds.labels, ds.n_classes, cfg.split.train_per_class, cfg.split.test_fraction, cfg.seed)
                .stage("split")?;
            let seg = match cfg.method {
                Method::Jpsa => Some(segment_dataset(&cfg, &ds).stage("segment")?),
                _ => None,
            };
            let reduced = fit_reduction(&cfg, &ds, seg.as_ref(), &split.train_indices, &split.unlabeled_indices)?;
            ensure_dir(&out)?;
            write(&out.join("config.txt"), cfg.echo())?;
            write(&out.join("train.txt"), indices_text(&split.train_indices))?;
            write(&out.join("test.txt"), indices_text(&split.test_indices))?;
            let conv = reduced.fit.as_ref().map_or_else(|| "outer_iter,objective\n".to_string(), |r| r.to_csv());
            write(&out.join("convergence.csv"), conv)?;
            match &reduced.stack {
                Some(stack) => io::save_model(&out.join("model.bin"), stack).stage("write")?,
                None => return Err(JpsaError::Config("method raw has no model to save".into())),
            }
            if let Some(r) = &reduced.fit {
                println!("{} outer iterations, objective {:e}", r.outer_iterations, r.objective_trace.last().unwrap());
            }
        }
        Cmd::Transform { model } => {
            let stack = io::load_model(model).stage("load model")?;
            let ds = load_dataset(&cfg).stage("load")?;
            let emb = jpsa::jpsa::transform(&stack, &ds.cube).stage("transform")?;
            ensure_dir(&out)?;
            io::write_cube(&out.join("embedding.json"), &out.join("embedding.bin"), &emb, ds.width, ds.height, Dtype::F64le)
                .stage("write")?;
            println!("embedded {} pixels into {} dims", emb.n_samples(), emb.dim());
        }
        Cmd::Evaluate => {
            let res = run_experiment(&cfg)?;
            println!("{}\n{}", jpsa::metrics::MetricsReport::CSV_HEADER, res.metrics.csv_row(cfg.method.name()));
        }
        Cmd::Grid => {
            let res = grid_search_cv(&cfg).stage("grid")?;
            ensure_dir(&out)?;
            write(&out.join("grid.csv"), res.to_csv())?;
            let best = best_config(&cfg, &res)?;
            write(&out.join("best_config.txt"), best.echo())?;
            let b = res.best_cell();
            println!("best cell {} (mean CV OA {:.4}):", b.id, b.mean_oa);
            for (k, v) in &b.overrides {
                println!("  {k} = {v}");
            }
        }
        Cmd::SweepLayers { m } => {
            let list = m.clone().unwrap_or_else(|| cfg.sweep_m.clone());
            let rows = layer_sweep(&cfg, &list).stage("sweep")?;
            ensure_dir(&out)?;
            let csv = sweep_csv(&rows);
            write(&out.join("sweep.csv"), &csv)?;
            print!("{csv}");
        }
        Cmd::RenderMap {
            predictions,
            width,
            height,
            classes,
        } => {
            let labels = io::load_labels(predictions, width * height).stage("load")?;
            let n = classes.unwrap_or_else(|| labels.iter().copied().max().unwrap_or(0));
            let img = io::render_class_map(&labels, *width, *height, &ClassPalette::new(n)).stage("render")?;
            ensure_dir(&out)?;
            write(&out.join("map.ppm"), img)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
