//! Configuration-driven experiments on synthetic or file-backed scenes.

pub mod config;
pub mod experiment;
pub mod grid;
pub mod synthetic;

pub use config::{DataSource, ExperimentConfig, Method, SyntheticSpec};
pub use experiment::{layer_sweep, run_experiment, run_in_memory, Dataset, ExperimentOutcome};
pub use grid::{grid_search_cv, GridResult};
pub use synthetic::{generate_synthetic, SyntheticScene};
