//! Joint and progressive subspace analysis (JPSA) for semi-supervised
//! dimensionality reduction of hyperspectral cubes.
//!
//! The pipeline segments the cube into superpixels, builds a fused
//! pixel/superpixel graph, pre-trains a chain of linear projections layer by
//! layer with an ADMM solver, fine-tunes the chain jointly with a linear
//! classifier, and evaluates the learned subspace with a nearest-neighbor
//! classifier.

pub mod autorule;
pub mod data;
pub mod embed;
pub mod error;
pub mod graph;
pub mod harness;
pub mod io;
pub mod jpsa;
pub mod linalg;
pub mod metrics;
pub mod superpixel;

pub use error::{JpsaError, Result};
