//! Sparse, compositionally robust inference of microbial association networks,
//! together with a synthetic count-data generator with known ground truth.
//!
//! The crate is organised along the pipeline:
//!
//! * [`compositions`]: count tables, filtering, depth normalisation, clr.
//! * [`marginals`]: five count families with ML fitting and QQ goodness-of-fit.
//! * [`topology`]: band / cluster / scale-free graphs and precision matrices.
//! * [`norta`]: correlated count synthesis through a normal copula.
//! * [`inference`]: neighbourhood selection, graphical lasso, StARS, Pearson baseline.
//! * [`evaluation`]: P-R curves, Hamming distance, topology statistics.
//! * [`benchmark`]: the end-to-end benchmark grid and the small demo experiments.

pub mod benchmark;
pub mod compositions;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod marginals;
pub mod norta;
pub mod seed;
pub mod topology;

pub use error::{Error, ErrorKind, Result};
