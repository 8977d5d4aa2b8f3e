//! Uplink channel estimation for hybrid analog-digital (HAD) massive MIMO.
//!
//! A base station with `N` antennas but only `R << N` RF chains observes
//! pilot signals through a phase-shifter network, so each pilot slot yields
//! `R` linear combinations of the `N`-dimensional channel. On a narrow
//! angular spread the channel is approximately sparse in a shifted-DFT
//! angular basis, which turns estimation into a compressed-sensing problem
//! `y = Φ x + n` with `Φ = W_BB · W_RF · B`.
//!
//! This crate provides the full experimental toolchain around that problem:
//!
//! - [`channel`] — multipath channel synthesis for uniform linear arrays and
//!   the angular-domain transform.
//! - [`measurement`] — pilots, Zadoff-Chu analog combiners, the observation
//!   chain, and the angular-domain noise equivalence.
//! - [`estimators`] — classical baselines: full-overhead LS, orthogonal
//!   matching pursuit, and sparse Bayesian learning.
//! - [`neural`] — an autoencoder that jointly learns the measurement matrix
//!   (phase-shifter phases and the digital combiner) together with a
//!   fully-connected channel estimator, trained from scratch with
//!   hand-written backpropagation and Adam.
//! - [`regions`] — angular-space segmentation, the quarter-space conjugate
//!   symmetry trick, online network selection, and the on-disk model
//!   registry.
//! - [`bench`] — dataset generation, the NMSE metric, and reproducible
//!   experiment drivers with CSV output.
//!
//! Everything is deterministic given a seed: per-channel random streams are
//! derived from `(seed, index)` so datasets and Monte-Carlo evaluations do
//! not depend on iteration order or worker count.
//!
//! See the `examples/` directory for a runnable tour of each capability,
//! and the `hadmimo` binary for the command-line surface.

pub mod bench;
pub mod channel;
pub mod estimators;
pub mod linalg;
pub mod measurement;
pub mod neural;
pub mod regions;
pub mod rng;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("no model available for region {0}")]
    MissingRegionModel(usize),
    #[error("unsupported format version {0}")]
    FormatVersion(u32),
    #[error("checksum mismatch: {0}")]
    Checksum(String),
    #[error("malformed file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
