//! Temporal-convolutional trailer encoding for hybrid collaborative
//! filtering.
//!
//! Movies are represented by fixed-length vectors computed from per-frame
//! trailer features via a strided temporal convolution stack (or a
//! temporal average-pooling baseline), users by the sum of the vectors of
//! the movies they attended, and attendance probability by a logistic head
//! over the user-movie score plus frequency/recency features. The whole
//! pipeline trains end-to-end with SGD on implicit-feedback records and is
//! evaluated with in-matrix and cold-start AUC.
//!
//! Start with the runnable programs under `examples/`; the `reelcf` binary
//! exposes the same capabilities as subcommands.

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod explain;
pub mod model;
pub mod numcore;
pub mod synthgen;
pub mod train;

pub use error::{Error, Result};

/// Identifier of a movie in manifests, attendance records, and reports.
pub type MovieId = String;
/// Identifier of a user in attendance records.
pub type UserId = String;
