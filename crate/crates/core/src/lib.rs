//! Backpropagation-free continual test-time adaptation.
//!
//! A deployed classifier is adapted on a stream of unlabeled batches by
//! searching a low-dimensional vector `v` with CMA-ES. The vector is expanded
//! by a frozen Fastfood projection into additive offsets for the affine
//! parameters of the model's normalization layers. Adaptation stops once the
//! search mean settles, a symmetric-KL score on stem statistics detects the
//! next domain shift, and a bounded bank of archived means warm-starts the
//! search when a domain comes back.
//!
//! Module map:
//!
//! - [`projection`]: fast Walsh-Hadamard transform and the Fastfood projector.
//! - [`cmaes`]: full-covariance CMA-ES with cumulative step-size adaptation.
//! - [`model`]: forward-only toy classifiers with offsettable normalization.
//! - [`fitness`]: entropy plus activation-statistics alignment objective.
//! - [`bank`]: capacity-bounded store of domain vectors.
//! - [`controller`]: the per-batch adapt / stop / detect / reinitialize loop.
//! - [`bench`]: synthetic non-stationary streams, runners, reports.

pub mod bank;
pub mod bench;
pub mod cmaes;
pub mod controller;
mod error;
pub mod fitness;
pub mod model;
pub mod projection;

pub use error::{Error, Result};
