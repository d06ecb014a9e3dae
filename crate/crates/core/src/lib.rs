//! Random projection with a dimension chosen so that, in a single draw, all
//! pairwise squared distances of an `m`-point set stay within `[1-δ, 1+δ]`
//! (after the `n/n'` adjustment) with probability at least `1-ε`.
//!
//! Around that core sit the consequences for k-means: cost preservation,
//! fixed-point transfer under a cluster gap, transfer of the global optimum
//! and of several clusterability parameters. Every statement is probabilistic,
//! so most of the crate is organised as measurement plus Monte-Carlo
//! harnesses that estimate how often the predicted bound holds.
//!
//! Modules:
//! - [`dimension`]: explicit and implicit target-dimension bounds.
//! - [`projection`]: seeded row-normalised Gaussian operators and datasets.
//! - [`geometry`]: pairwise distortion reports and failure-rate estimation.
//! - [`kmeans`]: Lloyd, exhaustive optimum, and the transfer checks.
//! - [`clusterability`]: parameter measurement and transport.
//! - [`datagen`]: synthetic mixtures with a controlled gap.
//! - [`harness`]: seeded Monte-Carlo drivers for the transfer statements.
//! - [`reproduce`]: table and figure data.

pub mod clusterability;
pub mod datagen;
pub mod dimension;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod kmeans;
pub mod projection;
pub mod reproduce;
pub mod stats;

pub use error::{JlError, Result};
pub use projection::{Dataset, ProjectionOperator};
