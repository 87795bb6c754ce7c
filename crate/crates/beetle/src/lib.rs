//! Bellwether-based transfer learning for configurable-software performance
//! tuning: find the one environment whose measurements train the best transfer
//! models for its siblings, then use it to predict near-optimal configurations
//! in new environments at a small measurement budget.
//!
//! Module map:
//! - [`data`]: configuration spaces, measured environments, CSV/manifest I/O, sampling.
//! - [`sobol`]: the low-discrepancy sequence behind spread-out training samples.
//! - [`tree`] / [`linear`] / [`gp`]: the model families (CART regression trees,
//!   ordinary least squares, Gaussian processes with a cross-environment kernel).
//! - [`metrics`]: how good a predicted optimum is (NAR, MMRE, rank difference).
//! - [`stats`]: Scott-Knott ranking, bootstrap significance, A12 effect size,
//!   Yeo-Johnson power transform.
//! - [`bellwether`]: incremental bellwether discovery and transfer optimization.
//! - [`baselines`]: the comparison methods (linear-map transfer, GP transfer,
//!   within-target sampling).
//! - [`synthetic`]: seeded families of related environments with a planted
//!   bellwether, for desk-scale verification.
//! - [`harness`] / [`report`]: batch experiment workflows and their JSON/CSV/SVG
//!   outputs, shared with the `tuner` CLI.

pub mod baselines;
pub mod bellwether;
pub mod data;
pub mod error;
pub mod gp;
pub mod harness;
pub mod linear;
pub mod metrics;
pub mod report;
pub mod sobol;
pub mod stats;
pub mod synthetic;
pub mod tree;

pub use error::{Error, Result};
