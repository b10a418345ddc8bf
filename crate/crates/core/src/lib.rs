//! Flight-performance regression from pilot physiological features with an
//! extreme learning machine whose hidden layer is tuned by bacterial foraging.
//!
//! - [`numerics`]: matrix, activations, least squares, random streams
//! - [`elm`]: extreme learning machine
//! - [`bfa`]: bacterial foraging optimizer
//! - [`pipeline`]: BFA-ELM fitting and the ELM vs BFA-ELM comparison
//! - [`data`]: records, CSV, performance index, correlation, synthetic data
//! - [`metrics`]: MAE, MSE, MAPE

// `!(a < b)` is used on purpose so that NaN fails range checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bfa;
pub mod data;
pub mod elm;
pub mod error;
pub mod metrics;
pub mod numerics;
pub mod pipeline;

pub use error::{Error, Result};
