//! Regression error indicators: MAE, MSE, MAPE and the accuracy derived from MAPE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check(truth: &[f64], pred: &[f64]) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::InvalidArgument("metrics need at least one sample".into()));
    }
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} true values but {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    Ok(())
}

pub fn mae(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check(truth, pred)?;
    let sum: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).abs()).sum();
    Ok(sum / truth.len() as f64)
}

pub fn mse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check(truth, pred)?;
    let sum: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(sum / truth.len() as f64)
}

/// Mean absolute percentage error, relative to the true values, in percent.
pub fn mape(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check(truth, pred)?;
    if let Some(i) = truth.iter().position(|&t| t == 0.0) {
        return Err(Error::ZeroTrueValue(i));
    }
    let sum: f64 = truth
        .iter()
        .zip(pred)
        .map(|(t, p)| (t - p).abs() / t.abs())
        .sum();
    Ok(100.0 * sum / truth.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub mse: f64,
    /// Percent.
    pub mape: f64,
    /// `100 - mape`, percent.
    pub accuracy: f64,
    pub n: usize,
}

pub fn report(truth: &[f64], pred: &[f64]) -> Result<MetricsReport> {
    let mape = mape(truth, pred)?;
    Ok(MetricsReport {
        mae: mae(truth, pred)?,
        mse: mse(truth, pred)?,
        mape,
        accuracy: 100.0 - mape,
        n: truth.len(),
    })
}
