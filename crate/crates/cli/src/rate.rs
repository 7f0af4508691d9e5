//! Least-squares convergence rates from sweep records.

use crate::sweep::SweepRecord;
use crate::CliError;

/// Errors at or below this are treated as round-off.
pub const NOISE_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub enum RateFit {
    Fitted {
        slope: f64,
        intercept: f64,
        r2: f64,
        points: usize,
    },
    /// Every error is at the noise floor.
    Saturated { points: usize },
}

impl RateFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            RateFit::Fitted { slope, .. } => Some(*slope),
            RateFit::Saturated { .. } => None,
        }
    }
}

/// Fit of `ln abs_err = slope ln h + intercept` over the records of one quantity.
pub fn fit_rate(records: &[SweepRecord], quantity: &str) -> Result<RateFit, CliError> {
    let rows: Vec<&SweepRecord> = records.iter().filter(|r| r.quantity == quantity).collect();
    let live: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.abs_err > NOISE_FLOOR)
        .map(|r| (r.h.ln(), r.abs_err.ln()))
        .collect();
    if !rows.is_empty() && live.is_empty() {
        return Ok(RateFit::Saturated { points: rows.len() });
    }
    if live.len() < 3 {
        return Err(CliError::Rate(format!(
            "{quantity}: need at least 3 records above the noise floor, found {}",
            live.len()
        )));
    }
    let n = live.len() as f64;
    let mx = live.iter().map(|p| p.0).sum::<f64>() / n;
    let my = live.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = live.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = live.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = live.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(CliError::Rate(format!("{quantity}: all records share one h")));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit::Fitted {
        slope,
        intercept,
        r2,
        points: live.len(),
    })
}
