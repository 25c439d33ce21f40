//! Log-log least squares for power-law exponents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `y ≈ exp(intercept) x^slope`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    /// `max |y_fit / y - 1|` over the fitted points.
    pub max_rel_residual: f64,
    pub points: usize,
}

impl PowerFit {
    pub fn predict(&self, x: f64) -> f64 {
        (self.intercept + self.slope * x.ln()).exp()
    }
}

pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<PowerFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientGrid(format!("need at least two paired points, got {} and {}", x.len(), y.len())));
    }
    if let Some(i) = (0..x.len()).find(|&i| !(x[i] > 0.0 && y[i] > 0.0 && x[i].is_finite() && y[i].is_finite())) {
        return Err(Error::InvalidInput(format!("log-log fit needs positive finite data, point {i} is ({}, {})", x[i], y[i])));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientGrid("all abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_rel_residual = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| ((intercept + slope * a - b).exp() - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(PowerFit { slope, intercept, max_rel_residual, points: x.len() })
}
