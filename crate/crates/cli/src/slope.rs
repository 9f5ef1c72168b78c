//! Log-log regret growth fits.

use serde::Serialize;

use crate::error::{CliError, Result};

/// Mean cumulative regret at one horizon, with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopePoint {
    pub horizon: f64,
    pub mean_regret: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope from the per-point standard errors,
    /// via `Var(ln m) ≈ (se / m)²`.
    pub propagated_se: f64,
    /// Residual standard error of the slope; needs three points in use.
    pub residual_se: Option<f64>,
    pub used: Vec<SlopePoint>,
    /// Points dropped for nonpositive mean regret.
    pub excluded: Vec<SlopePoint>,
}

impl SlopeFit {
    /// One-sided upper confidence bound `slope + z · se` using the larger
    /// of the two standard errors.
    pub fn upper_bound(&self, z: f64) -> f64 {
        self.slope + z * self.propagated_se.max(self.residual_se.unwrap_or(0.0))
    }
}

/// Least-squares slope of `ln(mean regret)` against `ln(T)`.
pub fn regret_slope(points: &[SlopePoint]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(CliError::Invalid(format!(
            "slope fit needs at least 3 grid points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !(p.horizon > 0.0)) {
        return Err(CliError::Invalid("horizons must be positive".into()));
    }
    let (used, excluded): (Vec<SlopePoint>, Vec<SlopePoint>) =
        points.iter().partition(|p| p.mean_regret > 0.0);
    if used.len() < 2 {
        return Err(CliError::Invalid(format!(
            "only {} grid point(s) have positive regret",
            used.len()
        )));
    }
    let xs: Vec<f64> = used.iter().map(|p| p.horizon.ln()).collect();
    let ys: Vec<f64> = used.iter().map(|p| p.mean_regret.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    if sxx == 0.0 {
        return Err(CliError::Invalid("all horizons are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * y).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let propagated_var: f64 = xs
        .iter()
        .zip(&used)
        .map(|(x, p)| (x - xbar).powi(2) * (p.stderr / p.mean_regret).powi(2))
        .sum::<f64>()
        / (sxx * sxx);
    let residual_se = (used.len() >= 3).then(|| {
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        (rss / (n - 2.0) / sxx).sqrt()
    });
    Ok(SlopeFit {
        slope,
        intercept,
        propagated_se: propagated_var.sqrt(),
        residual_se,
        used,
        excluded,
    })
}
