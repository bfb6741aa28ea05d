//! Least-squares power-law fits on log-log axes.

use serde::{Deserialize, Serialize};

/// Minimum number of points a fit may use.
pub const MIN_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Index range actually covered, `[first, last]`.
    pub window: [f64; 2],
    pub points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitWindow {
    /// Indices in `[from, to]`.
    Range(f64, f64),
    /// Everything after the leading fraction of the points.
    DropFraction(f64),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("nonpositive value {value:e} at index {index}")]
    NonPositive { index: f64, value: f64 },
    #[error("window holds {found} points, need at least {MIN_POINTS}")]
    TooFewPoints { found: usize },
    #[error("all indices in the window coincide")]
    NoSpread,
}

/// Fits `log v = intercept + slope·log i` over the window.
pub fn fit_rate(series: &[(f64, f64)], window: FitWindow) -> Result<RateFit, FitError> {
    let pts: Vec<(f64, f64)> = match window {
        FitWindow::Range(lo, hi) => series.iter().copied().filter(|(i, _)| *i >= lo && *i <= hi).collect(),
        FitWindow::DropFraction(f) => {
            let skip = (f.clamp(0.0, 1.0) * series.len() as f64).floor() as usize;
            series[skip.min(series.len())..].to_vec()
        }
    };
    if pts.len() < MIN_POINTS {
        return Err(FitError::TooFewPoints { found: pts.len() });
    }
    for &(index, value) in &pts {
        if !(index > 0.0) {
            return Err(FitError::NonPositive { index, value: index });
        }
        if !(value > 0.0) || !value.is_finite() {
            return Err(FitError::NonPositive { index, value });
        }
    }

    let logs: Vec<(f64, f64)> = pts.iter().map(|(i, v)| (i.ln(), v.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(FitError::NoSpread);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    // A constant series is fit exactly; its syy is only rounding.
    let y_max = logs.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let r_squared =
        if syy > n * (8.0 * f64::EPSILON * y_max.max(1.0)).powi(2) { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(RateFit { slope, intercept, r_squared, window: [pts[0].0, pts[pts.len() - 1].0], points: pts.len() })
}

/// Running minimum: `out[i] = min(values[..=i])`.
pub fn running_min(values: &[f64]) -> Vec<f64> {
    let mut cur = f64::INFINITY;
    values
        .iter()
        .map(|&v| {
            cur = cur.min(v);
            cur
        })
        .collect()
}

/// The series up to (not including) the first value that is zero, negative
/// or not finite. Past that point the run has hit exact zero or lost the
/// quantity to rounding, and there is no rate left to fit.
pub fn positive_prefix(series: &[(f64, f64)]) -> &[(f64, f64)] {
    let end = series.iter().position(|(_, v)| !(*v > 0.0 && v.is_finite())).unwrap_or(series.len());
    &series[..end]
}
