use crate::error::{DaisError, Result};
use crate::stats::linear_fit;

use super::sweep::ResultRow;

/// Least-squares line through `(log K, log gap)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Fits rows with `K >= k_min`; rows with a non-positive or non-finite gap
/// are skipped.
pub fn fit_loglog_slope(rows: &[ResultRow], k_min: usize) -> Result<LogLogFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.k >= k_min && r.gap.is_finite() && r.gap > 0.0)
        .map(|r| ((r.k as f64).ln(), r.gap.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(DaisError::InsufficientData(format!(
            "need at least 3 positive gaps with K >= {k_min}, have {}",
            pts.len()
        )));
    }
    let (slope, intercept, r2) = linear_fit(&pts);
    Ok(LogLogFit { slope, intercept, r2, points: pts.len() })
}
