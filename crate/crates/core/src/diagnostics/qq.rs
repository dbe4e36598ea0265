//! Quantile pairs of residuals against Exp(1).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    pub theoretical: f64,
    pub empirical: f64,
}

/// Sample quantile at probability `p` with positions (k − 0.5)/n,
/// interpolating linearly between order statistics.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (p * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `n_quantiles` pairs at probabilities (k − 0.5)/n_quantiles.
pub fn qq_pairs(residuals: &[f64], n_quantiles: usize) -> Result<Vec<QqPoint>> {
    if n_quantiles == 0 || residuals.len() < n_quantiles {
        return Err(Error::InsufficientData(format!(
            "{} residuals for {n_quantiles} quantiles",
            residuals.len()
        )));
    }
    let mut sorted = residuals.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((1..=n_quantiles)
        .map(|k| {
            let p = (k as f64 - 0.5) / n_quantiles as f64;
            QqPoint { theoretical: -(-p).ln_1p(), empirical: empirical_quantile(&sorted, p) }
        })
        .collect())
}
