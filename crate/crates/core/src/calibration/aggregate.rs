//! Cross-day averaging of per-day estimates with a stationarity report.

use serde::{Deserialize, Serialize};

use crate::calibration::nonparam::NonParamEstimate;
use crate::error::{invalid, Error, Result};
use crate::event::{EventType, DIMENSIONS};

pub const DEFAULT_CV_THRESHOLD: f64 = 0.5;

/// Mean, sample standard deviation (n − 1) and coefficient of variation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub mean: f64,
    pub sd: f64,
    /// sd/|mean|; `None` when the mean is zero and the sd is not.
    pub cv: Option<f64>,
}

impl Dispersion {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let cv = if sd == 0.0 {
            Some(0.0)
        } else if mean != 0.0 {
            Some(sd / mean.abs())
        } else {
            None
        };
        Self { mean, sd, cv }
    }

    pub fn exceeds(&self, threshold: f64) -> bool {
        self.cv.map_or(true, |cv| cv > threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityEntry {
    pub parameter: String,
    #[serde(flatten)]
    pub dispersion: Dispersion,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    pub days: usize,
    pub cv_threshold: f64,
    pub flagged: usize,
    pub entries: Vec<StationarityEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateEstimate {
    /// Cell-wise and bin-wise means; counts are summed over days.
    pub mean: NonParamEstimate,
    /// Cross-day sample SD of every kernel cell, `[i][j][c]`.
    pub value_sd: Vec<Vec<Vec<f64>>>,
    /// Cross-day sample SD of every baseline, `[i][b]`.
    pub baseline_sd: Vec<Vec<f64>>,
    pub report: StationarityReport,
}

fn dim_name(d: usize, k: usize) -> String {
    if d == DIMENSIONS {
        EventType::from_index(k).map(|e| e.name().to_string()).unwrap_or_else(|| k.to_string())
    } else {
        k.to_string()
    }
}

/// Averages day estimates and reports kernel-norm and baseline dispersion.
pub fn aggregate_days(days: &[NonParamEstimate], cv_threshold: f64) -> Result<AggregateEstimate> {
    if days.len() < 2 {
        return Err(Error::InsufficientData(format!("aggregation needs at least 2 days, got {}", days.len())));
    }
    let first = &days[0];
    let d = first.dims();
    let cells = first.grid.n_cells();
    let bins = first.baselines.first().map_or(0, Vec::len);
    for day in &days[1..] {
        if day.grid != first.grid || day.dims() != d || day.baselines.first().map_or(0, Vec::len) != bins {
            return Err(invalid("day estimates differ in grid, dimension or binning"));
        }
    }

    let mut mean = first.clone();
    let mut value_sd = vec![vec![vec![0.0; cells]; d]; d];
    let mut baseline_sd = vec![vec![0.0; bins]; d];
    let mut entries = Vec::new();
    let mut column = vec![0.0; days.len()];
    for i in 0..d {
        for j in 0..d {
            for c in 0..cells {
                for (k, day) in days.iter().enumerate() {
                    column[k] = day.values[i][j][c];
                }
                let disp = Dispersion::of(&column);
                mean.values[i][j][c] = disp.mean;
                value_sd[i][j][c] = disp.sd;
            }
            for (k, day) in days.iter().enumerate() {
                column[k] = day.norm(i, j);
            }
            let disp = Dispersion::of(&column);
            entries.push(StationarityEntry {
                parameter: format!("norm[{}<-{}]", dim_name(d, i), dim_name(d, j)),
                dispersion: disp,
                flagged: disp.exceeds(cv_threshold),
            });
        }
        for b in 0..bins {
            for (k, day) in days.iter().enumerate() {
                column[k] = day.baselines[i][b];
            }
            let disp = Dispersion::of(&column);
            mean.baselines[i][b] = disp.mean;
            baseline_sd[i][b] = disp.sd;
            entries.push(StationarityEntry {
                parameter: format!("baseline[{}][{}]", dim_name(d, i), b + 1),
                dispersion: disp,
                flagged: disp.exceeds(cv_threshold),
            });
        }
    }
    mean.counts = (0..d).map(|i| days.iter().map(|day| day.counts[i]).sum()).collect();
    mean.regularized = days.iter().any(|day| day.regularized);
    mean.projected_baselines = days.iter().map(|day| day.projected_baselines).sum();
    mean.filled_bins = Vec::new();
    let flagged = entries.iter().filter(|e| e.flagged).count();
    Ok(AggregateEstimate {
        mean,
        value_sd,
        baseline_sd,
        report: StationarityReport { days: days.len(), cv_threshold, flagged, entries },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_day_dispersion() {
        let disp = Dispersion::of(&[0.2, 0.4]);
        assert!((disp.mean - 0.3).abs() < 1e-15);
        assert!((disp.cv.unwrap() - (0.1 / 0.3) * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn identical_values_have_zero_cv() {
        let disp = Dispersion::of(&[1.5, 1.5, 1.5]);
        assert_eq!((disp.mean, disp.sd, disp.cv), (1.5, 0.0, Some(0.0)));
        assert!(!disp.exceeds(0.5));
    }

    #[test]
    fn zero_mean_with_spread_is_flagged() {
        let disp = Dispersion::of(&[-1.0, 1.0]);
        assert_eq!(disp.cv, None);
        assert!(disp.exceeds(0.5));
    }

    #[test]
    fn single_day_refused() {
        assert!(matches!(aggregate_days(&[], 0.5), Err(Error::InsufficientData(_))));
    }
}
