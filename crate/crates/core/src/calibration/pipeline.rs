//! End-to-end calibration over several days of classified events.
//!
//! Stage order: spread exponent, order sizes and revealed depth, per-day
//! kernel and baseline estimates (in parallel), cross-day aggregation,
//! parametric fit and model assembly.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::book::DepthDistribution;
use crate::calibration::aggregate::{aggregate_days, AggregateEstimate, DEFAULT_CV_THRESHOLD};
use crate::calibration::build::{build_model, CalibratedModel};
use crate::calibration::grid::{EstimationGrid, GridSpec};
use crate::calibration::nonparam::{estimate_nonparametric, EstimationWindow, NonParamEstimate, NonParamOptions};
use crate::calibration::spread::{estimate_spread_beta, SpreadBetaEstimate, SpreadOptions};
use crate::error::{invalid, Error, Result};
use crate::event::{ClassifiedEvent, EventType, OrderKind, QueueKey};
use crate::hawkes::model::{spectral_radius, DEFAULT_TOD_BINS, DEFAULT_TOD_BIN_SECONDS, NASDAQ_OPEN};
use crate::size::{fit_sizes_with, SizeTable, DEFAULT_MIN_SAMPLES, DEFAULT_SPIKES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub grid: GridSpec,
    pub nonparam: NonParamOptions,
    pub spread: SpreadOptions,
    /// Uses this exponent instead of estimating it.
    pub spread_beta: Option<f64>,
    pub cv_threshold: f64,
    pub tod_bin_seconds: f64,
    pub n_tod_bins: usize,
    /// Time of day of the session open, seconds after midnight.
    pub session_start: f64,
    /// Regression rows start here (seconds since session start); earlier
    /// events still act as history.
    pub window_start: f64,
    /// Regression rows end here; defaults to the session length.
    pub window_end: Option<f64>,
    pub size_spikes: Vec<u64>,
    pub size_min_samples: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            nonparam: NonParamOptions::default(),
            spread: SpreadOptions::default(),
            spread_beta: None,
            cv_threshold: DEFAULT_CV_THRESHOLD,
            tod_bin_seconds: DEFAULT_TOD_BIN_SECONDS,
            n_tod_bins: DEFAULT_TOD_BINS,
            session_start: NASDAQ_OPEN,
            window_start: 0.0,
            window_end: None,
            size_spikes: DEFAULT_SPIKES.to_vec(),
            size_min_samples: DEFAULT_MIN_SAMPLES,
        }
    }
}

impl CalibrationConfig {
    pub fn window(&self) -> EstimationWindow {
        let session = self.tod_bin_seconds * self.n_tod_bins as f64;
        EstimationWindow {
            start: self.window_start,
            end: self.window_end.unwrap_or(session),
            tod_bin_seconds: self.tod_bin_seconds,
            n_tod_bins: self.n_tod_bins,
        }
    }
}

/// One day of classified events, times in seconds since session start.
#[derive(Debug, Clone, PartialEq)]
pub struct DayEvents {
    pub id: String,
    pub events: Vec<ClassifiedEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DaySummary {
    pub day: String,
    pub events: usize,
    pub regularized: bool,
    pub projected_baselines: usize,
    pub nonparametric_spectral_radius: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutput {
    pub calibrated: CalibratedModel,
    /// `None` when the exponent was fixed in the configuration.
    pub spread_fit: Option<SpreadBetaEstimate>,
    pub aggregate: AggregateEstimate,
    pub days: Vec<DaySummary>,
}

/// Order sizes per event type, pooled over days. Cancels draw their size
/// from the book and get no distribution.
pub fn fit_size_table(days: &[DayEvents], spikes: &[u64], min_samples: usize) -> Result<SizeTable> {
    let mut table = SizeTable::new();
    for e in EventType::ALL.into_iter().filter(|e| e.kind() != OrderKind::Cancel) {
        let samples: Vec<u64> =
            days.iter().flat_map(|d| d.events.iter()).filter(|ev| ev.event_type() == e).map(|ev| ev.record.size).collect();
        let fit = fit_sizes_with(&samples, spikes, min_samples)
            .map_err(|err| Error::InsufficientData(format!("{}: {err}", e.name())))?;
        if !fit.converged {
            warn!("size fit for {} did not converge", e.name());
        }
        table.insert(e, fit.dist)?;
    }
    Ok(table)
}

/// Stand-in for revealed-level depth when no observations are supplied:
/// the empirical distribution of limit-order sizes at the best quotes.
pub fn depth_from_limit_orders(days: &[DayEvents]) -> Result<DepthDistribution> {
    let samples: Vec<u64> = days
        .iter()
        .flat_map(|d| d.events.iter())
        .filter(|ev| {
            let e = ev.event_type();
            e.kind() == OrderKind::Limit && matches!(e.queue(), QueueKey::Ask0 | QueueKey::Bid0)
        })
        .map(|ev| ev.record.size)
        .collect();
    if samples.is_empty() {
        return Err(Error::InsufficientData("no best-quote limit orders to build a depth distribution".into()));
    }
    DepthDistribution::from_samples(&samples)
}

pub fn calibrate(days: &[DayEvents], cfg: &CalibrationConfig, depth: Option<DepthDistribution>) -> Result<CalibrationOutput> {
    if days.len() < 2 {
        return Err(Error::InsufficientData(format!("insufficient days: calibration needs at least 2, got {}", days.len())));
    }
    let window = cfg.window();
    for d in days {
        crate::event::check_time_order(d.events.iter().map(|e| e.time()))
            .map_err(|e| invalid(format!("day {}: {e}", d.id)))?;
    }

    let spread_fit = match cfg.spread_beta {
        Some(b) => {
            if !(b > 0.0) {
                return Err(invalid(format!("fixed spread exponent must be > 0, got {b}")));
            }
            None
        }
        None => {
            let refs: Vec<&[ClassifiedEvent]> = days.iter().map(|d| d.events.as_slice()).collect();
            let fit = estimate_spread_beta(&refs, window.start, window.end, &cfg.spread)?;
            info!("spread exponent {:.4} (R² {:.3}, {} groups)", fit.beta, fit.r_squared, fit.groups.len());
            Some(fit)
        }
    };
    let beta = cfg.spread_beta.unwrap_or_else(|| spread_fit.as_ref().unwrap().beta);
    if !(beta > 0.0) {
        return Err(Error::Numerical(format!("estimated spread exponent {beta} is not positive")));
    }

    let sizes = fit_size_table(days, &cfg.size_spikes, cfg.size_min_samples)?;
    let depth = match depth {
        Some(d) => d,
        None => {
            warn!("no depth observations supplied; using best-quote limit-order sizes");
            depth_from_limit_orders(days)?
        }
    };

    let grid = EstimationGrid::new(cfg.grid)?;
    let estimates: Vec<NonParamEstimate> = days
        .par_iter()
        .map(|d| {
            estimate_nonparametric(&d.events, beta, &window, &grid, &cfg.nonparam)
                .map_err(|e| match e {
                    Error::InsufficientData(m) => Error::InsufficientData(format!("day {}: {m}", d.id)),
                    other => other,
                })
        })
        .collect::<Result<_>>()?;
    let summaries = days
        .iter()
        .zip(&estimates)
        .map(|(d, est)| {
            let n = est.dims();
            let norms = nalgebra::DMatrix::from_fn(n, n, |i, j| est.norm(i, j).abs());
            DaySummary {
                day: d.id.clone(),
                events: d.events.len(),
                regularized: est.regularized,
                projected_baselines: est.projected_baselines,
                nonparametric_spectral_radius: spectral_radius(&norms),
            }
        })
        .collect();

    let aggregate = aggregate_days(&estimates, cfg.cv_threshold)?;
    if aggregate.report.flagged > 0 {
        info!("{} parameters exceed the cross-day CV threshold", aggregate.report.flagged);
    }
    let calibrated = build_model(&aggregate, beta, sizes, depth, cfg.session_start)?;
    Ok(CalibrationOutput { calibrated, spread_fit, aggregate, days: summaries })
}
