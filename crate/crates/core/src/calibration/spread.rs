//! Spread exponent regression: the in-spread arrival rate is approximated
//! by the number of in-spread limit orders in short windows, grouped by the
//! spread at the start of the window, and ln(mean count) is regressed on
//! ln(spread) over spreads of at least two ticks.
//!
//! Baselines move with the time of day and so does the spread distribution,
//! which confounds a pooled regression. By default groups are therefore
//! formed per (time-of-day bin, spread) and the slope is estimated within
//! bins, i.e. with one intercept per bin.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::event::ClassifiedEvent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpreadOptions {
    /// Counting window, seconds.
    pub window: f64,
    /// Spread groups observed in fewer windows are dropped.
    pub min_windows: u64,
    /// Width of the time-of-day strata, seconds; `None` pools the whole day.
    pub stratum_seconds: Option<f64>,
}

impl Default for SpreadOptions {
    fn default() -> Self {
        Self { window: 0.01, min_windows: 1000, stratum_seconds: Some(1800.0) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadGroup {
    pub stratum: usize,
    pub spread_ticks: i64,
    pub windows: u64,
    pub arrivals: u64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadBetaEstimate {
    pub beta: f64,
    /// Intercept per stratum (ln mean count at one tick).
    pub intercepts: Vec<(usize, f64)>,
    /// Share of the within-stratum variation of ln(mean) explained.
    pub r_squared: f64,
    pub groups: Vec<SpreadGroup>,
}

/// Window and arrival counts per spread, pooled over days.
#[derive(Debug, Clone, Default)]
pub struct SpreadAccumulator {
    // (stratum, spread) → (windows, arrivals)
    groups: BTreeMap<(usize, i64), (u64, u64)>,
    stratum_seconds: Option<f64>,
}

impl SpreadAccumulator {
    pub fn new(stratum_seconds: Option<f64>) -> Self {
        Self { groups: BTreeMap::new(), stratum_seconds }
    }

    fn stratum(&self, t: f64) -> usize {
        self.stratum_seconds.map_or(0, |w| (t / w).floor().max(0.0) as usize)
    }

    /// Adds one day. Windows tile `[start, end)`; each is labelled with the
    /// spread in force at its start, read from the next event's pre-event
    /// spread. Windows after the last event carry no spread and are skipped.
    pub fn add_day(&mut self, events: &[ClassifiedEvent], start: f64, end: f64, window: f64) -> Result<()> {
        if !(window > 0.0) || !(end > start) {
            return Err(invalid("spread regression needs a positive window and a non-empty day"));
        }
        if self.stratum_seconds.is_some_and(|w| !(w > 0.0)) {
            return Err(invalid("stratum width must be positive"));
        }
        let times: Vec<f64> = events.iter().map(|e| e.time()).collect();
        crate::event::check_time_order(times.iter().copied())?;
        let n_windows = ((end - start) / window).floor() as u64;
        let start_of = |m: u64| start + m as f64 * window;
        // spread at time w: pre-event spread of the first event at or after w
        let spread_at = |w: f64| -> Option<i64> {
            let k = times.partition_point(|&t| t < w);
            events.get(k).map(|e| e.spread_ticks)
        };
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for e in events.iter().filter(|e| e.event_type().is_in_spread()) {
            let t = e.time();
            if t < start || t >= end {
                continue;
            }
            let m = ((t - start) / window).floor() as u64;
            if m < n_windows {
                *counts.entry(m).or_default() += 1;
            }
        }
        // walk windows interval by interval between consecutive events
        let mut m = 0u64;
        for (k, e) in events.iter().enumerate() {
            let t = times[k];
            while m < n_windows && start_of(m) <= t {
                let key = (self.stratum(start_of(m)), e.spread_ticks);
                self.groups.entry(key).or_default().0 += 1;
                m += 1;
            }
        }
        for (w, c) in counts {
            if let Some(s) = spread_at(start_of(w)) {
                let key = (self.stratum(start_of(w)), s);
                self.groups.entry(key).or_default().1 += c;
            }
        }
        Ok(())
    }

    pub fn groups(&self) -> Vec<SpreadGroup> {
        self.groups
            .iter()
            .map(|(&(stratum, s), &(w, a))| SpreadGroup {
                stratum,
                spread_ticks: s,
                windows: w,
                arrivals: a,
                mean: if w > 0 { a as f64 / w as f64 } else { 0.0 },
            })
            .collect()
    }

    pub fn finish(&self, opts: &SpreadOptions) -> Result<SpreadBetaEstimate> {
        let used: Vec<SpreadGroup> = self
            .groups()
            .into_iter()
            .filter(|g| g.spread_ticks >= 2 && g.windows >= opts.min_windows && g.mean > 0.0)
            .collect();
        let mut spreads: Vec<i64> = used.iter().map(|g| g.spread_ticks).collect();
        spreads.sort_unstable();
        spreads.dedup();
        if spreads.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "{} usable spread groups with s >= 2, need 3",
                spreads.len()
            )));
        }
        let mut strata: BTreeMap<usize, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for g in &used {
            let entry = strata.entry(g.stratum).or_default();
            entry.0.push((g.spread_ticks as f64).ln());
            entry.1.push(g.mean.ln());
        }
        let groups: Vec<(Vec<f64>, Vec<f64>)> = strata.values().cloned().collect();
        let (beta, r_squared) = within_ols(&groups);
        if !beta.is_finite() {
            return Err(Error::InsufficientData("no stratum has two distinct spreads".into()));
        }
        let intercepts = strata
            .iter()
            .map(|(&k, (x, y))| {
                let n = x.len() as f64;
                (k, y.iter().sum::<f64>() / n - beta * x.iter().sum::<f64>() / n)
            })
            .collect();
        Ok(SpreadBetaEstimate { beta, intercepts, r_squared, groups: used })
    }
}

/// Common slope of y on x with a separate intercept per group; returns the
/// slope and the within-group R².
fn within_ols(groups: &[(Vec<f64>, Vec<f64>)]) -> (f64, f64) {
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in groups {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        for (a, b) in x.iter().zip(y) {
            sxy += (a - mx) * (b - my);
            sxx += (a - mx) * (a - mx);
            syy += (b - my) * (b - my);
        }
    }
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (sxy / sxx, r2)
}

/// Estimates β from several days of classified events over `[start, end)`.
pub fn estimate_spread_beta(
    days: &[&[ClassifiedEvent]],
    start: f64,
    end: f64,
    opts: &SpreadOptions,
) -> Result<SpreadBetaEstimate> {
    let mut acc = SpreadAccumulator::new(opts.stratum_seconds);
    for day in days {
        acc.add_day(day, start, end, opts.window)?;
    }
    acc.finish(opts)
}
