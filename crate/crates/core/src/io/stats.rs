//! Descriptive statistics of a classified session.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, violation, Result};
use crate::event::{ClassifiedEvent, EventType, OrderKind, DIMENSIONS};
use crate::hawkes::{TrajectoryPoint, DEFAULT_TOD_BINS, DEFAULT_TOD_BIN_SECONDS};
use crate::size::DEFAULT_SPIKES;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsOptions {
    pub spikes: Vec<u64>,
    pub session_length: f64,
    pub coarse_bin_seconds: f64,
    pub fine_bin_seconds: f64,
}

impl Default for StatsOptions {
    fn default() -> Self {
        Self {
            spikes: DEFAULT_SPIKES.to_vec(),
            session_length: DEFAULT_TOD_BIN_SECONDS * DEFAULT_TOD_BINS as f64,
            coarse_bin_seconds: DEFAULT_TOD_BIN_SECONDS,
            fine_bin_seconds: 600.0,
        }
    }
}

/// Count, mean and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub sd: f64,
}

impl Moments {
    pub fn of_histogram(hist: &BTreeMap<i64, u64>) -> Option<Self> {
        let n: u64 = hist.values().sum();
        if n == 0 {
            return None;
        }
        let mean = hist.iter().map(|(&v, &c)| v as f64 * c as f64).sum::<f64>() / n as f64;
        let ss = hist.iter().map(|(&v, &c)| (v as f64 - mean).powi(2) * c as f64).sum::<f64>();
        let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
        Some(Self { n, mean, sd })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogBin {
    pub lo: u64,
    /// Exclusive.
    pub hi: u64,
    pub count: u64,
    /// count / (total · width)
    pub density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeMass {
    pub size: u64,
    pub mass: f64,
    /// Mean mass of the two neighbouring sizes.
    pub neighbour_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeStats {
    pub event_type: EventType,
    pub count: u64,
    pub mean: f64,
    /// (size, count) for every observed size.
    pub histogram: Vec<(u64, u64)>,
    /// Powers-of-two bins for log-log plots.
    pub log_bins: Vec<LogBin>,
    pub spikes: Vec<SpikeMass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TodProfile {
    pub bin_seconds: f64,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalStats {
    pub events: u64,
    pub sizes: Vec<SizeStats>,
    /// Tick distance of in-spread limit orders from the previous best quote.
    pub in_spread_distance: Option<Moments>,
    /// Tick jump of a best quote after it emptied.
    pub price_change_gap: Option<Moments>,
    /// (depth, count) of the level revealed one tick beyond a new best quote.
    pub revealed_depth: Vec<(u64, u64)>,
    pub tod_coarse: TodProfile,
    pub tod_fine: TodProfile,
}

fn size_stats(e: EventType, sizes: &[u64], spikes: &[u64]) -> SizeStats {
    let mut hist: BTreeMap<u64, u64> = BTreeMap::new();
    for &s in sizes {
        *hist.entry(s).or_default() += 1;
    }
    let n = sizes.len() as u64;
    let total = n.max(1) as f64;
    let mass = |k: u64| hist.get(&k).copied().unwrap_or(0) as f64 / total;
    let mut log_bins = Vec::new();
    if let Some(&max) = hist.keys().next_back() {
        let mut lo = 1u64;
        while lo <= max {
            let hi = lo.saturating_mul(2);
            let count: u64 = hist.range(lo..hi).map(|(_, c)| c).sum();
            log_bins.push(LogBin { lo, hi, count, density: count as f64 / (total * (hi - lo) as f64) });
            lo = hi;
        }
    }
    SizeStats {
        event_type: e,
        count: n,
        mean: sizes.iter().sum::<u64>() as f64 / total,
        histogram: hist.iter().map(|(&k, &c)| (k, c)).collect(),
        log_bins,
        spikes: spikes
            .iter()
            .map(|&s| SpikeMass {
                size: s,
                mass: mass(s),
                neighbour_mass: 0.5 * (if s > 0 { mass(s - 1) } else { 0.0 } + mass(s + 1)),
            })
            .collect(),
    }
}

fn profile(events: &[ClassifiedEvent], length: f64, width: f64) -> TodProfile {
    let bins = (length / width).ceil().max(1.0) as usize;
    let mut counts = vec![0u64; bins];
    for e in events {
        let t = e.time();
        if t >= 0.0 && t < length {
            counts[((t / width) as usize).min(bins - 1)] += 1;
        }
    }
    TodProfile { bin_seconds: width, counts }
}

/// Statistics of one session. Price-based quantities need the book
/// trajectory (the book after each event).
pub fn empirical_stats(
    events: &[ClassifiedEvent],
    trajectory: Option<&[TrajectoryPoint]>,
    opts: &StatsOptions,
) -> Result<EmpiricalStats> {
    if !(opts.session_length > 0.0 && opts.coarse_bin_seconds > 0.0 && opts.fine_bin_seconds > 0.0) {
        return Err(invalid("session length and bin widths must be positive"));
    }
    let mut by_type: Vec<Vec<u64>> = vec![Vec::new(); DIMENSIONS];
    for e in events {
        by_type[e.event_type().index()].push(e.record.size);
    }
    let sizes = EventType::ALL.iter().map(|&e| size_stats(e, &by_type[e.index()], &opts.spikes)).collect();

    let mut in_spread: BTreeMap<i64, u64> = BTreeMap::new();
    let mut gaps: BTreeMap<i64, u64> = BTreeMap::new();
    let mut revealed: BTreeMap<u64, u64> = BTreeMap::new();
    if let Some(tr) = trajectory {
        if tr.len() != events.len() {
            return Err(violation(format!("{} events but {} trajectory points", events.len(), tr.len())));
        }
        for k in 1..tr.len() {
            let (prev, cur) = (&tr[k - 1], &tr[k]);
            if cur.time != events[k].time() || cur.event_type != events[k].event_type() {
                return Err(violation(format!("trajectory point {k} does not match its event")));
            }
            match cur.event_type {
                EventType::LoAskMinus1 => *in_spread.entry(prev.ask0_price - cur.ask0_price).or_default() += 1,
                EventType::LoBidPlus1 => *in_spread.entry(cur.bid0_price - prev.bid0_price).or_default() += 1,
                e if e.kind() != OrderKind::Limit => {
                    if cur.ask0_price > prev.ask0_price {
                        *gaps.entry(cur.ask0_price - prev.ask0_price).or_default() += 1;
                        *revealed.entry(cur.ask1_depth).or_default() += 1;
                    }
                    if cur.bid0_price < prev.bid0_price {
                        *gaps.entry(prev.bid0_price - cur.bid0_price).or_default() += 1;
                        *revealed.entry(cur.bid1_depth).or_default() += 1;
                    }
                }
                _ => {}
            }
        }
    }
    Ok(EmpiricalStats {
        events: events.len() as u64,
        sizes,
        in_spread_distance: Moments::of_histogram(&in_spread),
        price_change_gap: Moments::of_histogram(&gaps),
        revealed_depth: revealed.into_iter().collect(),
        tod_coarse: profile(events, opts.session_length, opts.coarse_bin_seconds),
        tod_fine: profile(events, opts.session_length, opts.fine_bin_seconds),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::EventRecord;

    fn ev(t: f64, e: EventType, size: u64) -> ClassifiedEvent {
        ClassifiedEvent { record: EventRecord::new(t, e, size), spread_ticks: 1 }
    }

    fn tp(ev: &ClassifiedEvent, ask: i64, bid: i64) -> TrajectoryPoint {
        TrajectoryPoint {
            time: ev.time(),
            event_type: ev.event_type(),
            size: ev.record.size,
            ask0_price: ask,
            bid0_price: bid,
            ask0_depth: 100,
            bid0_depth: 100,
            spread_ticks: ask - bid,
            ask1_depth: 250,
            bid1_depth: 250,
        }
    }

    #[test]
    fn spike_mass_and_histogram() {
        let events: Vec<_> = [100, 100, 100, 37, 99].iter().enumerate().map(|(k, &s)| ev(k as f64, EventType::LoAsk0, s)).collect();
        let st = empirical_stats(&events, None, &StatsOptions::default()).unwrap();
        let lo = &st.sizes[EventType::LoAsk0.index()];
        assert_eq!(lo.count, 5);
        let s100 = lo.spikes.iter().find(|s| s.size == 100).unwrap();
        assert!((s100.mass - 0.6).abs() < 1e-15 && (s100.neighbour_mass - 0.1).abs() < 1e-15);
        assert_eq!(lo.log_bins.iter().map(|b| b.count).sum::<u64>(), 5);
        assert!(st.in_spread_distance.is_none());
    }

    #[test]
    fn uniform_sizes_have_no_spike_excess() {
        let events: Vec<_> = (1..=1000u64).map(|s| ev(s as f64, EventType::MoBid0, s)).collect();
        let st = empirical_stats(&events, None, &StatsOptions::default()).unwrap();
        for s in &st.sizes[EventType::MoBid0.index()].spikes {
            assert!((s.mass - s.neighbour_mass).abs() < 1e-12 || s.size == 1);
        }
    }

    #[test]
    fn constant_one_tick_spread_gives_unit_distances() {
        // alternate in-spread orders and cancels that restore the quotes
        let mut events = Vec::new();
        let mut traj = Vec::new();
        let (mut ask, mut bid) = (101, 100);
        for k in 0..20 {
            let t = k as f64;
            let e = if k % 2 == 0 { ev(t, EventType::LoAskMinus1, 100) } else { ev(t, EventType::CoAsk0, 100) };
            if k % 2 == 0 {
                ask -= 1;
            } else {
                ask += 1;
            }
            let _ = &mut bid;
            traj.push(tp(&e, ask, bid));
            events.push(e);
        }
        let st = empirical_stats(&events, Some(&traj), &StatsOptions::default()).unwrap();
        let d = st.in_spread_distance.unwrap();
        assert_eq!((d.mean, d.sd), (1.0, 0.0));
        let g = st.price_change_gap.unwrap();
        assert_eq!((g.n, g.mean), (10, 1.0));
        assert_eq!(st.revealed_depth, vec![(250, 10)]);
    }

    #[test]
    fn tod_profiles_cover_the_session() {
        let events = vec![ev(10.0, EventType::LoAsk0, 1), ev(700.0, EventType::LoAsk0, 1), ev(23_399.0, EventType::LoAsk0, 1)];
        let st = empirical_stats(&events, None, &StatsOptions::default()).unwrap();
        assert_eq!(st.tod_coarse.counts.len(), 13);
        assert_eq!(st.tod_fine.counts.len(), 39);
        assert_eq!((st.tod_fine.counts[0], st.tod_fine.counts[1], st.tod_fine.counts[38]), (1, 1, 1));
    }
}
