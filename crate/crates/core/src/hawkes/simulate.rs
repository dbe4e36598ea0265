//! Ogata thinning for the floored, spread-scaled 12-dimensional process.
//!
//! Random draws per candidate, in order: exponential waiting time,
//! acceptance uniform; for an accepted candidate then the type uniform, the
//! size draw (or cancel selection) and any depth draws made by the book.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::book::{Applied, BookState, DepthDistribution};
use crate::error::{invalid, Error, Result};
use crate::event::{EventRecord, EventType, OrderKind, QueueKey, DIMENSIONS};
use crate::hawkes::excitation::{ExcitationState, DEFAULT_MAX_LOOKBACK, DEFAULT_TAIL_TOL};
use crate::hawkes::intensity::{effective_from_raw, state_scale};
use crate::hawkes::model::HawkesModel;
use crate::size::SizeTable;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    /// Rejected candidates older than this force a fresh bound, seconds.
    pub bound_staleness: f64,
    pub tail_tol: f64,
    pub max_lookback: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { bound_staleness: 0.1, tail_tol: DEFAULT_TAIL_TOL, max_lookback: DEFAULT_MAX_LOOKBACK }
    }
}

/// Book state right after an event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub event_type: EventType,
    pub size: u64,
    pub ask0_price: i64,
    pub bid0_price: i64,
    pub ask0_depth: u64,
    pub bid0_depth: u64,
    pub spread_ticks: i64,
    pub ask1_depth: u64,
    pub bid1_depth: u64,
}

impl TrajectoryPoint {
    pub fn capture(ev: &EventRecord, book: &BookState) -> Self {
        Self {
            time: ev.time,
            event_type: ev.event_type,
            size: ev.size,
            ask0_price: book.ask_price(),
            bid0_price: book.bid_price(),
            ask0_depth: book.depth(QueueKey::Ask0),
            bid0_depth: book.depth(QueueKey::Bid0),
            spread_ticks: book.spread_ticks(),
            ask1_depth: book.depth(QueueKey::AskPlus1),
            bid1_depth: book.depth(QueueKey::BidMinus1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimStep {
    pub event: EventRecord,
    /// Spread in force when the event arrived.
    pub spread_before: i64,
    pub applied: Applied,
}

/// Step-wise simulator; [`simulate`] collects a whole run.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: HawkesModel,
    sizes: SizeTable,
    depth: DepthDistribution,
    book: BookState,
    state: ExcitationState,
    rng: ChaCha8Rng,
    opts: SimOptions,
    t: f64,
    bound: f64,
    bound_time: f64,
    bound_bin: usize,
    dirty: bool,
    candidates: u64,
}

impl Simulator {
    pub fn new(
        model: &HawkesModel,
        sizes: &SizeTable,
        depth: &DepthDistribution,
        initial: BookState,
        seed: u64,
        opts: SimOptions,
    ) -> Result<Self> {
        model.check_stable()?;
        sizes.check_complete()?;
        initial.check_invariants()?;
        Ok(Self {
            model: model.clone(),
            sizes: sizes.clone(),
            depth: depth.clone(),
            book: initial,
            state: ExcitationState::with_lookback(model, opts.tail_tol, opts.max_lookback),
            rng: ChaCha8Rng::seed_from_u64(seed),
            opts,
            t: 0.0,
            bound: 0.0,
            bound_time: 0.0,
            bound_bin: 0,
            dirty: true,
            candidates: 0,
        })
    }

    pub fn book(&self) -> &BookState {
        &self.book
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    /// Candidate points drawn so far (accepted and rejected).
    pub fn candidates(&self) -> u64 {
        self.candidates
    }

    fn refresh_bound(&mut self) -> Result<()> {
        let bin = self.model.bin_index(self.t)?;
        let mut total = 0.0;
        for i in EventType::ALL {
            let scale = state_scale(i, &self.model, &self.book);
            if scale == 0.0 {
                continue;
            }
            let mu = self.model.baselines()[i.index()][bin];
            total += (mu + self.state.positive_bound(i.index())) * scale;
        }
        self.bound = total;
        self.bound_time = self.t;
        self.bound_bin = bin;
        self.dirty = false;
        Ok(())
    }

    fn intensities(&self) -> [f64; DIMENSIONS] {
        let mut out = [0.0; DIMENSIONS];
        for i in EventType::ALL {
            let mu = self.model.baselines()[i.index()][self.bound_bin];
            let raw = mu + self.state.excitation(i.index());
            out[i.index()] = effective_from_raw(i, raw, &self.model, &self.book);
        }
        out
    }

    /// Next event strictly before `horizon`, or `None` once the clock
    /// reaches it.
    pub fn next_event(&mut self, horizon: f64) -> Result<Option<SimStep>> {
        if horizon > self.model.session_length() {
            return Err(invalid(format!(
                "horizon {horizon} exceeds the session length {}",
                self.model.session_length()
            )));
        }
        loop {
            if self.t >= horizon {
                return Ok(None);
            }
            if self.dirty {
                self.refresh_bound()?;
            }
            // the per-bin bound is only valid up to the end of the bin
            let end = self.model.bin_end(self.bound_bin).min(horizon);
            if self.bound <= 0.0 {
                self.jump_to(end);
                continue;
            }
            let u: f64 = self.rng.gen();
            let cand = self.t - (1.0 - u).ln() / self.bound;
            self.candidates += 1;
            if cand >= end {
                self.jump_to(end);
                continue;
            }
            self.state.advance(cand);
            self.t = cand;
            let lambda = self.intensities();
            let total: f64 = lambda.iter().sum();
            if total > self.bound * (1.0 + 1e-9) {
                return Err(Error::Numerical(format!(
                    "thinning bound {} below total intensity {total} at t={cand}",
                    self.bound
                )));
            }
            let accept: f64 = self.rng.gen();
            if accept * self.bound < total {
                let pick: f64 = self.rng.gen::<f64>() * total;
                let mut acc = 0.0;
                let mut chosen = None;
                for (k, &l) in lambda.iter().enumerate() {
                    if l > 0.0 {
                        acc += l;
                        chosen = Some(k);
                        if pick < acc {
                            break;
                        }
                    }
                }
                let e = EventType::from_index(chosen.expect("positive total intensity")).unwrap();
                return self.emit(e).map(Some);
            }
            if self.t - self.bound_time > self.opts.bound_staleness {
                self.dirty = true;
            }
        }
    }

    fn jump_to(&mut self, t: f64) {
        self.state.advance(t);
        self.t = t;
        self.dirty = true;
    }

    fn emit(&mut self, e: EventType) -> Result<SimStep> {
        let ev = match e.kind() {
            OrderKind::Cancel => {
                let id = self.book.select_cancel_target(e.queue(), &mut self.rng)?;
                let size = self.book.order_size(e.queue(), id).expect("selected order is resting");
                EventRecord::new(self.t, e, size).with_order(id)
            }
            _ => {
                let dist = self.sizes.get(e).expect("size table checked at construction");
                let size = dist.sample(&mut self.rng);
                let mut ev = EventRecord::new(self.t, e, size);
                if e.kind() == OrderKind::Limit {
                    ev.order_id = Some(self.book.fresh_id());
                }
                ev
            }
        };
        let spread_before = self.book.spread_ticks();
        let applied = self.book.apply_event(&ev, &self.depth, &mut self.rng)?;
        // market orders report what actually traded
        let event = EventRecord { size: applied.executed, ..ev };
        self.state.record(e.index());
        self.dirty = true;
        Ok(SimStep { event, spread_before, applied })
    }
}

#[derive(Debug, Clone, Default)]
pub struct SimulationOutput {
    pub events: Vec<EventRecord>,
    pub trajectory: Vec<TrajectoryPoint>,
    /// Spread prevailing just before each event.
    pub spreads: Vec<i64>,
}

/// Simulates `[0, horizon)` seconds after the session start.
pub fn simulate(
    model: &HawkesModel,
    sizes: &SizeTable,
    depth: &DepthDistribution,
    initial: &BookState,
    horizon: f64,
    seed: u64,
) -> Result<SimulationOutput> {
    simulate_with(model, sizes, depth, initial, horizon, seed, SimOptions::default())
}

pub fn simulate_with(
    model: &HawkesModel,
    sizes: &SizeTable,
    depth: &DepthDistribution,
    initial: &BookState,
    horizon: f64,
    seed: u64,
    opts: SimOptions,
) -> Result<SimulationOutput> {
    let mut sim = Simulator::new(model, sizes, depth, initial.clone(), seed, opts)?;
    let mut out = SimulationOutput::default();
    while let Some(step) = sim.next_event(horizon)? {
        out.trajectory.push(TrajectoryPoint::capture(&step.event, sim.book()));
        out.spreads.push(step.spread_before);
        out.events.push(step.event);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes::kernel::Kernel;
    use crate::size::SizeDistribution;

    fn setup(rates: [f64; DIMENSIONS]) -> (HawkesModel, SizeTable, DepthDistribution, BookState) {
        let m = HawkesModel::poisson(rates, 0.5).unwrap();
        let sizes = SizeTable::uniform(SizeDistribution::geometric(0.05).unwrap());
        let depth = DepthDistribution::new(vec![100, 300], vec![0.5, 0.5]).unwrap();
        let book = BookState::with_depths(0.01, 1002, 1000, [200, 200, 200, 200]).unwrap();
        (m, sizes, depth, book)
    }

    #[test]
    fn zero_baselines_give_no_events() {
        let (m, s, d, b) = setup([0.0; DIMENSIONS]);
        let out = simulate(&m, &s, &d, &b, 1000.0, 1).unwrap();
        assert!(out.events.is_empty());
    }

    #[test]
    fn same_seed_same_stream() {
        let (mut m, s, d, b) = setup([0.5; DIMENSIONS]);
        m.set_kernel(EventType::MoAsk0, EventType::LoAsk0, Kernel::exponential(2.0, 8.0).unwrap()).unwrap();
        let a = simulate(&m, &s, &d, &b, 200.0, 7).unwrap();
        let b2 = simulate(&m, &s, &d, &b, 200.0, 7).unwrap();
        assert_eq!(a.events, b2.events);
        let c = simulate(&m, &s, &d, &b, 200.0, 8).unwrap();
        assert_ne!(a.events, c.events);
    }

    #[test]
    fn unstable_model_refused() {
        let (mut m, s, d, b) = setup([0.5; DIMENSIONS]);
        m.set_kernel(EventType::LoAsk0, EventType::LoAsk0, Kernel::exponential(3.0, 2.0).unwrap()).unwrap();
        assert!(matches!(simulate(&m, &s, &d, &b, 10.0, 1), Err(Error::Unstable(_))));
    }

    #[test]
    fn horizon_beyond_session_refused() {
        let (m, s, d, b) = setup([0.5; DIMENSIONS]);
        assert!(simulate(&m, &s, &d, &b, 23_401.0, 1).is_err());
    }

    #[test]
    fn stream_is_sorted_and_book_stays_valid() {
        let (mut m, s, d, b) = setup([1.0; DIMENSIONS]);
        m.set_kernel(EventType::LoBid0, EventType::MoAsk0, Kernel::exponential(-4.0, 5.0).unwrap()).unwrap();
        m.set_kernel(EventType::LoAskMinus1, EventType::MoAsk0, Kernel::power_law(1.0, 0.05, 2.5).unwrap())
            .unwrap();
        let out = simulate(&m, &s, &d, &b, 500.0, 3).unwrap();
        assert!(out.events.len() > 1000);
        assert!(out.events.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(out.trajectory.iter().all(|p| p.spread_ticks >= 0));
        for (ev, &s) in out.events.iter().zip(&out.spreads) {
            if ev.event_type.is_in_spread() {
                assert!(s >= 1);
            }
            assert!(ev.size >= 1);
        }
    }
}
