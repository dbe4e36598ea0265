//! Time-rescaling residuals.
//!
//! The compensator Λ_i(t) = ∫ λ_i(u) du of the effective intensity is
//! integrated event to event. Between events the book is constant, so each
//! piece is the floored raw intensity times a constant state factor.
//! Wherever the raw intensity provably stays non-negative the integral is
//! closed form; elsewhere the piece is cut into substeps of at most
//! [`MAX_SUBSTEP`] seconds and bisected until the sign is decided.

use serde::{Deserialize, Serialize};

use crate::book::BookState;
use crate::diagnostics::ks::{ks_exponential, KsResult};
use crate::error::{invalid, violation, Error, Result};
use crate::event::{ClassifiedEvent, EventRecord, EventType, QueueKey, DIMENSIONS};
use crate::hawkes::{ExcitationState, HawkesModel, TrajectoryPoint};

/// Longest substep used where the floor may bind, seconds.
pub const MAX_SUBSTEP: f64 = 1e-3;
const MAX_BISECTIONS: u32 = 40;

/// Book features that scale intensities: the spread and which of the
/// queues targeted by cancels and market orders are empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookCondition {
    pub spread_ticks: i64,
    /// Indexed by [`QueueKey::index`].
    pub empty: [bool; 6],
}

impl BookCondition {
    /// Spread only; every queue is taken to be non-empty.
    pub fn with_spread(spread_ticks: i64) -> Self {
        Self { spread_ticks, empty: [false; 6] }
    }

    pub fn of(book: &BookState) -> Self {
        let mut empty = [false; 6];
        for q in QueueKey::ALL {
            empty[q.index()] = book.depth(q) == 0;
        }
        Self { spread_ticks: book.spread_ticks(), empty }
    }

    pub fn after(point: &TrajectoryPoint) -> Self {
        let mut empty = [false; 6];
        empty[QueueKey::Ask0.index()] = point.ask0_depth == 0;
        empty[QueueKey::Bid0.index()] = point.bid0_depth == 0;
        empty[QueueKey::AskPlus1.index()] = point.ask1_depth == 0;
        empty[QueueKey::BidMinus1.index()] = point.bid1_depth == 0;
        Self { spread_ticks: point.spread_ticks, empty }
    }

    /// Factor applied to the floored raw intensity of `i`.
    pub fn scale(&self, i: EventType, model: &HawkesModel) -> f64 {
        if i.consumes_liquidity() && self.empty[i.queue().index()] {
            0.0
        } else if i.is_in_spread() {
            model.spread_factor(self.spread_ticks)
        } else {
            1.0
        }
    }
}

/// Book conditions aligned with an event stream: entry k holds between
/// event k − 1 and event k.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    pub events: Vec<EventRecord>,
    pub before: Vec<BookCondition>,
}

impl StatePath {
    /// From a simulated trajectory and the book the simulation started from.
    pub fn from_trajectory(events: &[EventRecord], trajectory: &[TrajectoryPoint], initial: &BookState) -> Result<Self> {
        if events.len() != trajectory.len() {
            return Err(violation(format!(
                "{} events but {} trajectory points",
                events.len(),
                trajectory.len()
            )));
        }
        let mut before = Vec::with_capacity(events.len());
        let mut cond = BookCondition::of(initial);
        for (k, (ev, p)) in events.iter().zip(trajectory).enumerate() {
            if ev.time != p.time || ev.event_type != p.event_type {
                return Err(violation(format!("trajectory point {k} does not match its event")));
            }
            before.push(cond);
            cond = BookCondition::after(p);
        }
        Self::checked(events.to_vec(), before)
    }

    /// From classified events, which carry the spread in force before each
    /// event but not the queue depths.
    pub fn from_classified(events: &[ClassifiedEvent]) -> Result<Self> {
        let before = events.iter().map(|e| BookCondition::with_spread(e.spread_ticks)).collect();
        Self::checked(events.iter().map(|e| e.record).collect(), before)
    }

    fn checked(events: Vec<EventRecord>, before: Vec<BookCondition>) -> Result<Self> {
        crate::event::check_time_order(events.iter().map(|e| e.time))?;
        Ok(Self { events, before })
    }
}

/// Running compensator of all dimensions.
#[derive(Debug, Clone)]
pub struct Compensator<'a> {
    model: &'a HawkesModel,
    state: ExcitationState,
    totals: [f64; DIMENSIONS],
    substeps: u64,
}

impl<'a> Compensator<'a> {
    /// Starts at time `start` with an empty history.
    pub fn new(model: &'a HawkesModel, start: f64) -> Self {
        let mut state = ExcitationState::new(model);
        state.advance(start);
        Self { model, state, totals: [0.0; DIMENSIONS], substeps: 0 }
    }

    pub fn time(&self) -> f64 {
        self.state.time()
    }

    /// Λ_i accumulated since the start.
    pub fn totals(&self) -> &[f64; DIMENSIONS] {
        &self.totals
    }

    /// Number of pieces that needed substepping.
    pub fn substeps(&self) -> u64 {
        self.substeps
    }

    /// Registers an event at the current time.
    pub fn record(&mut self, e: EventType) {
        self.state.record(e.index());
    }

    /// Integrates up to `t` under a constant book condition.
    pub fn integrate_to(&mut self, t: f64, cond: &BookCondition) -> Result<()> {
        let now = self.state.time();
        if t < now {
            return Err(violation(format!("compensator asked to move back from {now} to {t}")));
        }
        let mut a = now;
        while a < t {
            let bin = self.model.bin_index(a)?;
            let b = t.min(self.model.bin_end(bin));
            // rounding at a bin edge
            let b = if b <= a { t } else { b };
            self.integrate_piece(bin, b - a, cond)?;
            self.state.advance(b);
            a = b;
        }
        Ok(())
    }

    fn integrate_piece(&mut self, bin: usize, h: f64, cond: &BookCondition) -> Result<()> {
        for i in EventType::ALL {
            let scale = cond.scale(i, self.model);
            if scale == 0.0 {
                continue;
            }
            let k = i.index();
            let mu = self.model.baselines()[k][bin];
            let (lo, hi) = self.state.range_in(k, 0.0, h);
            let piece = if mu + lo >= 0.0 {
                mu * h + self.state.integral_in(k, 0.0, h)
            } else if mu + hi <= 0.0 {
                0.0
            } else {
                self.substeps += 1;
                let n = (h / MAX_SUBSTEP).ceil().max(1.0) as usize;
                let mut acc = 0.0;
                for m in 0..n {
                    let d0 = h * m as f64 / n as f64;
                    let d1 = h * (m + 1) as f64 / n as f64;
                    acc += floored(&self.state, k, mu, d0, d1, MAX_BISECTIONS);
                }
                acc
            };
            let piece = scale * piece.max(0.0);
            if !piece.is_finite() {
                return Err(Error::Numerical(format!("compensator of {} is not finite", i.name())));
            }
            self.totals[k] += piece;
        }
        Ok(())
    }
}

/// ∫ max(0, μ + E(u)) du over `[now + d0, now + d1]`.
fn floored(state: &ExcitationState, k: usize, mu: f64, d0: f64, d1: f64, depth: u32) -> f64 {
    let (lo, hi) = state.range_in(k, d0, d1);
    if mu + lo >= 0.0 {
        return mu * (d1 - d0) + state.integral_in(k, d0, d1);
    }
    if mu + hi <= 0.0 {
        return 0.0;
    }
    if depth == 0 {
        let fa = (mu + state.excitation_in(k, d0)).max(0.0);
        let fb = (mu + state.excitation_in(k, d1)).max(0.0);
        return 0.5 * (fa + fb) * (d1 - d0);
    }
    let mid = 0.5 * (d0 + d1);
    floored(state, k, mu, d0, mid, depth - 1) + floored(state, k, mu, mid, d1, depth - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub event_type: EventType,
    /// τ_k = Λ(t_k) − Λ(t_{k−1}) over consecutive events of this type.
    pub taus: Vec<f64>,
    /// `None` with fewer than two residuals.
    pub ks: Option<KsResult>,
}

/// Residuals of every dimension, in [`EventType::ALL`] order.
pub fn compute_residuals(model: &HawkesModel, path: &StatePath) -> Result<Vec<ResidualSeries>> {
    if path.events.len() != path.before.len() {
        return Err(violation("state path is misaligned with its events"));
    }
    let mut taus: Vec<Vec<f64>> = vec![Vec::new(); DIMENSIONS];
    let Some(first) = path.events.first() else {
        return Ok(series(taus));
    };
    if first.time < 0.0 {
        return Err(invalid(format!("event time {} before the session start", first.time)));
    }
    let mut comp = Compensator::new(model, first.time);
    let mut last: [Option<f64>; DIMENSIONS] = [None; DIMENSIONS];
    for (ev, cond) in path.events.iter().zip(&path.before) {
        comp.integrate_to(ev.time, cond)?;
        let k = ev.event_type.index();
        let total = comp.totals()[k];
        if let Some(prev) = last[k] {
            let tau = total - prev;
            debug_assert!(tau >= 0.0, "negative residual {tau}");
            taus[k].push(tau);
        }
        last[k] = Some(total);
        comp.record(ev.event_type);
    }
    Ok(series(taus))
}

fn series(taus: Vec<Vec<f64>>) -> Vec<ResidualSeries> {
    taus.into_iter()
        .enumerate()
        .map(|(k, t)| ResidualSeries {
            event_type: EventType::from_index(k).expect("index below DIMENSIONS"),
            ks: (t.len() >= 2).then(|| ks_exponential(&t)),
            taus: t,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes::Kernel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn poisson_path(rate: f64, horizon: f64, seed: u64) -> StatePath {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = 0.0;
        let mut events = Vec::new();
        loop {
            t += -(1.0 - rng.gen::<f64>()).ln() / (rate * DIMENSIONS as f64);
            if t >= horizon {
                break;
            }
            let e = EventType::from_index(rng.gen_range(0..DIMENSIONS)).unwrap();
            events.push(EventRecord::new(t, e, 100));
        }
        let before = vec![BookCondition::with_spread(1); events.len()];
        StatePath { events, before }
    }

    fn exp_model(alpha: f64, beta: f64) -> HawkesModel {
        let mut m = HawkesModel::poisson([0.4; DIMENSIONS], 0.5).unwrap();
        m.set_kernel(EventType::LoAsk0, EventType::MoAsk0, Kernel::exponential(alpha, beta).unwrap()).unwrap();
        m.set_kernel(EventType::MoAsk0, EventType::MoAsk0, Kernel::exponential(alpha * 0.5, beta * 2.0).unwrap())
            .unwrap();
        m
    }

    fn closed_form(m: &HawkesModel, i: EventType, events: &[EventRecord], a: f64, b: f64) -> f64 {
        let mut acc = m.baseline(i, a).unwrap() * (b - a);
        for ev in events.iter().filter(|e| e.time <= a) {
            if let Kernel::Exponential { alpha, beta } = *m.kernel(i, ev.event_type) {
                acc += alpha / beta * ((-beta * (a - ev.time)).exp() - (-beta * (b - ev.time)).exp());
            }
        }
        acc
    }

    #[test]
    fn matches_closed_form_exponential_compensator() {
        let m = exp_model(0.8, 5.0);
        let path = poisson_path(0.4, 60.0, 3);
        let mut comp = Compensator::new(&m, path.events[0].time);
        let mut expected = [0.0; DIMENSIONS];
        for (k, ev) in path.events.iter().enumerate() {
            if k > 0 {
                let a = path.events[k - 1].time;
                for i in EventType::ALL {
                    expected[i.index()] += closed_form(&m, i, &path.events[..k], a, ev.time);
                }
            }
            comp.integrate_to(ev.time, &path.before[k]).unwrap();
            comp.record(ev.event_type);
        }
        for k in 0..DIMENSIONS {
            let rel = (comp.totals()[k] - expected[k]).abs() / expected[k];
            assert!(rel < 1e-6, "dimension {k}: {} vs {}", comp.totals()[k], expected[k]);
        }
        assert_eq!(comp.substeps(), 0);
    }

    #[test]
    fn additive_over_split_intervals() {
        // strong inhibition forces the floored path
        let m = exp_model(-3.0, 4.0);
        let path = poisson_path(0.4, 30.0, 5);
        let run = |split: bool| {
            let mut comp = Compensator::new(&m, 0.0);
            for (ev, cond) in path.events.iter().zip(&path.before) {
                if split {
                    let mid = 0.5 * (comp.time() + ev.time);
                    comp.integrate_to(mid, cond).unwrap();
                }
                comp.integrate_to(ev.time, cond).unwrap();
                comp.record(ev.event_type);
            }
            (*comp.totals(), comp.substeps())
        };
        let (whole, substeps) = run(false);
        let (halves, _) = run(true);
        assert!(substeps > 0);
        for k in 0..DIMENSIONS {
            assert!((whole[k] - halves[k]).abs() <= 1e-8 * whole[k].max(1.0), "dimension {k}");
        }
    }

    #[test]
    fn floored_integral_matches_fine_quadrature() {
        let m = exp_model(-3.0, 4.0);
        let mut comp = Compensator::new(&m, 0.0);
        comp.record(EventType::MoAsk0);
        comp.integrate_to(2.0, &BookCondition::with_spread(1)).unwrap();
        // λ = max(0, 0.4 − 3 e^{−4u}) crosses zero at u* = ln(7.5)/4
        let u = (7.5f64).ln() / 4.0;
        let exact = 0.4 * (2.0 - u) - 3.0 / 4.0 * ((-4.0 * u).exp() - (-8.0f64).exp());
        assert!((comp.totals()[EventType::LoAsk0.index()] - exact).abs() < 1e-9);
    }

    #[test]
    fn poisson_residuals_are_unit_exponential() {
        let m = HawkesModel::poisson([0.4; DIMENSIONS], 0.5).unwrap();
        let path = poisson_path(0.4, 2000.0, 11);
        let res = compute_residuals(&m, &path).unwrap();
        let passed = res.iter().filter(|r| r.ks.unwrap().p_value > 0.01).count();
        assert!(passed >= 11, "{passed} of 12 pass");
        for r in &res {
            let mean = r.taus.iter().sum::<f64>() / r.taus.len() as f64;
            assert!((mean - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn halved_baselines_halve_residuals() {
        let m = HawkesModel::poisson([0.2; DIMENSIONS], 0.5).unwrap();
        let path = poisson_path(0.4, 2000.0, 12);
        let res = compute_residuals(&m, &path).unwrap();
        for r in &res {
            let mean = r.taus.iter().sum::<f64>() / r.taus.len() as f64;
            assert!((mean - 0.5).abs() < 0.05);
            assert!(r.ks.unwrap().p_value < 1e-6);
        }
    }

    #[test]
    fn empty_queues_and_spread_scale_the_compensator() {
        let m = HawkesModel::poisson([1.0; DIMENSIONS], 0.5).unwrap();
        let mut cond = BookCondition::with_spread(4);
        cond.empty[QueueKey::Ask0.index()] = true;
        let mut comp = Compensator::new(&m, 0.0);
        comp.integrate_to(1.0, &cond).unwrap();
        let t = comp.totals();
        assert_eq!(t[EventType::MoAsk0.index()], 0.0);
        assert_eq!(t[EventType::CoAsk0.index()], 0.0);
        assert!((t[EventType::LoAsk0.index()] - 1.0).abs() < 1e-15);
        assert!((t[EventType::LoAskMinus1.index()] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn misaligned_trajectory_refused() {
        let book = BookState::with_depths(0.01, 1002, 1000, [100; 4]).unwrap();
        let events = vec![EventRecord::new(1.0, EventType::LoAsk0, 100)];
        let mut point = TrajectoryPoint::capture(&events[0], &book);
        point.time = 1.5;
        assert!(matches!(
            StatePath::from_trajectory(&events, &[point], &book),
            Err(Error::ContractViolation(_))
        ));
        assert!(StatePath::from_trajectory(&events, &[], &book).is_err());
    }
}
