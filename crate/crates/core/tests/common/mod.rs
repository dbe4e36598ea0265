//! Shared synthetic models for integration and acceptance tests.
#![allow(dead_code)]

use lob_hawkes::book::{BookState, DepthDistribution};
use lob_hawkes::hawkes::{HawkesModel, Kernel};
use lob_hawkes::size::{SizeDistribution, SizeTable};
use lob_hawkes::{EventType, DIMENSIONS};

pub const TOD_BINS: usize = 13;

/// High at the open and close, low at midday.
pub fn u_shape(bin: usize) -> f64 {
    let x = (bin as f64 - 6.0) / 6.0;
    1.0 + 0.8 * x * x
}

/// Midday baseline rates per event type, events/s.
pub fn base_rates() -> [f64; DIMENSIONS] {
    use EventType::*;
    let mut r = [0.0; DIMENSIONS];
    for (e, v) in [
        (LoAskPlus1, 0.50),
        (CoAskPlus1, 0.10),
        (LoAsk0, 0.20),
        (CoAsk0, 0.35),
        (MoAsk0, 0.15),
        (LoAskMinus1, 0.04),
    ] {
        r[e.index()] = v;
        r[mirror(e).index()] = v;
    }
    r
}

/// The same queue on the other side of the book.
pub fn mirror(e: EventType) -> EventType {
    use EventType::*;
    match e {
        LoAskPlus1 => LoBidMinus1,
        CoAskPlus1 => CoBidMinus1,
        LoAsk0 => LoBid0,
        CoAsk0 => CoBid0,
        MoAsk0 => MoBid0,
        LoAskMinus1 => LoBidPlus1,
        LoBidPlus1 => LoAskMinus1,
        LoBid0 => LoAsk0,
        CoBid0 => CoAsk0,
        MoBid0 => MoAsk0,
        LoBidMinus1 => LoAskPlus1,
        CoBidMinus1 => CoAskPlus1,
    }
}

/// Kernel entries (target, source, kernel) on the ask side; the bid side
/// mirrors them.
pub fn ask_kernels() -> Vec<(EventType, EventType, Kernel)> {
    use EventType::*;
    let exp = |a, b| Kernel::exponential(a, b).unwrap();
    let pl = |a, d, g| Kernel::power_law(a, d, g).unwrap();
    vec![
        (LoAsk0, LoAsk0, exp(4.0, 20.0)),
        (CoAsk0, CoAsk0, exp(3.0, 15.0)),
        (MoAsk0, MoAsk0, pl(6.0, 0.02, 2.5)),
        (LoAskPlus1, LoAskPlus1, pl(4.0, 0.03, 2.2)),
        (LoAskPlus1, CoAsk0, exp(3.0, 10.0)),
        (CoAsk0, MoAsk0, pl(4.0, 0.05, 3.0)),
        (LoAsk0, MoAsk0, exp(3.0, 12.0)),
        (CoAsk0, LoAsk0, exp(-0.3, 10.0)),
        (LoAskMinus1, MoAsk0, pl(1.0, 0.05, 2.5)),
        (LoAskPlus1, MoBid0, exp(-0.4, 8.0)),
    ]
}

pub fn reference_model(beta: f64) -> HawkesModel {
    let rates = base_rates();
    let baselines = (0..DIMENSIONS).map(|i| (0..TOD_BINS).map(|b| rates[i] * u_shape(b)).collect()).collect();
    let mut kernels = vec![vec![Kernel::zero(); DIMENSIONS]; DIMENSIONS];
    for (t, s, k) in ask_kernels() {
        kernels[t.index()][s.index()] = k.clone();
        kernels[mirror(t).index()][mirror(s).index()] = k;
    }
    // the in-spread rows must coincide
    let (a, b) = (EventType::LoAskMinus1.index(), EventType::LoBidPlus1.index());
    for j in 0..DIMENSIONS {
        let ka = kernels[a][j].clone();
        let kb = kernels[b][j].clone();
        if ka.is_zero() {
            kernels[a][j] = kb;
        } else if kb.is_zero() {
            kernels[b][j] = ka;
        }
    }
    HawkesModel::new(baselines, kernels, beta, 1800.0, 34_200.0).unwrap()
}

pub fn reference_sizes() -> SizeTable {
    let dist = SizeDistribution::new(
        vec![1, 10, 50, 100, 200, 500],
        vec![0.05, 0.05, 0.1, 0.3, 0.1, 0.02],
        0.38,
        0.02,
    )
    .unwrap();
    SizeTable::uniform(dist)
}

pub fn reference_depth() -> DepthDistribution {
    DepthDistribution::new(vec![100, 200, 300, 500], vec![0.4, 0.3, 0.2, 0.1]).unwrap()
}

pub fn reference_book() -> BookState {
    BookState::with_depths(0.01, 10_002, 10_000, [300, 300, 300, 300]).unwrap()
}

/// The reference model with every kernel made exponential (same norm,
/// β = 20/s) and baselines scaled by `rate_scale`. Exponential kernels keep
/// the simulator's per-event cost constant, which long runs need.
pub fn exponential_model(beta: f64, rate_scale: f64) -> HawkesModel {
    let reference = reference_model(beta);
    let baselines =
        reference.baselines().iter().map(|row| row.iter().map(|m| m * rate_scale).collect()).collect();
    let kernels = reference
        .kernels()
        .iter()
        .map(|row| {
            row.iter()
                .map(|k| if k.is_zero() { Kernel::zero() } else { Kernel::exponential(20.0 * k.norm(), 20.0).unwrap() })
                .collect()
        })
        .collect();
    HawkesModel::new(baselines, kernels, beta, 1800.0, 34_200.0).unwrap()
}
