//! Intensity evaluation against an explicit event history.
//!
//! These are the reference forms: they scan the whole history on every
//! call. The simulator and the compensator use [`ExcitationState`] for the
//! same quantities incrementally.
//!
//! [`ExcitationState`]: crate::hawkes::ExcitationState

use crate::book::BookState;
use crate::error::Result;
use crate::event::{EventRecord, EventType, DIMENSIONS};
use crate::hawkes::model::HawkesModel;

/// μ_i(Q(t)) + Σ_j Σ_{T_j < t} φ_ij(t − T_j). May be negative.
pub fn raw_intensity(i: EventType, t: f64, history: &[EventRecord], model: &HawkesModel) -> Result<f64> {
    let mut acc = model.baseline(i, t)?;
    for ev in history.iter().take_while(|ev| ev.time < t) {
        acc += model.kernel(i, ev.event_type).value(t - ev.time);
    }
    Ok(acc)
}

/// Floors a raw intensity at zero, applies the spread scaling to in-spread
/// dimensions and zeroes events the book cannot absorb.
pub fn effective_from_raw(i: EventType, raw: f64, model: &HawkesModel, book: &BookState) -> f64 {
    if i.consumes_liquidity() && book.depth(i.queue()) == 0 {
        return 0.0;
    }
    let r = raw.max(0.0);
    if i.is_in_spread() {
        r * model.spread_factor(book.spread_ticks())
    } else {
        r
    }
}

pub fn effective_intensity(
    i: EventType,
    t: f64,
    history: &[EventRecord],
    model: &HawkesModel,
    book: &BookState,
) -> Result<f64> {
    let raw = raw_intensity(i, t, history, model)?;
    Ok(effective_from_raw(i, raw, model, book))
}

/// Multiplier applied to a dimension's floored intensity in the current
/// book: the spread factor for in-spread dimensions, 0 for impossible
/// events, 1 otherwise.
pub fn state_scale(i: EventType, model: &HawkesModel, book: &BookState) -> f64 {
    if i.consumes_liquidity() && book.depth(i.queue()) == 0 {
        0.0
    } else if i.is_in_spread() {
        model.spread_factor(book.spread_ticks())
    } else {
        1.0
    }
}

/// Dominating rate for thinning: valid for every t' ≥ t up to the next
/// event. Uses the largest baseline over the rest of the session and only
/// the positive parts of the kernels.
pub fn total_intensity_bound(t: f64, history: &[EventRecord], model: &HawkesModel, book: &BookState) -> Result<f64> {
    let bin = model.bin_index(t)?;
    let mut total = 0.0;
    for i in EventType::ALL {
        let scale = state_scale(i, model, book);
        if scale == 0.0 {
            continue;
        }
        let mu = model.baselines()[i.index()][bin..].iter().copied().fold(0.0, f64::max);
        let mut excitation = 0.0;
        for ev in history.iter().take_while(|ev| ev.time < t) {
            excitation += model.kernel(i, ev.event_type).positive_sup_from(t - ev.time);
        }
        total += (mu + excitation) * scale;
    }
    Ok(total)
}

/// All twelve effective intensities at once.
pub fn effective_intensities(
    t: f64,
    history: &[EventRecord],
    model: &HawkesModel,
    book: &BookState,
) -> Result<[f64; DIMENSIONS]> {
    let mut out = [0.0; DIMENSIONS];
    for i in EventType::ALL {
        out[i.index()] = effective_intensity(i, t, history, model, book)?;
    }
    Ok(out)
}
