//! Mapping raw messages to the twelve event types.
//!
//! The best quotes in force before each message come either from an
//! orderbook file or from a book rebuilt from the messages themselves. In
//! the rebuilt case orders that predate the file are unknown, so the first
//! seconds of the session only seed the book.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::book::BookState;
use crate::error::{invalid, violation, Result};
use crate::event::{ClassifiedEvent, EventRecord, EventType, OrderKind, QueueKey, Side};
use crate::hawkes::{TrajectoryPoint, NASDAQ_CLOSE, NASDAQ_OPEN};
use crate::io::lobster::*;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyOptions {
    /// Price units per tick (100 for one cent at the 10⁻⁴ convention).
    pub tick_units: i64,
    /// Continuous session, seconds after midnight.
    pub session_start: f64,
    pub session_end: f64,
    /// Seconds after the open used only to seed a rebuilt book.
    pub warm_up: f64,
    /// Merge consecutive executions at one time, side and price into a
    /// single market order.
    pub merge_executions: bool,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            tick_units: 100,
            session_start: NASDAQ_OPEN,
            session_end: NASDAQ_CLOSE,
            warm_up: 60.0,
            merge_executions: true,
        }
    }
}

/// Why messages were not turned into events.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscardReport {
    pub messages: u64,
    pub events: u64,
    /// Executions folded into the preceding market order.
    pub merged_executions: u64,
    pub malformed: u64,
    pub outside_session: u64,
    pub warm_up: u64,
    pub no_quote: u64,
    pub partial_cancel: u64,
    pub hidden_execution: u64,
    pub halt: u64,
    pub other_type: u64,
    pub out_of_band: u64,
    pub off_tick: u64,
    pub zero_size: u64,
    /// Full deletions among all cancellations, for the outright share.
    pub full_cancels: u64,
    /// Tick distance from the same-side best quote of every limit order
    /// placed inside the spread.
    pub in_spread_distance: BTreeMap<i64, u64>,
    /// Distance to the next non-empty level after a best quote emptied.
    pub price_change_gap: BTreeMap<i64, u64>,
}

impl DiscardReport {
    pub fn discarded(&self) -> u64 {
        self.outside_session
            + self.warm_up
            + self.no_quote
            + self.partial_cancel
            + self.hidden_execution
            + self.halt
            + self.other_type
            + self.out_of_band
            + self.off_tick
            + self.zero_size
    }

    /// Share of cancellations that removed the whole order.
    pub fn outright_cancel_share(&self) -> Option<f64> {
        let total = self.full_cancels + self.partial_cancel;
        (total > 0).then(|| self.full_cancels as f64 / total as f64)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassifyOutput {
    /// Times in seconds since the session start.
    pub events: Vec<ClassifiedEvent>,
    /// Book after each event.
    pub trajectory: Vec<TrajectoryPoint>,
    pub report: DiscardReport,
    /// Depth of the level revealed one tick beyond a new best quote after a
    /// depletion.
    pub depth_samples: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Quotes {
    ask: i64,
    bid: i64,
    ask0: u64,
    bid0: u64,
    ask1: u64,
    bid1: u64,
}

/// Book rebuilt from messages: level depths in ticks and known orders.
#[derive(Debug, Default)]
struct Rebuilt {
    asks: BTreeMap<i64, u64>,
    bids: BTreeMap<i64, u64>,
    orders: HashMap<u64, (Side, i64, u64)>,
}

impl Rebuilt {
    fn levels(&mut self, side: Side) -> &mut BTreeMap<i64, u64> {
        match side {
            Side::Ask => &mut self.asks,
            Side::Bid => &mut self.bids,
        }
    }

    fn add(&mut self, side: Side, price: i64, id: u64, size: u64) {
        *self.levels(side).entry(price).or_default() += size;
        self.orders.insert(id, (side, price, size));
    }

    fn remove(&mut self, side: Side, price: i64, id: u64, size: u64) {
        let (side, price, size) = match self.orders.get_mut(&id) {
            Some(o) => {
                let take = size.min(o.2);
                o.2 -= take;
                let entry = (o.0, o.1, take);
                if o.2 == 0 {
                    self.orders.remove(&id);
                }
                entry
            }
            None => (side, price, size),
        };
        let levels = self.levels(side);
        if let Some(d) = levels.get_mut(&price) {
            *d = d.saturating_sub(size);
            if *d == 0 {
                levels.remove(&price);
            }
        }
    }

    fn quotes(&self) -> Option<Quotes> {
        let (&ask, &ask0) = self.asks.iter().next()?;
        let (&bid, &bid0) = self.bids.iter().next_back()?;
        Some(Quotes {
            ask,
            bid,
            ask0,
            bid0,
            ask1: self.asks.get(&(ask + 1)).copied().unwrap_or(0),
            bid1: self.bids.get(&(bid - 1)).copied().unwrap_or(0),
        })
    }

    fn from_book(book: &BookState) -> Self {
        let mut r = Self::default();
        for key in QueueKey::ALL {
            let q = book.queue(key);
            for o in q.orders() {
                r.add(key.side(), q.price(), o.id, o.size);
            }
        }
        r
    }
}

fn row_quotes(row: &BookRow, tick: i64) -> Option<Quotes> {
    let (ap, a0) = row.best_ask()?;
    let (bp, b0) = row.best_bid()?;
    Some(Quotes {
        ask: ap.div_euclid(tick),
        bid: bp.div_euclid(tick),
        ask0: a0,
        bid0: b0,
        ask1: row.size_at(Side::Ask, ap + tick),
        bid1: row.size_at(Side::Bid, bp - tick),
    })
}

/// Event type of a message against the quotes in force, or why it has none.
fn event_type(m: &RawMessage, p: i64, q: &Quotes, report: &mut DiscardReport) -> Option<EventType> {
    use EventType::*;
    let (a, b) = (q.ask, q.bid);
    let side = m.side();
    let e = match m.msg_type {
        NEW_LIMIT => {
            match side {
                Side::Ask if p < a && p >= b => {
                    *report.in_spread_distance.entry(a - p).or_default() += 1;
                }
                Side::Bid if p > b && p <= a => {
                    *report.in_spread_distance.entry(p - b).or_default() += 1;
                }
                _ => {}
            }
            match side {
                Side::Ask if p == a => Some(LoAsk0),
                Side::Ask if p == a + 1 => Some(LoAskPlus1),
                Side::Ask if p == a - 1 && p >= b => Some(LoAskMinus1),
                Side::Bid if p == b => Some(LoBid0),
                Side::Bid if p == b - 1 => Some(LoBidMinus1),
                Side::Bid if p == b + 1 && p <= a => Some(LoBidPlus1),
                _ => None,
            }
        }
        DELETE => {
            report.full_cancels += 1;
            match side {
                Side::Ask if p == a => Some(CoAsk0),
                Side::Ask if p == a + 1 => Some(CoAskPlus1),
                Side::Bid if p == b => Some(CoBid0),
                Side::Bid if p == b - 1 => Some(CoBidMinus1),
                _ => None,
            }
        }
        EXECUTION => match side {
            Side::Ask if p == a => Some(MoAsk0),
            Side::Bid if p == b => Some(MoBid0),
            _ => None,
        },
        PARTIAL_CANCEL => {
            report.partial_cancel += 1;
            return None;
        }
        HIDDEN_EXECUTION => {
            report.hidden_execution += 1;
            return None;
        }
        HALT => {
            report.halt += 1;
            return None;
        }
        _ => {
            report.other_type += 1;
            return None;
        }
    };
    if e.is_none() {
        report.out_of_band += 1;
    }
    e
}

fn apply(book: &mut Rebuilt, m: &RawMessage, p: i64) {
    match m.msg_type {
        NEW_LIMIT => book.add(m.side(), p, m.order_id, m.size),
        PARTIAL_CANCEL | DELETE | EXECUTION => book.remove(m.side(), p, m.order_id, m.size),
        _ => {}
    }
}

fn point(ev: &EventRecord, q: &Quotes) -> TrajectoryPoint {
    TrajectoryPoint {
        time: ev.time,
        event_type: ev.event_type,
        size: ev.size,
        ask0_price: q.ask,
        bid0_price: q.bid,
        ask0_depth: q.ask0,
        bid0_depth: q.bid0,
        spread_ticks: q.ask - q.bid,
        ask1_depth: q.ask1,
        bid1_depth: q.bid1,
    }
}

/// Classifies one session of messages.
///
/// With `rows` (one per message, the book after it) quotes are read from
/// the file and `initial` supplies the book before the first message;
/// without it the book is rebuilt from `initial` (if any) and the messages.
pub fn classify(
    messages: &[RawMessage],
    rows: Option<&[BookRow]>,
    initial: Option<&BookState>,
    opts: &ClassifyOptions,
) -> Result<ClassifyOutput> {
    if opts.tick_units <= 0 {
        return Err(invalid("tick_units must be positive"));
    }
    if !(opts.session_end > opts.session_start) || !(opts.warm_up >= 0.0) {
        return Err(invalid("session must be non-empty and the warm-up non-negative"));
    }
    if let Some(rows) = rows {
        if rows.len() != messages.len() {
            return Err(violation(format!("{} messages but {} orderbook rows", messages.len(), rows.len())));
        }
    }
    crate::event::check_time_order(messages.iter().map(|m| m.time))
        .map_err(|e| violation(format!("messages out of order: {e}")))?;

    let tick = opts.tick_units;
    let mut book = initial.map(Rebuilt::from_book).unwrap_or_default();
    let initial_quotes = match (rows, initial) {
        (Some(_), Some(b)) => Some(Quotes {
            ask: b.ask_price(),
            bid: b.bid_price(),
            ask0: b.depth(QueueKey::Ask0),
            bid0: b.depth(QueueKey::Bid0),
            ask1: b.depth(QueueKey::AskPlus1),
            bid1: b.depth(QueueKey::BidMinus1),
        }),
        _ => None,
    };
    let seeded = rows.is_some() || initial.is_some();
    let warm_up_end = opts.session_start + if seeded { 0.0 } else { opts.warm_up };
    let quotes_after = |k: usize, book: &Rebuilt| match rows {
        Some(r) => row_quotes(&r[k], tick),
        None => book.quotes(),
    };

    let mut out = ClassifyOutput::default();
    out.report.messages = messages.len() as u64;
    let mut before = match rows {
        Some(_) => initial_quotes,
        None => book.quotes(),
    };
    let mut last_exec: Option<(f64, i8, i64)> = None;
    for (k, m) in messages.iter().enumerate() {
        let price_ok = m.price.rem_euclid(tick) == 0;
        let p = m.price.div_euclid(tick);
        apply(&mut book, m, p);
        let after = quotes_after(k, &book);
        let merge_key = (m.time, m.direction, p);
        let emitted = 'emit: {
            if m.time < opts.session_start || m.time >= opts.session_end {
                out.report.outside_session += 1;
                break 'emit false;
            }
            if m.time < warm_up_end {
                out.report.warm_up += 1;
                break 'emit false;
            }
            let Some(q) = before else {
                out.report.no_quote += 1;
                break 'emit false;
            };
            if opts.merge_executions && m.msg_type == EXECUTION && last_exec == Some(merge_key) {
                let last = out.events.last_mut().expect("merged execution follows an event");
                last.record.size += m.size;
                let tp = out.trajectory.last_mut().expect("trajectory follows events");
                if let Some(a) = after {
                    *tp = point(&last.record, &a);
                }
                out.report.merged_executions += 1;
                break 'emit true;
            }
            if !price_ok && matches!(m.msg_type, NEW_LIMIT | DELETE | EXECUTION) {
                out.report.off_tick += 1;
                break 'emit false;
            }
            let Some(e) = event_type(m, p, &q, &mut out.report) else {
                break 'emit false;
            };
            if m.size == 0 {
                out.report.zero_size += 1;
                break 'emit false;
            }
            let Some(a) = after else {
                out.report.no_quote += 1;
                break 'emit false;
            };
            let rec = EventRecord::new(m.time - opts.session_start, e, m.size).with_order(m.order_id);
            out.events.push(ClassifiedEvent { record: rec, spread_ticks: q.ask - q.bid });
            out.trajectory.push(point(&rec, &a));
            if e.kind() != OrderKind::Limit {
                if a.ask > q.ask {
                    *out.report.price_change_gap.entry(a.ask - q.ask).or_default() += 1;
                    if a.ask1 > 0 {
                        out.depth_samples.push(a.ask1);
                    }
                }
                if a.bid < q.bid {
                    *out.report.price_change_gap.entry(q.bid - a.bid).or_default() += 1;
                    if a.bid1 > 0 {
                        out.depth_samples.push(a.bid1);
                    }
                }
            }
            true
        };
        last_exec = (emitted && m.msg_type == EXECUTION).then_some(merge_key);
        before = after;
    }
    out.report.events = out.events.len() as u64;
    Ok(out)
}

/// Writes simulated events as messages with matching orderbook rows. The
/// returned messages classify back to the same event types when passed to
/// [`classify`] with the rows and the initial book.
pub fn to_lobster(
    events: &[EventRecord],
    trajectory: &[TrajectoryPoint],
    initial: &BookState,
    tick_units: i64,
    session_start: f64,
) -> Result<(Vec<RawMessage>, Vec<BookRow>)> {
    if events.len() != trajectory.len() {
        return Err(violation("events and trajectory differ in length"));
    }
    let mut a = initial.ask_price();
    let mut b = initial.bid_price();
    let mut msgs = Vec::with_capacity(events.len());
    let mut rows = Vec::with_capacity(events.len());
    let level = |price: i64, size: u64, empty: i64| if size > 0 { (price * tick_units, size) } else { (empty, 0) };
    for (ev, tp) in events.iter().zip(trajectory) {
        use EventType::*;
        let (msg_type, price) = match ev.event_type {
            LoAskPlus1 => (NEW_LIMIT, a + 1),
            LoAsk0 => (NEW_LIMIT, a),
            LoAskMinus1 => (NEW_LIMIT, a - 1),
            LoBidPlus1 => (NEW_LIMIT, b + 1),
            LoBid0 => (NEW_LIMIT, b),
            LoBidMinus1 => (NEW_LIMIT, b - 1),
            CoAskPlus1 => (DELETE, a + 1),
            CoAsk0 => (DELETE, a),
            CoBid0 => (DELETE, b),
            CoBidMinus1 => (DELETE, b - 1),
            MoAsk0 => (EXECUTION, a),
            MoBid0 => (EXECUTION, b),
        };
        msgs.push(RawMessage {
            time: session_start + ev.time,
            msg_type,
            order_id: ev.order_id.unwrap_or(0),
            size: ev.size,
            price: price * tick_units,
            direction: if ev.event_type.side() == Side::Ask { -1 } else { 1 },
        });
        rows.push(BookRow {
            asks: vec![
                level(tp.ask0_price, tp.ask0_depth, EMPTY_LEVEL_PRICE),
                level(tp.ask0_price + 1, tp.ask1_depth, EMPTY_LEVEL_PRICE),
            ],
            bids: vec![
                level(tp.bid0_price, tp.bid0_depth, -EMPTY_LEVEL_PRICE),
                level(tp.bid0_price - 1, tp.bid1_depth, -EMPTY_LEVEL_PRICE),
            ],
        });
        a = tp.ask0_price;
        b = tp.bid0_price;
    }
    Ok((msgs, rows))
}
