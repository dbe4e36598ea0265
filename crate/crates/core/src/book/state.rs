//! Six-queue book state machine.
//!
//! Prices are integer ticks. The in-spread slots `ask-1`/`bid+1` are always
//! empty; a limit order landing there becomes the new best quote (in-spread
//! transition), and a best queue emptied by a market order or cancel is
//! replaced by the next level out, whose unseen neighbour is re-veiled from
//! the depth distribution (queue-depletion transition).

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::book::depth::DepthDistribution;
use crate::error::{invalid, violation, Result};
use crate::event::{EventRecord, EventType, OrderKind, QueueKey, Side};

/// Synthetic order ids (fresh limit orders, re-veiled levels) start here so
/// they do not collide with exchange ids of replayed data.
pub const SYNTHETIC_ID_BASE: u64 = 1 << 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RestingOrder {
    pub id: u64,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Queue {
    price: i64,
    depth: u64,
    orders: VecDeque<RestingOrder>,
}

impl Queue {
    fn empty(price: i64) -> Self {
        Self { price, depth: 0, orders: VecDeque::new() }
    }

    fn with_order(price: i64, order: RestingOrder) -> Self {
        let mut q = Self::empty(price);
        q.push(order);
        q
    }

    fn push(&mut self, order: RestingOrder) {
        self.depth += order.size;
        self.orders.push_back(order);
    }

    pub fn price(&self) -> i64 {
        self.price
    }

    pub fn depth(&self) -> u64 {
        self.depth
    }

    pub fn orders(&self) -> impl Iterator<Item = &RestingOrder> {
        self.orders.iter()
    }

    pub fn order_count(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth == 0
    }
}

/// What an applied event did to the book.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transition {
    None,
    /// A limit order inside the spread created a new best quote.
    InSpread(Side),
    /// The best queue on this side emptied and the book shifted outward.
    Depletion(Side),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Applied {
    /// Shares actually added or removed.
    pub executed: u64,
    pub transition: Transition,
}

/// Preview of a market order against the best queue.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarketImpact {
    /// (order id, shares taken) in time priority.
    pub consumed: Vec<RestingOrder>,
    pub executed: u64,
    pub depleted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BookState {
    tick_size: f64,
    queues: [Queue; 6],
    next_id: u64,
}

impl BookState {
    /// An empty book with best quotes at the given tick prices.
    pub fn new(tick_size: f64, ask_price: i64, bid_price: i64) -> Result<Self> {
        if !(tick_size > 0.0) {
            return Err(invalid("tick size must be positive"));
        }
        if ask_price < bid_price {
            return Err(violation(format!("crossed quotes: ask {ask_price} < bid {bid_price}")));
        }
        let queues = [
            Queue::empty(ask_price + 1),
            Queue::empty(ask_price),
            Queue::empty(ask_price - 1),
            Queue::empty(bid_price + 1),
            Queue::empty(bid_price),
            Queue::empty(bid_price - 1),
        ];
        Ok(Self { tick_size, queues, next_id: SYNTHETIC_ID_BASE })
    }

    /// A book with one synthetic resting order per visible queue.
    /// `depths` is (ask+1, ask0, bid0, bid-1).
    pub fn with_depths(tick_size: f64, ask_price: i64, bid_price: i64, depths: [u64; 4]) -> Result<Self> {
        let mut book = Self::new(tick_size, ask_price, bid_price)?;
        let keys = [QueueKey::AskPlus1, QueueKey::Ask0, QueueKey::Bid0, QueueKey::BidMinus1];
        for (key, depth) in keys.into_iter().zip(depths) {
            if depth > 0 {
                let id = book.fresh_id();
                book.queues[key.index()].push(RestingOrder { id, size: depth });
            }
        }
        Ok(book)
    }

    /// Places resting orders directly (for reconstructing a book from data).
    pub fn push_order(&mut self, key: QueueKey, order: RestingOrder) -> Result<()> {
        if key.is_in_spread() {
            return Err(violation(format!("queue {key} cannot hold resting volume")));
        }
        if order.size == 0 {
            return Err(invalid("resting order size must be positive"));
        }
        self.queues[key.index()].push(order);
        Ok(())
    }

    pub fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    pub fn tick_size(&self) -> f64 {
        self.tick_size
    }

    pub fn queue(&self, key: QueueKey) -> &Queue {
        &self.queues[key.index()]
    }

    pub fn depth(&self, key: QueueKey) -> u64 {
        self.queues[key.index()].depth
    }

    pub fn price(&self, key: QueueKey) -> i64 {
        self.queues[key.index()].price
    }

    pub fn ask_price(&self) -> i64 {
        self.price(QueueKey::Ask0)
    }

    pub fn bid_price(&self) -> i64 {
        self.price(QueueKey::Bid0)
    }

    pub fn spread_ticks(&self) -> i64 {
        self.ask_price() - self.bid_price()
    }

    /// Whether `event_type` can be applied to the current book.
    pub fn is_possible(&self, event_type: EventType) -> bool {
        match event_type.kind() {
            OrderKind::Limit if event_type.is_in_spread() => self.spread_ticks() >= 1,
            OrderKind::Limit => true,
            OrderKind::Cancel | OrderKind::Market => !self.queues[event_type.queue().index()].is_empty(),
        }
    }

    /// Verifies the structural invariants; used by tests and debug checks.
    pub fn check_invariants(&self) -> Result<()> {
        for q in &self.queues {
            let sum: u64 = q.orders.iter().map(|o| o.size).sum();
            if sum != q.depth || q.orders.iter().any(|o| o.size == 0) {
                return Err(violation("queue depth differs from its resting orders"));
            }
        }
        if !self.queue(QueueKey::AskMinus1).is_empty() || !self.queue(QueueKey::BidPlus1).is_empty() {
            return Err(violation("in-spread slots must be empty"));
        }
        let (a, b) = (self.ask_price(), self.bid_price());
        if self.price(QueueKey::AskPlus1) != a + 1
            || self.price(QueueKey::AskMinus1) != a - 1
            || self.price(QueueKey::BidPlus1) != b + 1
            || self.price(QueueKey::BidMinus1) != b - 1
        {
            return Err(violation("price levels are not adjacent to the best quotes"));
        }
        if a < b {
            return Err(violation("negative spread"));
        }
        Ok(())
    }

    /// Uniform draw over the resting orders of a queue.
    pub fn select_cancel_target<R: Rng + ?Sized>(&self, key: QueueKey, rng: &mut R) -> Result<u64> {
        let q = &self.queues[key.index()];
        if q.orders.is_empty() {
            return Err(violation(format!("cancel on empty queue {key}")));
        }
        let k = rng.gen_range(0..q.orders.len());
        Ok(q.orders[k].id)
    }

    /// Size of a resting order, if present in `key`.
    pub fn order_size(&self, key: QueueKey, id: u64) -> Option<u64> {
        self.queues[key.index()].orders.iter().find(|o| o.id == id).map(|o| o.size)
    }

    /// Consumption of a market order of `mo_size` against the best queue of
    /// `side`, in time priority. Quantity beyond the queue is discarded.
    pub fn mo_size_effect(&self, side: Side, mo_size: u64) -> Result<MarketImpact> {
        if mo_size == 0 {
            return Err(invalid("market order size must be at least 1"));
        }
        let key = match side {
            Side::Ask => QueueKey::Ask0,
            Side::Bid => QueueKey::Bid0,
        };
        let q = &self.queues[key.index()];
        let mut remaining = mo_size;
        let mut consumed = Vec::new();
        for o in &q.orders {
            if remaining == 0 {
                break;
            }
            let take = remaining.min(o.size);
            consumed.push(RestingOrder { id: o.id, size: take });
            remaining -= take;
        }
        let executed = mo_size - remaining;
        Ok(MarketImpact { consumed, executed, depleted: executed == q.depth })
    }

    /// Applies a classified event. Limit orders without an id get a fresh
    /// synthetic one; cancels must name a resting order in the target queue.
    pub fn apply_event<R: Rng + ?Sized>(
        &mut self,
        ev: &EventRecord,
        depth_dist: &DepthDistribution,
        rng: &mut R,
    ) -> Result<Applied> {
        let e = ev.event_type;
        if ev.size == 0 && e.kind() != OrderKind::Cancel {
            return Err(invalid("event size must be at least 1"));
        }
        let key = e.queue();
        match e.kind() {
            OrderKind::Limit => {
                let id = match ev.order_id {
                    Some(id) => id,
                    None => self.fresh_id(),
                };
                let order = RestingOrder { id, size: ev.size };
                if e.is_in_spread() {
                    if self.spread_ticks() < 1 {
                        return Err(violation(format!("{e} with spread {}", self.spread_ticks())));
                    }
                    let side = key.side();
                    self.in_spread(side, order);
                    Ok(Applied { executed: ev.size, transition: Transition::InSpread(side) })
                } else {
                    self.queues[key.index()].push(order);
                    Ok(Applied { executed: ev.size, transition: Transition::None })
                }
            }
            OrderKind::Market => {
                if self.queues[key.index()].is_empty() {
                    return Err(violation(format!("{e} on empty queue")));
                }
                let side = key.side();
                let impact = self.mo_size_effect(side, ev.size)?;
                let q = &mut self.queues[key.index()];
                for c in &impact.consumed {
                    let front = q.orders.front_mut().expect("consumed order present");
                    debug_assert_eq!(front.id, c.id);
                    front.size -= c.size;
                    if front.size == 0 {
                        q.orders.pop_front();
                    }
                }
                q.depth -= impact.executed;
                let transition = if q.depth == 0 {
                    self.deplete(side, depth_dist, rng);
                    Transition::Depletion(side)
                } else {
                    Transition::None
                };
                Ok(Applied { executed: impact.executed, transition })
            }
            OrderKind::Cancel => {
                let id = ev.order_id.ok_or_else(|| violation(format!("{e} without an order id")))?;
                let q = &mut self.queues[key.index()];
                if q.orders.is_empty() {
                    return Err(violation(format!("{e} on empty queue")));
                }
                let pos = q
                    .orders
                    .iter()
                    .position(|o| o.id == id)
                    .ok_or_else(|| violation(format!("{e}: order {id} not resting at {key}")))?;
                let removed = q.orders.remove(pos).unwrap();
                q.depth -= removed.size;
                let best = matches!(key, QueueKey::Ask0 | QueueKey::Bid0);
                let transition = if best && q.depth == 0 {
                    let side = key.side();
                    self.deplete(side, depth_dist, rng);
                    Transition::Depletion(side)
                } else {
                    Transition::None
                };
                Ok(Applied { executed: removed.size, transition })
            }
        }
    }

    fn in_spread(&mut self, side: Side, order: RestingOrder) {
        match side {
            Side::Ask => {
                let new_price = self.ask_price() - 1;
                let old_best = std::mem::replace(&mut self.queues[QueueKey::Ask0.index()], Queue::with_order(new_price, order));
                self.queues[QueueKey::AskPlus1.index()] = old_best;
                self.queues[QueueKey::AskMinus1.index()] = Queue::empty(new_price - 1);
            }
            Side::Bid => {
                let new_price = self.bid_price() + 1;
                let old_best = std::mem::replace(&mut self.queues[QueueKey::Bid0.index()], Queue::with_order(new_price, order));
                self.queues[QueueKey::BidMinus1.index()] = old_best;
                self.queues[QueueKey::BidPlus1.index()] = Queue::empty(new_price + 1);
            }
        }
        self.sync_inner_prices();
    }

    fn deplete<R: Rng + ?Sized>(&mut self, side: Side, depth_dist: &DepthDistribution, rng: &mut R) {
        let (best, outer, step) = match side {
            Side::Ask => (QueueKey::Ask0, QueueKey::AskPlus1, 1),
            Side::Bid => (QueueKey::Bid0, QueueKey::BidMinus1, -1),
        };
        let next = std::mem::replace(&mut self.queues[outer.index()], Queue::empty(0));
        let best_price = next.price;
        self.queues[best.index()] = next;
        if self.queues[best.index()].is_empty() {
            // the level one tick out was itself empty; the next visible
            // volume is still placed one tick out
            let size = depth_dist.sample(rng);
            let id = self.fresh_id();
            self.queues[best.index()].push(RestingOrder { id, size });
        }
        let size = depth_dist.sample(rng);
        let id = self.fresh_id();
        self.queues[outer.index()] = Queue::with_order(best_price + step, RestingOrder { id, size });
        self.sync_inner_prices();
    }

    fn sync_inner_prices(&mut self) {
        let (a, b) = (self.ask_price(), self.bid_price());
        self.queues[QueueKey::AskMinus1.index()].price = a - 1;
        self.queues[QueueKey::BidPlus1.index()].price = b + 1;
    }

    pub fn snapshot(&self) -> BookSnapshot {
        BookSnapshot {
            tick_size: self.tick_size,
            queues: QueueKey::ALL
                .into_iter()
                .map(|key| {
                    let q = self.queue(key);
                    QueueSnapshot {
                        key,
                        price_ticks: q.price,
                        orders: q.orders.iter().map(|o| (o.id, o.size)).collect(),
                    }
                })
                .collect(),
        }
    }

    pub fn from_snapshot(snap: &BookSnapshot) -> Result<Self> {
        let find = |key: QueueKey| {
            snap.queues
                .iter()
                .find(|q| q.key == key)
                .ok_or_else(|| invalid(format!("snapshot is missing queue {key}")))
        };
        let ask = find(QueueKey::Ask0)?.price_ticks;
        let bid = find(QueueKey::Bid0)?.price_ticks;
        let mut book = Self::new(snap.tick_size, ask, bid)?;
        let mut max_id = None;
        for q in &snap.queues {
            let expected = book.price(q.key);
            if q.price_ticks != expected {
                return Err(invalid(format!(
                    "snapshot queue {} at {} but expected {}",
                    q.key, q.price_ticks, expected
                )));
            }
            for &(id, size) in &q.orders {
                book.push_order(q.key, RestingOrder { id, size })?;
                if id >= SYNTHETIC_ID_BASE {
                    max_id = Some(max_id.map_or(id, |m: u64| m.max(id)));
                }
            }
        }
        if let Some(m) = max_id {
            book.next_id = m + 1;
        }
        Ok(book)
    }
}

/// JSON form of a book: `{tick_size, queues: [{key, price_ticks, orders: [[id, size], ...]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookSnapshot {
    pub tick_size: f64,
    pub queues: Vec<QueueSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueSnapshot {
    pub key: QueueKey,
    pub price_ticks: i64,
    pub orders: Vec<(u64, u64)>,
}
