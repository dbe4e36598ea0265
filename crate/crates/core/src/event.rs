//! Event taxonomy shared by the simulator, the book engine and the
//! calibration pipeline.
//!
//! The twelve Hawkes dimensions are limit (LO), cancel (CO) and market (MO)
//! orders at the six queues around the best quotes. Their index order is
//! fixed and is the row/column order of every matrix in the crate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Ask,
    Bid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OrderKind {
    Limit,
    Cancel,
    Market,
}

/// The six queues of the book, keyed by side and tick offset from the best
/// quote (positive offsets move away from the spread on the ask side,
/// towards it on the bid side).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QueueKey {
    AskPlus1,
    Ask0,
    AskMinus1,
    BidPlus1,
    Bid0,
    BidMinus1,
}

impl QueueKey {
    pub const ALL: [QueueKey; 6] = [
        QueueKey::AskPlus1,
        QueueKey::Ask0,
        QueueKey::AskMinus1,
        QueueKey::BidPlus1,
        QueueKey::Bid0,
        QueueKey::BidMinus1,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            QueueKey::AskPlus1 => "ask+1",
            QueueKey::Ask0 => "ask0",
            QueueKey::AskMinus1 => "ask-1",
            QueueKey::BidPlus1 => "bid+1",
            QueueKey::Bid0 => "bid0",
            QueueKey::BidMinus1 => "bid-1",
        }
    }

    pub fn side(self) -> Side {
        match self {
            QueueKey::AskPlus1 | QueueKey::Ask0 | QueueKey::AskMinus1 => Side::Ask,
            _ => Side::Bid,
        }
    }

    /// The in-spread slots never hold resting volume.
    pub fn is_in_spread(self) -> bool {
        matches!(self, QueueKey::AskMinus1 | QueueKey::BidPlus1)
    }
}

impl fmt::Display for QueueKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QueueKey {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        QueueKey::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown queue key `{s}`")))
    }
}

impl Serialize for QueueKey {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for QueueKey {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One of the twelve Hawkes dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventType {
    LoAskPlus1,
    CoAskPlus1,
    LoAsk0,
    CoAsk0,
    MoAsk0,
    LoAskMinus1,
    LoBidPlus1,
    LoBid0,
    CoBid0,
    MoBid0,
    LoBidMinus1,
    CoBidMinus1,
}

pub const DIMENSIONS: usize = 12;

impl EventType {
    pub const ALL: [EventType; DIMENSIONS] = [
        EventType::LoAskPlus1,
        EventType::CoAskPlus1,
        EventType::LoAsk0,
        EventType::CoAsk0,
        EventType::MoAsk0,
        EventType::LoAskMinus1,
        EventType::LoBidPlus1,
        EventType::LoBid0,
        EventType::CoBid0,
        EventType::MoBid0,
        EventType::LoBidMinus1,
        EventType::CoBidMinus1,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<EventType> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            EventType::LoAskPlus1 => "LO_ask+1",
            EventType::CoAskPlus1 => "CO_ask+1",
            EventType::LoAsk0 => "LO_ask0",
            EventType::CoAsk0 => "CO_ask0",
            EventType::MoAsk0 => "MO_ask0",
            EventType::LoAskMinus1 => "LO_ask-1",
            EventType::LoBidPlus1 => "LO_bid+1",
            EventType::LoBid0 => "LO_bid0",
            EventType::CoBid0 => "CO_bid0",
            EventType::MoBid0 => "MO_bid0",
            EventType::LoBidMinus1 => "LO_bid-1",
            EventType::CoBidMinus1 => "CO_bid-1",
        }
    }

    pub fn kind(self) -> OrderKind {
        use EventType::*;
        match self {
            LoAskPlus1 | LoAsk0 | LoAskMinus1 | LoBidPlus1 | LoBid0 | LoBidMinus1 => {
                OrderKind::Limit
            }
            CoAskPlus1 | CoAsk0 | CoBid0 | CoBidMinus1 => OrderKind::Cancel,
            MoAsk0 | MoBid0 => OrderKind::Market,
        }
    }

    /// The queue this event acts on.
    pub fn queue(self) -> QueueKey {
        use EventType::*;
        match self {
            LoAskPlus1 | CoAskPlus1 => QueueKey::AskPlus1,
            LoAsk0 | CoAsk0 | MoAsk0 => QueueKey::Ask0,
            LoAskMinus1 => QueueKey::AskMinus1,
            LoBidPlus1 => QueueKey::BidPlus1,
            LoBid0 | CoBid0 | MoBid0 => QueueKey::Bid0,
            LoBidMinus1 | CoBidMinus1 => QueueKey::BidMinus1,
        }
    }

    pub fn side(self) -> Side {
        self.queue().side()
    }

    /// Limit orders placed strictly inside the spread.
    pub fn is_in_spread(self) -> bool {
        matches!(self, EventType::LoAskMinus1 | EventType::LoBidPlus1)
    }

    /// Events that need resting volume at their target queue.
    pub fn consumes_liquidity(self) -> bool {
        self.kind() != OrderKind::Limit
    }

    /// Eligible events per queue: the fixed map from queue to the event
    /// types that change its size.
    pub fn eligible(queue: QueueKey) -> &'static [EventType] {
        use EventType::*;
        match queue {
            QueueKey::AskPlus1 => &[LoAskPlus1, CoAskPlus1],
            QueueKey::Ask0 => &[LoAsk0, CoAsk0, MoAsk0],
            QueueKey::AskMinus1 => &[LoAskMinus1],
            QueueKey::BidPlus1 => &[LoBidPlus1],
            QueueKey::Bid0 => &[LoBid0, CoBid0, MoBid0],
            QueueKey::BidMinus1 => &[LoBidMinus1, CoBidMinus1],
        }
    }
}

impl fmt::Display for EventType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EventType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventType::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown event type `{s}`")))
    }
}

impl Serialize for EventType {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for EventType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A timestamped, classified order event. Times are seconds since the
/// session start; sizes are shares applied to the book.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub event_type: EventType,
    pub size: u64,
    pub order_id: Option<u64>,
}

impl EventRecord {
    pub fn new(time: f64, event_type: EventType, size: u64) -> Self {
        Self { time, event_type, size, order_id: None }
    }

    pub fn with_order(mut self, order_id: u64) -> Self {
        self.order_id = Some(order_id);
        self
    }
}

/// An event together with the spread (in ticks) prevailing just before it.
/// This is the row format of classified-event files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifiedEvent {
    pub record: EventRecord,
    pub spread_ticks: i64,
}

impl ClassifiedEvent {
    pub fn time(&self) -> f64 {
        self.record.time
    }

    pub fn event_type(&self) -> EventType {
        self.record.event_type
    }
}

/// Checks that a stream is non-decreasing in time.
pub fn check_time_order<I>(times: I) -> Result<()>
where
    I: IntoIterator<Item = f64>,
{
    let mut last = f64::NEG_INFINITY;
    for (k, t) in times.into_iter().enumerate() {
        if !t.is_finite() {
            return Err(Error::Range(format!("non-finite time at position {k}")));
        }
        if t < last {
            return Err(Error::ContractViolation(format!(
                "timestamps out of order at position {k}: {t} < {last}"
            )));
        }
        last = t;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_map_is_a_bijection() {
        for (k, e) in EventType::ALL.iter().enumerate() {
            assert_eq!(e.index(), k);
            assert_eq!(EventType::from_index(k), Some(*e));
            assert_eq!(e.name().parse::<EventType>().unwrap(), *e);
        }
        assert_eq!(EventType::from_index(12), None);
    }

    #[test]
    fn market_orders_only_at_best_and_no_in_spread_cancels() {
        for e in EventType::ALL {
            if e.kind() == OrderKind::Market {
                assert!(matches!(e.queue(), QueueKey::Ask0 | QueueKey::Bid0));
            }
            if e.queue().is_in_spread() {
                assert_eq!(e.kind(), OrderKind::Limit);
            }
        }
    }

    #[test]
    fn eligible_map_matches_event_queues() {
        for q in QueueKey::ALL {
            for e in EventType::eligible(q) {
                assert_eq!(e.queue(), q);
            }
        }
        let total: usize = QueueKey::ALL.iter().map(|q| EventType::eligible(*q).len()).sum();
        assert_eq!(total, DIMENSIONS);
    }

    #[test]
    fn serde_uses_names() {
        let json = serde_json::to_string(&EventType::LoBidPlus1).unwrap();
        assert_eq!(json, "\"LO_bid+1\"");
        let back: EventType = serde_json::from_str(&json).unwrap();
        assert_eq!(back, EventType::LoBidPlus1);
    }

    #[test]
    fn out_of_order_times_rejected() {
        assert!(check_time_order([0.0, 1.0, 1.0, 2.0]).is_ok());
        assert!(check_time_order([0.0, 2.0, 1.0]).is_err());
    }
}
