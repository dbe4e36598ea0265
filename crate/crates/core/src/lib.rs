//! Compound Hawkes limit-order-book simulator and calibration toolkit.
//!
//! Order events of twelve types (limit, cancel and market orders at the six
//! queues around the best quotes) arrive through a mutually exciting point
//! process with time-of-day baselines. Each event carries a size drawn from
//! a spiked distribution and is applied to a six-queue book whose state
//! machine keeps the spread non-negative.

pub mod book;
pub mod calibration;
pub mod diagnostics;
pub mod error;
pub mod event;
pub mod hawkes;
pub mod io;
pub mod size;

pub use error::{Error, Result};
pub use event::{ClassifiedEvent, EventRecord, EventType, OrderKind, QueueKey, Side, DIMENSIONS};
