//! Order book state for the six queues around the best quotes.

pub mod depth;
pub mod state;

pub use depth::DepthDistribution;
pub use state::{Applied, BookSnapshot, BookState, MarketImpact, QueueSnapshot, RestingOrder, Transition, SYNTHETIC_ID_BASE};
