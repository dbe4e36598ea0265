//! Goodness-of-fit diagnostics: time-rescaling residuals with KS tests and
//! exponential Q-Q pairs, and Hoeffding's independence test between order
//! sizes and subsequent arrival counts.

pub mod hoeffding;
pub mod ks;
pub mod qq;
pub mod residuals;

pub use hoeffding::{hoeffding_d, size_count_pairs, HoeffdingResult, DEFAULT_COUNT_WINDOW, MIN_PAIRS};
pub use ks::{ks_exponential, ks_one_sample, ks_two_sample, KsResult};
pub use qq::{qq_pairs, QqPoint};
pub use residuals::{compute_residuals, BookCondition, Compensator, ResidualSeries, StatePath};
