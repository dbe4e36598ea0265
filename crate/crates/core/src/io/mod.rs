//! Data ingestion and file formats: LOBSTER messages, event
//! classification with book reconstruction, CSV tables and empirical
//! statistics.

pub mod classify;
pub mod lobster;
pub mod model_file;
pub mod stats;
pub mod tables;

pub use classify::{classify, to_lobster, ClassifyOptions, ClassifyOutput, DiscardReport};
pub use model_file::{default_book, ModelDocument};
pub use lobster::{parse_book_rows, parse_messages, write_book_rows, write_messages, BookRow, ColumnMap, RawMessage};
pub use stats::{empirical_stats, EmpiricalStats, Moments, StatsOptions};
