//! LOBSTER message and orderbook files.
//!
//! Message rows are `time, type, order id, size, price, direction` with
//! times in seconds after midnight, prices in units of 10⁻⁴ currency and
//! direction −1 for sell and +1 for buy orders. Orderbook rows hold the
//! book after the message on the same line as repeated
//! `ask price, ask size, bid price, bid size` levels.

use std::io::Read;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::event::Side;

pub const NEW_LIMIT: i32 = 1;
pub const PARTIAL_CANCEL: i32 = 2;
pub const DELETE: i32 = 3;
pub const EXECUTION: i32 = 4;
pub const HIDDEN_EXECUTION: i32 = 5;
pub const CROSS_TRADE: i32 = 6;
pub const HALT: i32 = 7;

/// Placeholder price of an empty level in orderbook files.
pub const EMPTY_LEVEL_PRICE: i64 = 9_999_999_999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawMessage {
    /// Seconds after midnight.
    pub time: f64,
    pub msg_type: i32,
    pub order_id: u64,
    pub size: u64,
    /// Price × 10⁴.
    pub price: i64,
    /// −1 sell, +1 buy.
    pub direction: i8,
}

impl RawMessage {
    /// Side of the book the order rests on.
    pub fn side(&self) -> Side {
        if self.direction < 0 {
            Side::Ask
        } else {
            Side::Bid
        }
    }
}

/// Column positions of the message fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ColumnMap {
    pub time: usize,
    pub msg_type: usize,
    pub order_id: usize,
    pub size: usize,
    pub price: usize,
    pub direction: usize,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self { time: 0, msg_type: 1, order_id: 2, size: 3, price: 4, direction: 5 }
    }
}

impl ColumnMap {
    fn width(&self) -> usize {
        [self.time, self.msg_type, self.order_id, self.size, self.price, self.direction].into_iter().max().unwrap() + 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MalformedRow {
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedMessages {
    pub messages: Vec<RawMessage>,
    pub malformed: Vec<MalformedRow>,
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, name: &str) -> std::result::Result<T, String> {
    let s = rec.get(k).ok_or_else(|| format!("missing {name}"))?.trim();
    s.parse().map_err(|_| format!("bad {name} `{s}`"))
}

fn parse_message(rec: &csv::StringRecord, cols: &ColumnMap) -> std::result::Result<RawMessage, String> {
    if rec.len() < cols.width() {
        return Err(format!("{} columns, need {}", rec.len(), cols.width()));
    }
    let time: f64 = field(rec, cols.time, "time")?;
    if !time.is_finite() || time < 0.0 {
        return Err(format!("bad time {time}"));
    }
    let size: i64 = field(rec, cols.size, "size")?;
    if size < 0 {
        return Err(format!("negative size {size}"));
    }
    let direction: i8 = field(rec, cols.direction, "direction")?;
    if direction != 1 && direction != -1 {
        return Err(format!("direction {direction} is not ±1"));
    }
    Ok(RawMessage {
        time,
        msg_type: field(rec, cols.msg_type, "type")?,
        order_id: field(rec, cols.order_id, "order id")?,
        size: size as u64,
        price: field(rec, cols.price, "price")?,
        direction,
    })
}

/// Reads a message file. Malformed rows are skipped and reported with
/// their line numbers.
pub fn parse_messages<R: Read>(reader: R, cols: &ColumnMap) -> Result<ParsedMessages> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(reader);
    let mut out = ParsedMessages::default();
    for (k, rec) in rdr.records().enumerate() {
        let line = k as u64 + 1;
        let parsed = rec.map_err(|e| e.to_string()).and_then(|r| parse_message(&r, cols));
        match parsed {
            Ok(m) => out.messages.push(m),
            Err(reason) => {
                warn!("message line {line}: {reason}");
                out.malformed.push(MalformedRow { line, reason });
            }
        }
    }
    Ok(out)
}

pub fn write_messages<W: std::io::Write>(writer: W, messages: &[RawMessage]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    for m in messages {
        w.write_record([
            format!("{:.9}", m.time),
            m.msg_type.to_string(),
            m.order_id.to_string(),
            m.size.to_string(),
            m.price.to_string(),
            m.direction.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One orderbook row: visible levels from the best outwards.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BookRow {
    /// (price × 10⁴, size)
    pub asks: Vec<(i64, u64)>,
    pub bids: Vec<(i64, u64)>,
}

impl BookRow {
    fn level_ok(price: i64, size: u64) -> bool {
        size > 0 && price.abs() < EMPTY_LEVEL_PRICE
    }

    pub fn best_ask(&self) -> Option<(i64, u64)> {
        self.asks.first().copied().filter(|&(p, s)| Self::level_ok(p, s))
    }

    pub fn best_bid(&self) -> Option<(i64, u64)> {
        self.bids.first().copied().filter(|&(p, s)| Self::level_ok(p, s))
    }

    /// Visible size at `price` on `side`, 0 if the level is not listed.
    pub fn size_at(&self, side: Side, price: i64) -> u64 {
        let levels = match side {
            Side::Ask => &self.asks,
            Side::Bid => &self.bids,
        };
        levels.iter().find(|&&(p, s)| p == price && Self::level_ok(p, s)).map_or(0, |l| l.1)
    }
}

pub fn parse_book_rows<R: Read>(reader: R) -> Result<Vec<BookRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() % 4 != 0 || rec.is_empty() {
            return Err(Error::Parse(format!("orderbook line {}: {} columns is not a multiple of 4", k + 1, rec.len())));
        }
        let nums: Vec<i64> = rec
            .iter()
            .map(|s| s.trim().parse::<i64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("orderbook line {}: {e}", k + 1)))?;
        let mut row = BookRow::default();
        for lvl in nums.chunks(4) {
            if lvl[1] < 0 || lvl[3] < 0 {
                return Err(Error::Parse(format!("orderbook line {}: negative size", k + 1)));
            }
            row.asks.push((lvl[0], lvl[1] as u64));
            row.bids.push((lvl[2], lvl[3] as u64));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_book_rows<W: std::io::Write>(writer: W, rows: &[BookRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).flexible(true).from_writer(writer);
    for row in rows {
        if row.asks.len() != row.bids.len() {
            return Err(invalid("orderbook rows need as many ask as bid levels"));
        }
        let mut fields = Vec::with_capacity(4 * row.asks.len());
        for (a, b) in row.asks.iter().zip(&row.bids) {
            fields.extend([a.0.to_string(), a.1.to_string(), b.0.to_string(), b.1.to_string()]);
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}
