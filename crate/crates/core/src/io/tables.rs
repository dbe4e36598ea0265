//! CSV tables exchanged between pipeline stages. Floats are written with
//! seventeen significant digits.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Deserialize;

use crate::calibration::DaySummary;
use crate::diagnostics::{QqPoint, ResidualSeries};
use crate::error::{Error, Result};
use crate::event::{ClassifiedEvent, EventRecord, EventType};
use crate::hawkes::TrajectoryPoint;

pub const CLASSIFIED_HEADER: [&str; 5] = ["time", "event_type", "size", "spread_ticks", "order_id"];
pub const TRAJECTORY_HEADER: [&str; 10] = [
    "time",
    "event_type",
    "size",
    "ask0_price",
    "bid0_price",
    "ask0_depth",
    "bid0_depth",
    "spread_ticks",
    "ask1_depth",
    "bid1_depth",
];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<()> {
    let got = rdr.headers()?;
    if !got.iter().eq(expected.iter().copied()) {
        return Err(Error::Parse(format!(
            "header `{}` does not match `{}`",
            got.iter().collect::<Vec<_>>().join(","),
            expected.join(",")
        )));
    }
    Ok(())
}

#[derive(Deserialize)]
struct ClassifiedRow {
    time: f64,
    event_type: EventType,
    size: u64,
    spread_ticks: i64,
    order_id: Option<u64>,
}

pub fn write_classified<W: Write>(writer: W, events: &[ClassifiedEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CLASSIFIED_HEADER)?;
    for e in events {
        w.write_record([
            fmt_f64(e.time()),
            e.event_type().name().to_string(),
            e.record.size.to_string(),
            e.spread_ticks.to_string(),
            e.record.order_id.map(|id| id.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_classified<R: Read>(reader: R) -> Result<Vec<ClassifiedEvent>> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(&mut rdr, &CLASSIFIED_HEADER)?;
    let mut out = Vec::new();
    for (k, row) in rdr.deserialize::<ClassifiedRow>().enumerate() {
        let row = row.map_err(|e| Error::Parse(format!("row {}: {e}", k + 1)))?;
        let record = EventRecord { time: row.time, event_type: row.event_type, size: row.size, order_id: row.order_id };
        out.push(ClassifiedEvent { record, spread_ticks: row.spread_ticks });
    }
    crate::event::check_time_order(out.iter().map(|e| e.time()))?;
    Ok(out)
}

pub fn write_classified_file(path: &Path, events: &[ClassifiedEvent]) -> Result<()> {
    write_classified(create(path)?, events)
}

pub fn read_classified_file(path: &Path) -> Result<Vec<ClassifiedEvent>> {
    read_classified(open(path)?).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[derive(Deserialize)]
struct TrajectoryRow {
    time: f64,
    event_type: EventType,
    size: u64,
    ask0_price: i64,
    bid0_price: i64,
    ask0_depth: u64,
    bid0_depth: u64,
    spread_ticks: i64,
    ask1_depth: u64,
    bid1_depth: u64,
}

pub fn write_trajectory<W: Write>(writer: W, points: &[TrajectoryPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRAJECTORY_HEADER)?;
    for p in points {
        w.write_record([
            fmt_f64(p.time),
            p.event_type.name().to_string(),
            p.size.to_string(),
            p.ask0_price.to_string(),
            p.bid0_price.to_string(),
            p.ask0_depth.to_string(),
            p.bid0_depth.to_string(),
            p.spread_ticks.to_string(),
            p.ask1_depth.to_string(),
            p.bid1_depth.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trajectory<R: Read>(reader: R) -> Result<Vec<TrajectoryPoint>> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(&mut rdr, &TRAJECTORY_HEADER)?;
    rdr.deserialize::<TrajectoryRow>()
        .enumerate()
        .map(|(k, row)| {
            let r = row.map_err(|e| Error::Parse(format!("row {}: {e}", k + 1)))?;
            Ok(TrajectoryPoint {
                time: r.time,
                event_type: r.event_type,
                size: r.size,
                ask0_price: r.ask0_price,
                bid0_price: r.bid0_price,
                ask0_depth: r.ask0_depth,
                bid0_depth: r.bid0_depth,
                spread_ticks: r.spread_ticks,
                ask1_depth: r.ask1_depth,
                bid1_depth: r.bid1_depth,
            })
        })
        .collect()
}

pub fn write_trajectory_file(path: &Path, points: &[TrajectoryPoint]) -> Result<()> {
    write_trajectory(create(path)?, points)
}

pub fn read_trajectory_file(path: &Path) -> Result<Vec<TrajectoryPoint>> {
    read_trajectory(open(path)?)
}

/// One `depth` column.
pub fn write_depth_samples<W: Write>(writer: W, samples: &[u64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["depth"])?;
    for s in samples {
        w.write_record([s.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_depth_samples<R: Read>(reader: R) -> Result<Vec<u64>> {
    let mut rdr = csv::Reader::from_reader(reader);
    check_header(&mut rdr, &["depth"])?;
    rdr.deserialize::<(u64,)>()
        .enumerate()
        .map(|(k, r)| r.map(|v| v.0).map_err(|e| Error::Parse(format!("row {}: {e}", k + 1))))
        .collect()
}

pub fn write_depth_samples_file(path: &Path, samples: &[u64]) -> Result<()> {
    write_depth_samples(create(path)?, samples)
}

pub fn read_depth_samples_file(path: &Path) -> Result<Vec<u64>> {
    read_depth_samples(open(path)?)
}

/// `event_type,tau`, dimensions in index order.
pub fn write_residuals<W: Write>(writer: W, series: &[ResidualSeries]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["event_type", "tau"])?;
    for s in series {
        for &t in &s.taus {
            w.write_record([s.event_type.name().to_string(), fmt_f64(t)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `event_type,theoretical_q,empirical_q`.
pub fn write_qq<W: Write>(writer: W, pairs: &[(EventType, Vec<QqPoint>)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["event_type", "theoretical_q", "empirical_q"])?;
    for (e, points) in pairs {
        for p in points {
            w.write_record([e.name().to_string(), fmt_f64(p.theoretical), fmt_f64(p.empirical)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per calibration day.
pub fn write_day_summaries<W: Write>(writer: W, days: &[DaySummary]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["day", "events", "regularized", "projected_baselines", "nonparametric_spectral_radius"])?;
    for d in days {
        w.write_record([
            d.day.clone(),
            d.events.to_string(),
            d.regularized.to_string(),
            d.projected_baselines.to_string(),
            fmt_f64(d.nonparametric_spectral_radius),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_file_with(path: &Path, f: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
    f(create(path)?)
}
