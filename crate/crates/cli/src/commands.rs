//! Subcommand implementations.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use lob_hawkes::book::{BookSnapshot, BookState, DepthDistribution};
use lob_hawkes::calibration::{calibrate as run_calibration, DayEvents, DaySummary, GridSpec, KernelReportEntry, SpreadBetaEstimate, StationarityReport};
use lob_hawkes::diagnostics::{compute_residuals, hoeffding_d, qq_pairs, size_count_pairs, StatePath, MIN_PAIRS};
use lob_hawkes::hawkes::simulate_with;
use lob_hawkes::io::tables;
use lob_hawkes::io::{
    classify, empirical_stats, parse_book_rows, parse_messages, to_lobster, write_book_rows, write_messages, ModelDocument,
};
use lob_hawkes::{ClassifiedEvent, Error, EventType, Result};
use log::{info, warn};
use serde::Serialize;

use crate::config::{self, Config};
use crate::{CalibrateArgs, DiagnoseArgs, IngestArgs, SimulateArgs, StatsArgs};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    tables::write_file_with(path, |mut w| {
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    })
}

fn read_snapshot(path: &Path) -> Result<BookState> {
    let snap: BookSnapshot = serde_json::from_reader(open(path)?)?;
    BookState::from_snapshot(&snap)
}

#[derive(Serialize)]
struct IngestReport<'a> {
    #[serde(flatten)]
    discards: &'a lob_hawkes::io::DiscardReport,
    outright_cancel_share: Option<f64>,
    malformed_rows: &'a [lob_hawkes::io::lobster::MalformedRow],
}

pub fn ingest(cfg: &Config, args: &IngestArgs) -> Result<()> {
    let mut opts = cfg.ingest;
    if let Some(t) = args.tick_units {
        opts.tick_units = t;
    }
    if let Some(w) = args.warm_up {
        opts.warm_up = w;
    }
    let parsed = parse_messages(open(&args.messages)?, &cfg.columns)?;
    let rows = args.book.as_deref().map(|p| parse_book_rows(open(p)?)).transpose()?;
    let initial = args.initial_book.as_deref().map(read_snapshot).transpose()?;
    let mut out = classify(&parsed.messages, rows.as_deref(), initial.as_ref(), &opts)?;
    out.report.malformed = parsed.malformed.len() as u64;
    info!(
        "{} messages: {} events, {} discarded, {} malformed",
        out.report.messages,
        out.report.events,
        out.report.discarded(),
        out.report.malformed
    );
    tables::write_classified_file(&args.out, &out.events)?;
    if let Some(p) = &args.trajectory {
        tables::write_trajectory_file(p, &out.trajectory)?;
    }
    if let Some(p) = &args.depth_out {
        tables::write_depth_samples_file(p, &out.depth_samples)?;
    }
    if let Some(p) = &args.report {
        let report = IngestReport {
            discards: &out.report,
            outright_cancel_share: out.report.outright_cancel_share(),
            malformed_rows: &parsed.malformed,
        };
        write_json(p, &report)?;
    }
    Ok(())
}

pub fn stats(cfg: &Config, args: &StatsArgs) -> Result<()> {
    let events = tables::read_classified_file(&args.classified)?;
    let trajectory = args.trajectory.as_deref().map(tables::read_trajectory_file).transpose()?;
    let st = empirical_stats(&events, trajectory.as_deref(), &cfg.stats)?;
    write_json(&args.out, &st)
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    out.with_file_name(format!("{stem}{suffix}"))
}

#[derive(Serialize)]
struct CalibrationReport<'a> {
    spread_beta: f64,
    spread_fit: Option<&'a SpreadBetaEstimate>,
    spectral_radius: f64,
    simulatable: bool,
    kernels: Vec<KernelReportEntry>,
    stationarity: &'a StationarityReport,
    days: &'a [DaySummary],
}

pub fn calibrate(cfg: &Config, args: &CalibrateArgs) -> Result<()> {
    let mut cc = cfg.calibration.clone();
    if let Some(g) = &args.grid {
        cc.grid = config::load::<GridSpec>(g)?;
    }
    if let Some(b) = args.spread_beta {
        cc.spread_beta = Some(b);
    }
    let days = args
        .classified
        .iter()
        .map(|p| {
            let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(DayEvents { id, events: tables::read_classified_file(p)? })
        })
        .collect::<Result<Vec<_>>>()?;
    let earliest = days.iter().filter_map(|d| d.events.first()).map(|e| e.time()).fold(f64::INFINITY, f64::min);
    if earliest.is_finite() && earliest > cc.window_start + 30.0 {
        warn!("first event at {earliest:.1}s but the estimation window starts at {:.1}s", cc.window_start);
    }
    let depth = match &args.depth {
        Some(p) => Some(DepthDistribution::from_samples(&tables::read_depth_samples_file(p)?)?),
        None => None,
    };
    let out = run_calibration(&days, &cc, depth)?;
    let c = &out.calibrated;
    if !c.simulatable {
        warn!("calibrated model has spectral radius {:.4} and is not simulatable", c.spectral_radius);
    }
    ModelDocument::from_calibrated(c).write(&args.out)?;
    let report = CalibrationReport {
        spread_beta: c.model.spread_beta(),
        spread_fit: out.spread_fit.as_ref(),
        spectral_radius: c.spectral_radius,
        simulatable: c.simulatable,
        kernels: c.kernel_report(),
        stationarity: &out.aggregate.report,
        days: &out.days,
    };
    let report_path = args.report.clone().unwrap_or_else(|| sibling(&args.out, ".report.json"));
    write_json(&report_path, &report)?;
    let days_path = args.days_csv.clone().unwrap_or_else(|| sibling(&args.out, ".days.csv"));
    tables::write_file_with(&days_path, |w| tables::write_day_summaries(w, &out.days))
}

pub fn simulate(cfg: &Config, args: &SimulateArgs) -> Result<()> {
    let doc = ModelDocument::read(&args.model)?;
    let horizon = args
        .horizon
        .or(cfg.simulation.horizon)
        .ok_or_else(|| Error::InvalidParameter("no horizon given (--horizon or simulation.horizon)".into()))?;
    let seed = args.seed.or(cfg.simulation.seed).unwrap_or(0);
    let book = doc.initial_book()?;
    let out = simulate_with(&doc.model, &doc.sizes, &doc.depth, &book, horizon, seed, cfg.simulation.options())?;
    info!("{} events in {horizon} s", out.events.len());
    let events: Vec<ClassifiedEvent> =
        out.events.iter().zip(&out.spreads).map(|(r, &s)| ClassifiedEvent { record: *r, spread_ticks: s }).collect();
    tables::write_classified_file(&args.out, &events)?;
    if let Some(p) = &args.trajectory {
        tables::write_trajectory_file(p, &out.trajectory)?;
    }
    if let (Some(mp), Some(bp)) = (&args.messages_out, &args.book_out) {
        let tick_units = (book.tick_size() * 1e4).round() as i64;
        let (msgs, rows) = to_lobster(&out.events, &out.trajectory, &book, tick_units, doc.model.session_start())?;
        tables::write_file_with(mp, |w| write_messages(w, &msgs))?;
        tables::write_file_with(bp, |w| write_book_rows(w, &rows))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DimensionSummary {
    event_type: EventType,
    events: usize,
    residuals: usize,
    mean: Option<f64>,
    ks_statistic: Option<f64>,
    p_value: Option<f64>,
}

#[derive(Serialize)]
struct HoeffdingSummary {
    event_type: EventType,
    pairs: usize,
    d: f64,
    null_sd: f64,
}

#[derive(Serialize)]
struct DiagnosticsSummary {
    events: usize,
    state_from_trajectory: bool,
    ks_passed_at_5pct: usize,
    dimensions: Vec<DimensionSummary>,
    count_window: f64,
    hoeffding: Vec<HoeffdingSummary>,
}

pub fn diagnose(cfg: &Config, args: &DiagnoseArgs) -> Result<()> {
    let doc = ModelDocument::read(&args.model)?;
    let events = tables::read_classified_file(&args.classified)?;
    let path = match &args.trajectory {
        Some(p) => {
            let trajectory = tables::read_trajectory_file(p)?;
            let records: Vec<_> = events.iter().map(|e| e.record).collect();
            StatePath::from_trajectory(&records, &trajectory, &doc.initial_book()?)?
        }
        None => StatePath::from_classified(&events)?,
    };
    let series = compute_residuals(&doc.model, &path)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", args.out.display()))))?;
    tables::write_file_with(&args.out.join("residuals.csv"), |w| tables::write_residuals(w, &series))?;

    let quantiles = args.quantiles.unwrap_or(cfg.diagnostics.quantiles);
    let mut qq = Vec::new();
    for s in &series {
        if s.taus.len() >= quantiles && quantiles > 0 {
            qq.push((s.event_type, qq_pairs(&s.taus, quantiles)?));
        } else {
            info!("{}: {} residuals, no Q-Q pairs", s.event_type, s.taus.len());
        }
    }
    tables::write_file_with(&args.out.join("qq.csv"), |w| tables::write_qq(w, &qq))?;

    let records: Vec<_> = events.iter().map(|e| e.record).collect();
    let window = cfg.diagnostics.count_window;
    let mut hoeffding = Vec::new();
    for e in EventType::ALL {
        let (x, y) = size_count_pairs(&records, e, window);
        if x.len() >= MIN_PAIRS {
            let r = hoeffding_d(&x, &y)?;
            hoeffding.push(HoeffdingSummary { event_type: e, pairs: r.n, d: r.d, null_sd: r.null_sd });
        }
    }
    let dimensions: Vec<DimensionSummary> = series
        .iter()
        .map(|s| DimensionSummary {
            event_type: s.event_type,
            events: records.iter().filter(|r| r.event_type == s.event_type).count(),
            residuals: s.taus.len(),
            mean: (!s.taus.is_empty()).then(|| s.taus.iter().sum::<f64>() / s.taus.len() as f64),
            ks_statistic: s.ks.map(|k| k.statistic),
            p_value: s.ks.map(|k| k.p_value),
        })
        .collect();
    let summary = DiagnosticsSummary {
        events: events.len(),
        state_from_trajectory: args.trajectory.is_some(),
        ks_passed_at_5pct: dimensions.iter().filter(|d| d.p_value.is_some_and(|p| p > 0.05)).count(),
        dimensions,
        count_window: window,
        hoeffding,
    };
    write_json(&args.out.join("summary.json"), &summary)
}
