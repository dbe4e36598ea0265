//! Pipeline configuration file (TOML or JSON, chosen by extension).

use std::path::Path;

use lob_hawkes::calibration::CalibrationConfig;
use lob_hawkes::hawkes::SimOptions;
use lob_hawkes::io::{ClassifyOptions, ColumnMap, StatsOptions};
use lob_hawkes::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub horizon: Option<f64>,
    pub seed: Option<u64>,
    pub bound_staleness: f64,
    pub tail_tol: f64,
    pub max_lookback: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let o = SimOptions::default();
        Self { horizon: None, seed: None, bound_staleness: o.bound_staleness, tail_tol: o.tail_tol, max_lookback: o.max_lookback }
    }
}

impl SimulationConfig {
    pub fn options(&self) -> SimOptions {
        SimOptions { bound_staleness: self.bound_staleness, tail_tol: self.tail_tol, max_lookback: self.max_lookback }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub quantiles: usize,
    /// Look-ahead window of the size/arrival independence test, seconds.
    pub count_window: f64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { quantiles: 100, count_window: lob_hawkes::diagnostics::DEFAULT_COUNT_WINDOW }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub ingest: ClassifyOptions,
    /// Message-file column positions.
    pub columns: ColumnMap,
    pub stats: StatsOptions,
    pub calibration: CalibrationConfig,
    pub simulation: SimulationConfig,
    pub diagnostics: DiagnosticsConfig,
}

/// Parses a TOML file (`.toml`) or JSON file (anything else).
pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let is_toml = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    if is_toml {
        toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
    }
}
