//! JSON document bundling everything a simulation needs.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::book::{BookSnapshot, BookState, DepthDistribution};
use crate::calibration::CalibratedModel;
use crate::error::{Error, Result};
use crate::hawkes::HawkesModel;
use crate::size::SizeTable;

/// Book used when a document carries none: one-tick spread at 100.00/100.01
/// with the four visible queues at the mean revealed depth.
pub fn default_book(depth: &DepthDistribution) -> Result<BookState> {
    let d = depth.mean().round().max(1.0) as u64;
    BookState::with_depths(0.01, 10_001, 10_000, [d; 4])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub model: HawkesModel,
    pub sizes: SizeTable,
    pub depth: DepthDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_book: Option<BookSnapshot>,
}

impl ModelDocument {
    pub fn from_calibrated(c: &CalibratedModel) -> Self {
        Self { model: c.model.clone(), sizes: c.sizes.clone(), depth: c.depth.clone(), initial_book: None }
    }

    pub fn initial_book(&self) -> Result<BookState> {
        match &self.initial_book {
            Some(snap) => BookState::from_snapshot(snap),
            None => default_book(&self.depth),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let f = File::open(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let doc: Self = serde_json::from_reader(BufReader::new(f))?;
        doc.sizes.check_complete()?;
        Ok(doc)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let f = File::create(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}
