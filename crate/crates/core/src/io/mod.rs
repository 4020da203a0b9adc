//! Run configuration, CSV and JSON files.

mod config;
mod tables;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

pub use config::{
    FitBlock, LevelBlock, LevelsBlock, LindbladBlock, NoiseBlock, NoiseScale, RunConfig, ScheduleBlock,
    DEFAULT_AMPLITUDE,
};
pub use tables::{
    fmt_f64, fmt_us, parse_us, read_curves, read_psd, read_surface, read_trace, write_atomic, write_curves, write_psd,
    write_series, write_surface, write_table, write_trace, Provenance, Table, CURVE_HEADER, PSD_HEADER,
    SURFACE_HEADER, TRACE_HEADER,
};

use crate::analysis::{FitResult, GridSearchResult};
use crate::error::Result;

/// Summary of one command: provenance, the files written, fit results and
/// the grid-search outcome where applicable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub provenance: Provenance,
    pub files: Vec<String>,
    /// Named scalars such as the resolved noise scale or integration step.
    pub values: BTreeMap<String, f64>,
    pub fits: BTreeMap<String, FitResult>,
    pub grid_search: Option<GridSearchResult>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| crate::Error::Parse { line: e.line(), message: e.to_string() })
}
