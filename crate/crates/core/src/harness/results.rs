//! CSV and JSON result files.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::sweep::BerResult;
use crate::error::{Error, Result};

/// Exact CSV header.
pub const CSV_COLUMNS: [&str; 9] = [
    "detector",
    "snr_db",
    "trials",
    "bit_errors",
    "bits_sent",
    "ber",
    "ci_low",
    "ci_high",
    "wall_time_s",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResultFormat {
    Csv,
    Json,
}

impl ResultFormat {
    /// From the file extension; anything but `.json` is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ResultFormat::Json,
            _ => ResultFormat::Csv,
        }
    }
}

/// JSON result file: the results together with what is needed to replay them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument<C> {
    pub version: String,
    pub seed: u64,
    pub config: C,
    pub results: Vec<BerResult>,
}

impl<C> ResultsDocument<C> {
    pub fn new(config: C, seed: u64, results: Vec<BerResult>) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            results,
        }
    }
}

pub fn write_csv(results: &[BerResult], path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in results {
        w.write_record([
            r.detector.clone(),
            r.snr_db.to_string(),
            r.trials.to_string(),
            r.bit_errors.to_string(),
            r.bits_sent.to_string(),
            r.ber.to_string(),
            r.ci_low.to_string(),
            r.ci_high.to_string(),
            r.wall_time_s.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<C: Serialize>(doc: &ResultsDocument<C>, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(doc).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<C: DeserializeOwned>(path: &Path) -> Result<ResultsDocument<C>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `results` in `format`; JSON also records `config` and `seed`.
pub fn write_results<C: Serialize>(results: &[BerResult], config: &C, seed: u64, path: &Path, format: ResultFormat) -> Result<()> {
    match format {
        ResultFormat::Csv => write_csv(results, path),
        ResultFormat::Json => write_json(&ResultsDocument::new(config, seed, results.to_vec()), path),
    }
}
