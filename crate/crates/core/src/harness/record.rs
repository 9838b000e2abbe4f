use std::io::Write;

use serde::Serialize;

use super::config::Format;
use crate::error::{Error, Result};

/// Bumped whenever the column set or order changes.
pub const SCHEMA_VERSION: u32 = 1;

pub const COLUMNS: [&str; 13] = [
    "trial_id",
    "seed",
    "T",
    "rho_true",
    "rho_ls",
    "rho_proj",
    "rho_clip",
    "err_ls",
    "err_proj",
    "err_clip",
    "rate_at_proj",
    "epsilon",
    "ls_was_stable",
];

pub const TIMING_COLUMNS: [&str; 3] = ["runtime_ms_ls", "runtime_ms_proj", "runtime_ms_clip"];

/// One trial. Errors are operator norms against the true matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub trial_id: u64,
    pub seed: u64,
    #[serde(rename = "T")]
    pub t: usize,
    pub rho_true: f64,
    pub rho_ls: f64,
    pub rho_proj: f64,
    /// Absent when clipping was not run or the estimate was defective.
    pub rho_clip: Option<f64>,
    pub err_ls: f64,
    pub err_proj: f64,
    pub err_clip: Option<f64>,
    pub rate_at_proj: f64,
    pub epsilon: f64,
    pub ls_was_stable: bool,
    #[serde(skip_serializing_if = "Option::is_none", flatten)]
    pub runtime_ms: Option<Runtimes>,
}

/// Wall-clock milliseconds per stage; only emitted on request since they
/// break byte-identical reruns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Runtimes {
    pub runtime_ms_ls: f64,
    pub runtime_ms_proj: f64,
    pub runtime_ms_clip: f64,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ExperimentRecord {
    fn csv_fields(&self) -> Vec<String> {
        let mut row = vec![
            self.trial_id.to_string(),
            self.seed.to_string(),
            self.t.to_string(),
            self.rho_true.to_string(),
            self.rho_ls.to_string(),
            self.rho_proj.to_string(),
            opt(self.rho_clip),
            self.err_ls.to_string(),
            self.err_proj.to_string(),
            opt(self.err_clip),
            self.rate_at_proj.to_string(),
            self.epsilon.to_string(),
            self.ls_was_stable.to_string(),
        ];
        if let Some(r) = self.runtime_ms {
            row.extend([r.runtime_ms_ls, r.runtime_ms_proj, r.runtime_ms_clip].map(|v| v.to_string()));
        }
        row
    }
}

/// Writes records in trial order. The CSV header is always written, so an
/// empty record set yields just the header.
pub fn write_records<W: Write>(records: &[ExperimentRecord], format: Format, timings: bool, out: W) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            let mut header: Vec<&str> = COLUMNS.to_vec();
            if timings {
                header.extend(TIMING_COLUMNS);
            }
            w.write_record(&header).map_err(csv_err)?;
            for r in records {
                w.write_record(r.csv_fields()).map_err(csv_err)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, records).map_err(|e| Error::Io(e.to_string()))?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
