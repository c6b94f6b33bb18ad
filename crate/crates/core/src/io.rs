//! CSV formats for raw feature series and density sequences.
//!
//! Raw series: one numeric column, or `timestamp,value`, with an optional
//! header line. Density sequences: one row per density, one column per grid
//! point, plus a JSON sidecar `<path>.json` with grid metadata.

use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::distsummary::{DsfSeries, PdfOnGrid, SupportInterval};
use crate::error::{Error, Result};

fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.naive_utc());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t);
        }
    }
    if let Ok(secs) = s.parse::<i64>() {
        if let Some(t) = DateTime::from_timestamp(secs, 0) {
            return Ok(t.naive_utc());
        }
    }
    Err(Error::Parse(format!("unrecognized timestamp '{s}'")))
}

/// Parses a raw feature series from CSV text.
pub fn parse_dsf_csv(text: &str) -> Result<DsfSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut stamps = Vec::new();
    let mut width = None;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let w = rec.len();
        if w != 1 && w != 2 {
            return Err(Error::Parse(format!("line {}: expected 1 or 2 columns, got {w}", line + 1)));
        }
        let value_field = &rec[w - 1];
        let value = match value_field.parse::<f64>() {
            Ok(v) => v,
            Err(_) if line == 0 && values.is_empty() => continue,
            Err(_) => return Err(Error::Parse(format!("line {}: bad value '{value_field}'", line + 1))),
        };
        match width {
            None => width = Some(w),
            Some(prev) if prev != w => {
                return Err(Error::Parse(format!("line {}: column count changed", line + 1)));
            }
            _ => {}
        }
        if w == 2 {
            stamps.push(parse_timestamp(&rec[0])?);
        }
        values.push(value);
    }
    if width == Some(2) {
        DsfSeries::with_timestamps(values, stamps)
    } else {
        DsfSeries::new(values)
    }
}

pub fn read_dsf_csv(path: &Path) -> Result<DsfSeries> {
    parse_dsf_csv(&std::fs::read_to_string(path)?)
}

/// Writes one value per line (no header), or `timestamp,value` when the
/// series carries timestamps.
pub fn write_dsf_csv(series: &DsfSeries, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    match series.timestamps() {
        Some(ts) => {
            for (t, v) in ts.iter().zip(series.values()) {
                writeln!(w, "{},{}", t.format("%Y-%m-%dT%H:%M:%S"), v)?;
            }
        }
        None => {
            for v in series.values() {
                writeln!(w, "{v}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Metadata stored next to a density-sequence CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfSequenceMeta {
    pub grid_size: usize,
    /// Mixing weight already applied to the stored densities (0 if none).
    pub alpha_mix: f64,
    /// Support used to scale raw values, when the densities came from data.
    pub support: Option<SupportInterval>,
    /// Known change point, for simulated sequences.
    pub tau: Option<usize>,
    pub seed: Option<u64>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the densities as CSV rows plus the metadata sidecar.
pub fn write_pdf_sequence(pdfs: &[PdfOnGrid], meta: &PdfSequenceMeta, path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    for f in pdfs {
        let mut first = true;
        for v in f.values() {
            if !first {
                w.write_all(b",")?;
            }
            first = false;
            write!(w, "{v}")?;
        }
        w.write_all(b"\n")?;
    }
    w.flush()?;
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

/// Reads a density-sequence CSV. The sidecar is optional; without it the
/// grid size is taken from the first row.
pub fn read_pdf_sequence(path: &Path) -> Result<(Vec<PdfOnGrid>, Option<PdfSequenceMeta>)> {
    let side = sidecar_path(path);
    let meta: Option<PdfSequenceMeta> = if side.exists() {
        Some(serde_json::from_str(&std::fs::read_to_string(side)?)?)
    } else {
        None
    };
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut pdfs = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {}: bad value '{f}'", i + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(m) = &meta {
            if vals.len() != m.grid_size {
                return Err(Error::GridMismatch {
                    expected: m.grid_size,
                    got: vals.len(),
                });
            }
        }
        pdfs.push(PdfOnGrid::normalized(vals)?);
    }
    Ok((pdfs, meta))
}
