//! Plain-text series and plot-data files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hurst::Fluctuation;

/// One value per line; blank lines and lines starting with `#` are skipped.
pub fn read_series(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_series(&text).map_err(|(line, msg)| Error::parse(path, format!("line {line}: {msg}")))
}

fn parse_series(text: &str) -> std::result::Result<Vec<f64>, (usize, String)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| (i + 1, format!("not a number: {line:?}")))?;
        if !v.is_finite() {
            return Err((i + 1, format!("non-finite value {v}")));
        }
        out.push(v);
    }
    Ok(out)
}

pub fn write_series(path: &Path, values: &[f64]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for v in values {
        writeln!(out, "{v}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Tab-separated `scale`, `fluctuation` rows with a header.
pub fn write_fluctuation(path: &Path, fluct: &Fluctuation) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "scale\tfluctuation").map_err(io)?;
    for (l, f) in fluct.scales.iter().zip(&fluct.fluctuations) {
        writeln!(out, "{l}\t{f}").map_err(io)?;
    }
    out.flush().map_err(io)
}
