//! Signal serialization.
//!
//! CSV layout: the first line holds `rows,cols`; each following line is one
//! row of comma-separated values. Values are printed with Rust's shortest
//! round-trip decimal representation, so a write/read cycle is bit-exact.
//! 1D signals are stored as a single row.
//!
//! PGM output (`P2`) is linearly rescaled to `0..=255` and meant for viewing
//! only.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{Grid, Signal};

pub fn signal_to_csv_string(signal: &Signal) -> String {
    let g = signal.grid();
    let mut out = String::with_capacity(signal.len() * 20);
    let _ = writeln!(out, "{},{}", g.rows(), g.cols());
    for row in signal.values().chunks(g.cols()) {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_signal_csv(signal: &Signal, path: &Path) -> Result<()> {
    fs::write(path, signal_to_csv_string(signal))?;
    Ok(())
}

/// Parses the CSV layout. A header with `rows == 1` yields a 1D grid.
pub fn parse_signal_csv(text: &str, path: &Path) -> Result<Signal> {
    let fmt_err = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or_else(|| fmt_err("empty file".into()))?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| fmt_err(format!("bad header {header:?}: {e}")))?;
    if dims.len() != 2 {
        return Err(fmt_err(format!("header must be rows,cols, got {header:?}")));
    }
    let (rows, cols) = (dims[0], dims[1]);
    let mut values = Vec::with_capacity(rows * cols);
    for (r, line) in lines.enumerate() {
        let before = values.len();
        for tok in line.split(',') {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|e| fmt_err(format!("row {r}: bad value {tok:?}: {e}")))?;
            values.push(v);
        }
        if values.len() - before != cols {
            return Err(fmt_err(format!(
                "row {r} has {} values, expected {cols}",
                values.len() - before
            )));
        }
    }
    if values.len() != rows * cols {
        return Err(fmt_err(format!(
            "expected {} values, found {}",
            rows * cols,
            values.len()
        )));
    }
    let grid = if rows == 1 {
        Grid::new_1d(cols)?
    } else {
        Grid::new_2d(rows, cols)?
    };
    Signal::new(grid, values)
}

pub fn read_signal_csv(path: &Path) -> Result<Signal> {
    let text = fs::read_to_string(path)?;
    parse_signal_csv(&text, path)
}

/// Reads a flat weight vector stored in the signal CSV layout.
pub fn read_weights_csv(path: &Path) -> Result<Vec<f64>> {
    Ok(read_signal_csv(path)?.into_values())
}

pub fn signal_to_pgm_string(signal: &Signal) -> String {
    let g = signal.grid();
    let (lo, hi) = (signal.min(), signal.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = String::new();
    let _ = writeln!(out, "P2\n{} {}\n255", g.cols(), g.rows());
    for row in signal.values().chunks(g.cols()) {
        let line: Vec<String> = row
            .iter()
            .map(|v| (((v - lo) / span) * 255.0).round().clamp(0.0, 255.0).to_string())
            .collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_signal_pgm(signal: &Signal, path: &Path) -> Result<()> {
    fs::write(path, signal_to_pgm_string(signal))?;
    Ok(())
}
