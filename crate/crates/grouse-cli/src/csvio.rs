//! File formats: partially observed streams, entry lists, telemetry, dense
//! matrices, and timing tables.
//!
//! All files are UTF-8 with LF line endings and `.` as the decimal
//! separator. Floats are written with enough digits to round-trip exactly.
//! Parse errors carry the path and 1-based line number.

use std::fmt::Write as _;
use std::path::Path;

use grouse_core::{IndexSet, MaskedVector};
use nalgebra::DMatrix;

use crate::error::{CliError, Result};

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("reading {}", path.display()), e))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::io(format!("creating {}", parent.display()), e))?;
        }
    }
    std::fs::write(path, contents)
        .map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn parse_float(path: &Path, line: usize, field: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| parse_error(path, line, format!("expected a number, found `{field}`")))
}

// ---------------------------------------------------------------------------
// Partially observed streams
// ---------------------------------------------------------------------------

/// Reads a stream of partially observed vectors.
///
/// The first line declares the ambient dimension as `n=<int>`; every later
/// line holds exactly n comma-separated fields, one per coordinate, with an
/// empty field meaning "unobserved".
pub fn read_stream(path: &Path) -> Result<Vec<MaskedVector>> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty file; expected an n=<int> header"))?;
    let n: usize = header
        .trim()
        .strip_prefix("n=")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| {
            parse_error(path, 1, format!("expected header n=<int>, found `{header}`"))
        })?;
    if n == 0 {
        return Err(parse_error(path, 1, "ambient dimension must be at least 1"));
    }

    let mut stream = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != n {
            return Err(parse_error(
                path,
                line_no,
                format!("expected {n} fields, found {}", fields.len()),
            ));
        }
        let mut support = Vec::new();
        let mut values = Vec::new();
        for (i, field) in fields.iter().enumerate() {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            support.push(i);
            values.push(parse_float(path, line_no, field)?);
        }
        let indices = IndexSet::new(support)
            .map_err(|e| parse_error(path, line_no, e.to_string()))?;
        let masked = MaskedVector::new(n, indices, nalgebra::DVector::from_vec(values))
            .map_err(|e| parse_error(path, line_no, e.to_string()))?;
        stream.push(masked);
    }
    Ok(stream)
}

/// Writes a stream in the format [`read_stream`] accepts; the round trip is
/// bitwise exact.
pub fn write_stream(path: &Path, ambient_dim: usize, stream: &[MaskedVector]) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "n={ambient_dim}");
    for masked in stream {
        let mut fields = vec![String::new(); ambient_dim];
        for (k, &i) in masked.support().iter().enumerate() {
            fields[i] = format!("{}", masked.values()[k]);
        }
        let _ = writeln!(out, "{}", fields.join(","));
    }
    write_file(path, &out)
}

// ---------------------------------------------------------------------------
// Entry lists
// ---------------------------------------------------------------------------

/// Reads `(row, col, value)` triples from a file with a `row,col,value`
/// header line.
pub fn read_entries(path: &Path) -> Result<Vec<(usize, usize, f64)>> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty file; expected a row,col,value header"))?;
    if header.trim() != "row,col,value" {
        return Err(parse_error(
            path,
            1,
            format!("expected header `row,col,value`, found `{header}`"),
        ));
    }
    let mut entries = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_error(
                path,
                line_no,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let row: usize = fields[0].trim().parse().map_err(|_| {
            parse_error(path, line_no, format!("bad row index `{}`", fields[0]))
        })?;
        let col: usize = fields[1].trim().parse().map_err(|_| {
            parse_error(path, line_no, format!("bad column index `{}`", fields[1]))
        })?;
        let value = parse_float(path, line_no, fields[2].trim())?;
        entries.push((row, col, value));
    }
    Ok(entries)
}

pub fn write_entries(path: &Path, entries: &[(usize, usize, f64)]) -> Result<()> {
    let mut out = String::from("row,col,value\n");
    for &(row, col, value) in entries {
        let _ = writeln!(out, "{row},{col},{value}");
    }
    write_file(path, &out)
}

// ---------------------------------------------------------------------------
// Telemetry
// ---------------------------------------------------------------------------

/// One reported step of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRow {
    /// Step counter at the time of the report (1-based, after the step).
    pub t: u64,
    pub eta: f64,
    /// Residual norm over observed-signal norm; the online proxy for error.
    pub residual_signal: f64,
    /// Masked squared fit error of the step.
    pub cost: f64,
    /// Distance to the true subspace when the truth is known.
    pub subspace_error: Option<f64>,
    pub skipped: bool,
    /// Wall time of the update itself, in nanoseconds.
    pub wall_nanos: u64,
}

const TELEMETRY_HEADER: &str = "t,eta,residual_signal,cost,subspace_error,skipped,wall_nanos";

pub fn write_telemetry(path: &Path, rows: &[TelemetryRow]) -> Result<()> {
    let mut out = String::from(TELEMETRY_HEADER);
    out.push('\n');
    for row in rows {
        let sub = row
            .subspace_error
            .map(|e| format!("{e}"))
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            row.t, row.eta, row.residual_signal, row.cost, sub, row.skipped, row.wall_nanos
        );
    }
    write_file(path, &out)
}

pub fn read_telemetry(path: &Path) -> Result<Vec<TelemetryRow>> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_error(path, 1, "empty file; expected a telemetry header"))?;
    if header.trim() != TELEMETRY_HEADER {
        return Err(parse_error(
            path,
            1,
            format!("expected header `{TELEMETRY_HEADER}`, found `{header}`"),
        ));
    }
    let mut rows = Vec::new();
    for (idx, raw) in lines {
        let line_no = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').collect();
        if fields.len() != 7 {
            return Err(parse_error(
                path,
                line_no,
                format!("expected 7 fields, found {}", fields.len()),
            ));
        }
        let t = fields[0]
            .trim()
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("bad step `{}`", fields[0])))?;
        let eta = parse_float(path, line_no, fields[1].trim())?;
        let residual_signal = parse_float(path, line_no, fields[2].trim())?;
        let cost = parse_float(path, line_no, fields[3].trim())?;
        let sub_field = fields[4].trim();
        let subspace_error = if sub_field.is_empty() {
            None
        } else {
            Some(parse_float(path, line_no, sub_field)?)
        };
        let skipped = match fields[5].trim() {
            "true" => true,
            "false" => false,
            other => {
                return Err(parse_error(
                    path,
                    line_no,
                    format!("bad skipped flag `{other}`"),
                ))
            }
        };
        let wall_nanos = fields[6]
            .trim()
            .parse()
            .map_err(|_| parse_error(path, line_no, format!("bad nanos `{}`", fields[6])))?;
        rows.push(TelemetryRow {
            t,
            eta,
            residual_signal,
            cost,
            subspace_error,
            skipped,
            wall_nanos,
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Dense matrices
// ---------------------------------------------------------------------------

/// Writes a dense matrix, one row per line, comma-separated.
pub fn write_matrix(path: &Path, matrix: &DMatrix<f64>) -> Result<()> {
    let mut out = String::new();
    for i in 0..matrix.nrows() {
        for j in 0..matrix.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", matrix[(i, j)]);
        }
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = read_file(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for field in raw.split(',') {
            row.push(parse_float(path, line_no, field.trim())?);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_error(
                    path,
                    line_no,
                    format!("expected {} fields, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(path, 1, "empty matrix file"));
    }
    let nrows = rows.len();
    let ncols = rows[0].len();
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

// ---------------------------------------------------------------------------
// Timing tables
// ---------------------------------------------------------------------------

/// Writes `(ambient dimension, median nanoseconds per step)` pairs with an
/// `n,ns_per_step` header.
pub fn write_bench(path: &Path, points: &[(usize, f64)]) -> Result<()> {
    let mut out = String::from("n,ns_per_step\n");
    for &(n, ns) in points {
        let _ = writeln!(out, "{n},{ns}");
    }
    write_file(path, &out)
}
