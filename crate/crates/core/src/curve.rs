//! Reading and writing of `p,ent` curve files.
//!
//! The format interoperates with the usual plot-data convention: a mandatory
//! first line `p,ent`, then one `<p>,<ent>` row per point, each line
//! terminated by a single line feed. Values are written with Rust's shortest
//! round-trip float formatting, so a written file parses back bit-exactly.

use std::fs;
use std::path::Path;

use thiserror::Error;

/// Errors raised while reading or writing curve files.
#[derive(Debug, Error)]
pub enum CurveError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line 1: expected header `p,ent`, found `{found}`")]
    BadHeader { found: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("curve file must contain at least 2 rows, found {rows}")]
    TooFewRows { rows: usize },
    #[error("line {line}: p values must be strictly increasing")]
    NonIncreasing { line: usize },
}

const HEADER: &str = "p,ent";

/// Parses a curve file, enforcing the exact header, at least two rows and a
/// strictly increasing p column. Errors carry the offending line number.
pub fn read_curve(path: &Path) -> Result<Vec<(f64, f64)>, CurveError> {
    let contents = fs::read_to_string(path)?;
    let mut lines = contents.split('\n').enumerate();

    match lines.next() {
        Some((_, line)) if line == HEADER => {}
        Some((_, line)) => {
            return Err(CurveError::BadHeader { found: line.to_string() });
        }
        None => return Err(CurveError::BadHeader { found: String::new() }),
    }

    let mut points = Vec::new();
    for (index, line) in lines {
        let line_no = index + 1;
        if line.is_empty() {
            // A trailing line feed leaves one empty final chunk.
            continue;
        }
        let mut fields = line.split(',');
        let (p_field, ent_field) = match (fields.next(), fields.next(), fields.next()) {
            (Some(p), Some(ent), None) => (p, ent),
            _ => {
                return Err(CurveError::Parse {
                    line: line_no,
                    message: format!("expected 2 comma-separated fields, found `{line}`"),
                })
            }
        };
        let parse = |field: &str, name: &str| -> Result<f64, CurveError> {
            let value: f64 = field.parse().map_err(|_| CurveError::Parse {
                line: line_no,
                message: format!("cannot parse {name} value `{field}`"),
            })?;
            if !value.is_finite() {
                return Err(CurveError::Parse {
                    line: line_no,
                    message: format!("non-finite {name} value `{field}`"),
                });
            }
            Ok(value)
        };
        let p = parse(p_field, "p")?;
        let ent = parse(ent_field, "ent")?;
        if let Some(&(prev, _)) = points.last() {
            if p <= prev {
                return Err(CurveError::NonIncreasing { line: line_no });
            }
        }
        points.push((p, ent));
    }

    if points.len() < 2 {
        return Err(CurveError::TooFewRows { rows: points.len() });
    }
    Ok(points)
}

/// Writes a curve file in the exact `p,ent` format.
pub fn write_curve(
    path: &Path,
    points: impl IntoIterator<Item = (f64, f64)>,
) -> Result<(), CurveError> {
    let mut contents = String::from(HEADER);
    contents.push('\n');
    for (p, ent) in points {
        contents.push_str(&format!("{p},{ent}\n"));
    }
    fs::write(path, contents)?;
    Ok(())
}
