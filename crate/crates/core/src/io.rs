//! Plain-text matrix files.
//!
//! ```text
//! # rows=2 cols=3
//! 1.0,2.0,3.0
//! 4.0,5.0,6.0
//! ```
//!
//! Values are written in shortest round-trip form, so a store/load cycle is
//! bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.len() * 20 + 32);
    let _ = writeln!(out, "# rows={} cols={}", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                out.push(',');
            }
            first = false;
            let _ = write!(out, "{v:?}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut declared: Option<(usize, usize)> = None;
    let mut values = Vec::new();
    let mut cols: Option<usize> = None;
    let mut rows = 0usize;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(header) = line.strip_prefix('#') {
            if idx == 0 {
                declared = Some(parse_header(header, line_no)?);
            }
            continue;
        }
        let start = values.len();
        for token in line.split(',') {
            let token = token.trim();
            let v: f64 = token.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("non-numeric token `{token}`"),
            })?;
            values.push(v);
        }
        let width = values.len() - start;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("row {} has {width} values, expected {c}", rows + 1),
                })
            }
            _ => {}
        }
        rows += 1;
    }

    let cols = match (cols, declared) {
        (Some(c), _) => c,
        (None, Some((_, c))) => c,
        (None, None) => 0,
    };
    if let Some((r, c)) = declared {
        if r != rows || (rows > 0 && c != cols) {
            return Err(Error::Parse {
                line: 1,
                message: format!("header declares {r}x{c}, body is {rows}x{cols}"),
            });
        }
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

fn parse_header(header: &str, line: usize) -> Result<(usize, usize)> {
    let mut rows = None;
    let mut cols = None;
    for part in header.split_whitespace() {
        let (key, value) = match part.split_once('=') {
            Some(kv) => kv,
            None => continue,
        };
        let parsed = value.parse::<usize>().map_err(|_| Error::Parse {
            line,
            message: format!("bad header value `{part}`"),
        });
        match key {
            "rows" => rows = Some(parsed?),
            "cols" => cols = Some(parsed?),
            _ => {}
        }
    }
    match (rows, cols) {
        (Some(r), Some(c)) => Ok((r, c)),
        _ => Err(Error::Parse {
            line,
            message: "header must be `# rows=<r> cols=<c>`".into(),
        }),
    }
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text)
}

pub fn store_matrix(m: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix(m)).map_err(|e| Error::io(path, e))
}

/// Vectors are stored as single-column matrices.
pub fn load_vector(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    let m = load_matrix(path)?;
    if m.ncols() != 1 && m.nrows() != 1 {
        return Err(Error::mismatch(
            "vector file",
            "a single column",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(DVector::from_iterator(m.len(), m.iter().copied()))
}

pub fn store_vector(v: &DVector<f64>, path: impl AsRef<Path>) -> Result<()> {
    store_matrix(&DMatrix::from_column_slice(v.len(), 1, v.as_slice()), path)
}
