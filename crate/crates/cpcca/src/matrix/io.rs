//! Matrix file formats: matrix-market coordinate text and headerless dense
//! CSV.
//!
//! Values are written with Rust's shortest round-trip float formatting, so
//! save/load reproduces every entry bit for bit. Coordinate files keep
//! explicitly stored zeros in the pattern.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::{StochasticMatrix, DEFAULT_ROW_SUM_TOL};

const MM_HEADER: &str = "%%MatrixMarket matrix coordinate real general";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatrixFormat {
    /// Matrix-market coordinate text: banner, `rows cols nnz`, then
    /// 1-based `i j value` triplets.
    Coordinate,
    /// Dense CSV, one matrix row per line, no header.
    DenseCsv,
}

impl MatrixFormat {
    /// Infer a format from a path extension: `.mtx`/`.mm` are coordinate,
    /// `.csv` is dense. Anything else defaults to coordinate.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => MatrixFormat::DenseCsv,
            _ => MatrixFormat::Coordinate,
        }
    }
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mtx" | "coordinate" => Ok(MatrixFormat::Coordinate),
            "csv" | "dense" => Ok(MatrixFormat::DenseCsv),
            other => Err(Error::InvalidSpec(format!(
                "unknown matrix format `{other}` (expected mtx|coordinate|csv|dense)"
            ))),
        }
    }
}

impl fmt::Display for MatrixFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixFormat::Coordinate => write!(f, "mtx"),
            MatrixFormat::DenseCsv => write!(f, "csv"),
        }
    }
}

/// Serialize a matrix to a string in the given format.
pub fn format_matrix(m: &StochasticMatrix, format: MatrixFormat) -> String {
    let mut out = String::new();
    match format {
        MatrixFormat::Coordinate => {
            out.push_str(MM_HEADER);
            out.push('\n');
            out.push_str(&format!("{} {} {}\n", m.dim(), m.dim(), m.stored_entries()));
            m.for_each_stored(|i, j, v| {
                out.push_str(&format!("{} {} {}\n", i + 1, j + 1, v));
            });
        }
        MatrixFormat::DenseCsv => {
            let dense = m.to_dense();
            for row in dense.rows() {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
        }
    }
    out
}

pub fn save_matrix(m: &StochasticMatrix, path: &Path, format: MatrixFormat) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(format_matrix(m, format).as_bytes())?;
    Ok(())
}

/// Parse matrix text in the given format. `normalize` rescales rows instead
/// of validating row sums (still rejecting negative entries and zero rows).
pub fn parse_matrix(
    text: &str,
    format: MatrixFormat,
    normalize: bool,
    tolerance: f64,
) -> Result<StochasticMatrix> {
    match format {
        MatrixFormat::Coordinate => parse_coordinate(text, normalize, tolerance),
        MatrixFormat::DenseCsv => parse_csv(text, normalize, tolerance),
    }
}

pub fn load_matrix(
    path: &Path,
    format: MatrixFormat,
    normalize: bool,
    tolerance: f64,
) -> Result<StochasticMatrix> {
    let text = fs::read_to_string(path)?;
    parse_matrix(&text, format, normalize, tolerance)
}

/// Load with the default row-sum tolerance and strict validation.
pub fn load_matrix_default(path: &Path, format: MatrixFormat) -> Result<StochasticMatrix> {
    load_matrix(path, format, false, DEFAULT_ROW_SUM_TOL)
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_coordinate(text: &str, normalize: bool, tolerance: f64) -> Result<StochasticMatrix> {
    // (line_no, content) for non-comment, non-blank lines; banner checked first
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (first_no, first) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    if !first.to_ascii_lowercase().starts_with("%%matrixmarket") {
        return Err(parse_err(first_no, "missing %%MatrixMarket banner"));
    }
    let banner = first.to_ascii_lowercase();
    for word in ["matrix", "coordinate", "real", "general"] {
        if !banner.contains(word) {
            return Err(parse_err(
                first_no,
                format!("unsupported banner (expected `{MM_HEADER}`)"),
            ));
        }
    }

    let mut data = lines.filter(|(_, l)| !l.starts_with('%'));
    let (size_no, size_line) =
        data.next().ok_or_else(|| parse_err(first_no, "missing size line"))?;
    let dims: Vec<usize> = size_line
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(size_no, format!("bad size token `{t}`"))))
        .collect::<Result<_>>()?;
    let [rows, cols, nnz] = dims[..] else {
        return Err(parse_err(size_no, "size line must be `rows cols nnz`"));
    };
    if rows != cols {
        return Err(Error::NotSquare(rows, cols));
    }

    let mut entries: Vec<(usize, usize, usize, f64)> = Vec::with_capacity(nnz);
    for (no, line) in data {
        if entries.len() == nnz {
            return Err(parse_err(no, format!("more than the declared {nnz} entries")));
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let [si, sj, sv] = toks[..] else {
            return Err(parse_err(no, "entry line must be `row col value`"));
        };
        let i: usize =
            si.parse().map_err(|_| parse_err(no, format!("bad row index `{si}`")))?;
        let j: usize =
            sj.parse().map_err(|_| parse_err(no, format!("bad column index `{sj}`")))?;
        let v: f64 = sv.parse().map_err(|_| parse_err(no, format!("bad value `{sv}`")))?;
        if i < 1 || i > rows || j < 1 || j > cols {
            return Err(parse_err(no, format!("index ({i}, {j}) outside 1..={rows}")));
        }
        entries.push((i - 1, j - 1, no, v));
    }
    if entries.len() < nnz {
        return Err(parse_err(
            text.lines().count(),
            format!("expected {nnz} entries, found {}", entries.len()),
        ));
    }
    entries.sort_by_key(|&(i, j, _, _)| (i, j));
    for win in entries.windows(2) {
        if (win[0].0, win[0].1) == (win[1].0, win[1].1) {
            return Err(parse_err(
                win[1].2,
                format!("duplicate entry ({}, {})", win[1].0 + 1, win[1].1 + 1),
            ));
        }
    }
    let triplets = entries.into_iter().map(|(i, j, _, v)| (i, j, v)).collect();
    StochasticMatrix::from_coordinate(rows, triplets, tolerance, normalize)
}

fn parse_csv(text: &str, normalize: bool, tolerance: f64) -> Result<StochasticMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (no, line) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| parse_err(no, format!("bad value `{}`", t.trim())))
            })
            .collect::<Result<_>>()?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(
                    no,
                    format!("row has {} columns, expected {w}", row.len()),
                ));
            }
            _ => {}
        }
        rows.push(row);
    }
    let n = rows.len();
    let w = width.ok_or_else(|| parse_err(1, "empty file"))?;
    if n != w {
        return Err(Error::NotSquare(n, w));
    }
    let dense = ndarray::Array2::from_shape_vec((n, w), rows.concat())
        .expect("row lengths checked above");
    if normalize {
        StochasticMatrix::row_normalize(dense)
    } else {
        StochasticMatrix::validate(dense, tolerance)
    }
}
