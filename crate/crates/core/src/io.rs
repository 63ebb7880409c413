//! Matrix and result file formats.
//!
//! Matrices are read either as coordinate text (a `rows cols nnz` header,
//! then 1-based `row col value` triples; `%` starts a comment, and a
//! `%%MatrixMarket ... symmetric` banner mirrors entries) or as dense
//! comma-delimited rows. Files ending in `.mtx` or starting with a
//! `%%MatrixMarket` banner use the coordinate reader.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = read_to_string(path)?;
    let is_coordinate = path.extension().is_some_and(|e| e == "mtx")
        || text.trim_start().starts_with("%%MatrixMarket");
    if is_coordinate {
        parse_coordinate(path, &text)
    } else {
        parse_dense(path, &text)
    }
}

pub fn parse_coordinate(path: &Path, text: &str) -> Result<DMatrix<f64>> {
    let mut symmetric = false;
    let mut header: Option<(usize, usize, usize)> = None;
    let mut matrix = DMatrix::zeros(0, 0);
    let mut seen = 0usize;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.starts_with("%%MatrixMarket") {
            let banner = line.to_ascii_lowercase();
            if !banner.contains("coordinate") {
                return Err(parse_err(path, line_no, "only coordinate MatrixMarket files are supported"));
            }
            if banner.contains("complex") || banner.contains("pattern") {
                return Err(parse_err(path, line_no, "only real-valued entries are supported"));
            }
            symmetric = banner.contains("symmetric");
            continue;
        }
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match header {
            None => {
                if fields.len() != 3 {
                    return Err(parse_err(path, line_no, "expected header `rows cols nnz`"));
                }
                let nums: Vec<usize> = fields
                    .iter()
                    .map(|f| f.parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| parse_err(path, line_no, format!("bad header: {e}")))?;
                header = Some((nums[0], nums[1], nums[2]));
                matrix = DMatrix::zeros(nums[0], nums[1]);
            }
            Some((rows, cols, _)) => {
                if fields.len() != 3 {
                    return Err(parse_err(path, line_no, "expected `row col value`"));
                }
                let r: usize = fields[0]
                    .parse()
                    .map_err(|e| parse_err(path, line_no, format!("bad row index: {e}")))?;
                let c: usize = fields[1]
                    .parse()
                    .map_err(|e| parse_err(path, line_no, format!("bad column index: {e}")))?;
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|e| parse_err(path, line_no, format!("bad value: {e}")))?;
                if r == 0 || r > rows || c == 0 || c > cols {
                    return Err(parse_err(
                        path,
                        line_no,
                        format!("entry ({r}, {c}) outside {rows}x{cols}"),
                    ));
                }
                matrix[(r - 1, c - 1)] = v;
                if symmetric {
                    matrix[(c - 1, r - 1)] = v;
                }
                seen += 1;
            }
        }
    }
    let Some((_, _, nnz)) = header else {
        return Err(parse_err(path, 1, "missing size header"));
    };
    if seen != nnz {
        return Err(parse_err(
            path,
            text.lines().count(),
            format!("header declares {nnz} entries, found {seen}"),
        ));
    }
    Ok(matrix)
}

pub fn parse_dense(path: &Path, text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .enumerate()
            .map(|(col, f)| {
                f.trim().parse::<f64>().map_err(|e| {
                    parse_err(path, idx + 1, format!("column {}: {e}", col + 1))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_err(
                    path,
                    idx + 1,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    Ok(DMatrix::from_row_iterator(nrows, ncols, rows.into_iter().flatten()))
}

/// Reads a vector stored as a single row or a single column.
pub fn load_vector(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    let path = path.as_ref();
    let m = load_matrix(path)?;
    match m.shape() {
        (_, 1) => Ok(m.column(0).into_owned()),
        (1, _) => Ok(m.row(0).transpose()),
        (r, c) => Err(parse_err(path, 1, format!("expected a vector, found a {r}x{c} matrix"))),
    }
}

/// Writes dense comma-delimited rows. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn save_matrix(path: impl AsRef<Path>, matrix: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for row in matrix.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes coordinate text with 1-based indices, skipping exact zeros.
pub fn save_coordinate(path: impl AsRef<Path>, matrix: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let entries: Vec<(usize, usize, f64)> = (0..matrix.ncols())
        .flat_map(|c| (0..matrix.nrows()).map(move |r| (r, c)))
        .filter_map(|(r, c)| {
            let v = matrix[(r, c)];
            (v != 0.0).then_some((r + 1, c + 1, v))
        })
        .collect();
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    out.push_str(&format!("{} {} {}\n", matrix.nrows(), matrix.ncols(), entries.len()));
    for (r, c, v) in entries {
        out.push_str(&format!("{r} {c} {v:?}\n"));
    }
    fs::write(path, out).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes records as comma-delimited rows with a header taken from the field
/// names.
pub fn save_results<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_results(file, records)
}

pub fn write_results<W: Write, T: Serialize>(out: W, records: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer
            .serialize(r)
            .map_err(|e| Error::Serialize(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::Serialize(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coordinate_identity() {
        let text = "% 2x2 identity\n2 2 2\n1 1 1.0\n2 2 1.0\n";
        let m = parse_coordinate(Path::new("eye.mtx"), text).unwrap();
        assert_eq!(m, DMatrix::identity(2, 2));
    }

    #[test]
    fn coordinate_symmetric_banner() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 2.0\n2 1 -1.0\n";
        let m = parse_coordinate(Path::new("s.mtx"), text).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 0.0]));
    }

    #[test]
    fn coordinate_errors_carry_line() {
        let text = "2 2 1\n3 1 1.0\n";
        match parse_coordinate(Path::new("bad.mtx"), text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let text = "2 2 2\n1 1 1.0\n";
        assert!(parse_coordinate(Path::new("short.mtx"), text).is_err());
        let text = "2 2 1\n1 1 abc\n";
        assert!(parse_coordinate(Path::new("nan.mtx"), text).is_err());
    }

    #[test]
    fn dense_ragged_rejected() {
        let text = "1,2\n3\n";
        match parse_dense(Path::new("r.csv"), text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dense_parses_rows() {
        let m = parse_dense(Path::new("a.csv"), "1, 2.5\n-3,4e-2\n").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 2.5, -3.0, 0.04]));
    }
}
