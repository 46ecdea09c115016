use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::SparseSpd;
use crate::error::MatrixError;

/// Reads a Matrix Market `coordinate real symmetric` matrix.
///
/// `integer` fields are accepted as real. Entries from either triangle are
/// folded into the lower triangle and duplicates are summed.
pub fn read_matrix_market<R: Read>(source: R) -> Result<SparseSpd, MatrixError> {
    let reader = BufReader::new(source);
    let mut lines = reader.lines().enumerate();

    let header = loop {
        match lines.next() {
            Some((_, line)) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(MatrixError::Header("empty input".into())),
        }
    };
    check_header(&header)?;

    let mut size: Option<(usize, usize, usize)> = None;
    let mut triplets = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let lineno = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut fields = t.split_whitespace();
        match size {
            None => {
                let rows = parse_field::<usize>(fields.next(), lineno)?;
                let cols = parse_field::<usize>(fields.next(), lineno)?;
                let nnz = parse_field::<usize>(fields.next(), lineno)?;
                if rows != cols {
                    return Err(MatrixError::NotSquare { rows, cols });
                }
                triplets.reserve(nnz);
                size = Some((rows, cols, nnz));
            }
            Some((n, _, _)) => {
                let r = parse_field::<usize>(fields.next(), lineno)?;
                let c = parse_field::<usize>(fields.next(), lineno)?;
                let v = parse_field::<f64>(fields.next(), lineno)?;
                if r == 0 || c == 0 || r > n || c > n {
                    return Err(MatrixError::IndexOutOfRange { row: r, col: c, n });
                }
                if !v.is_finite() {
                    return Err(MatrixError::Parse {
                        line: lineno,
                        msg: format!("non-finite value {v}"),
                    });
                }
                triplets.push((r - 1, c - 1, v));
            }
        }
    }
    let (n, _, nnz) = size.ok_or_else(|| MatrixError::Header("missing size line".into()))?;
    if triplets.len() != nnz {
        return Err(MatrixError::Parse {
            line: 0,
            msg: format!("size line declares {nnz} entries, found {}", triplets.len()),
        });
    }
    SparseSpd::from_triplets(n, triplets)
}

pub fn read_matrix_market_file(path: impl AsRef<Path>) -> Result<SparseSpd, MatrixError> {
    read_matrix_market(File::open(path)?)
}

/// Writes the lower triangle as `coordinate real symmetric`.
pub fn write_matrix_market<W: Write>(a: &SparseSpd, mut out: W) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(out, "{} {} {}", a.n(), a.n(), a.nnz())?;
    for (i, j, v) in a.iter() {
        writeln!(out, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

fn check_header(line: &str) -> Result<(), MatrixError> {
    let tokens: Vec<String> = line
        .split_whitespace()
        .map(|t| t.to_ascii_lowercase())
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(MatrixError::Header(line.to_string()));
    }
    if tokens[1] != "matrix" || tokens[2] != "coordinate" {
        return Err(MatrixError::Header(format!(
            "only `matrix coordinate` is supported, got `{} {}`",
            tokens[1], tokens[2]
        )));
    }
    if tokens[3] != "real" && tokens[3] != "integer" {
        return Err(MatrixError::Header(format!(
            "field `{}` is not supported",
            tokens[3]
        )));
    }
    if tokens[4] != "symmetric" {
        return Err(MatrixError::Header(format!(
            "symmetry `{}` is not supported",
            tokens[4]
        )));
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, line: usize) -> Result<T, MatrixError> {
    let s = field.ok_or_else(|| MatrixError::Parse {
        line,
        msg: "missing field".into(),
    })?;
    s.parse().map_err(|_| MatrixError::Parse {
        line,
        msg: format!("cannot parse `{s}`"),
    })
}
