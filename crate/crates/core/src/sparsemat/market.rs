//! Matrix Market coordinate I/O (1-based indices in files, 0-based inside).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::SymSparseMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    Symmetric,
    General,
}

pub fn load_matrix_market<P: AsRef<Path>>(path: P) -> Result<SymSparseMatrix> {
    let file = File::open(path)?;
    read_matrix_market(BufReader::new(file))
}

/// Parses a `coordinate real|integer symmetric|general` Matrix Market stream.
///
/// For `general` files the pattern must be symmetric and every off-diagonal
/// value must equal its mirror exactly; only the lower triangle is kept.
pub fn read_matrix_market<R: BufRead>(reader: R) -> Result<SymSparseMatrix> {
    let mut lines = reader.lines().enumerate().map(|(k, l)| (k + 1, l));

    let (line_no, header) = match lines.next() {
        Some((k, l)) => (k, l?),
        None => return Err(Error::Parse { line: 1, msg: "empty input".into() }),
    };
    let symmetry = parse_header(line_no, &header)?;

    let mut size: Option<(usize, usize, usize)> = None;
    let mut raw: Vec<(usize, usize, f64)> = Vec::new();
    for (line_no, line) in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        match size {
            None => {
                let rows = parse_usize(line_no, fields.next())?;
                let cols = parse_usize(line_no, fields.next())?;
                let nnz = parse_usize(line_no, fields.next())?;
                if rows != cols {
                    return Err(Error::NonSquare { rows, cols });
                }
                size = Some((rows, cols, nnz));
                raw.reserve(nnz);
            }
            Some((n, _, _)) => {
                let i = parse_usize(line_no, fields.next())?;
                let j = parse_usize(line_no, fields.next())?;
                let v: f64 = fields
                    .next()
                    .ok_or_else(|| parse_err(line_no, "missing value"))?
                    .parse()
                    .map_err(|_| parse_err(line_no, "bad value"))?;
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(Error::IndexOutOfRange { row: i, col: j, n });
                }
                if !v.is_finite() {
                    return Err(Error::NonFiniteEntry { row: i, col: j });
                }
                raw.push((i - 1, j - 1, v));
            }
        }
    }

    let (n, _, nnz) = size.ok_or_else(|| parse_err(line_no + 1, "missing size line"))?;
    if raw.len() != nnz {
        return Err(parse_err(0, &format!("expected {nnz} entries, found {}", raw.len())));
    }

    match symmetry {
        Symmetry::Symmetric => SymSparseMatrix::from_triplets(n, raw),
        Symmetry::General => {
            let mut lower: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            let mut upper: BTreeMap<(usize, usize), f64> = BTreeMap::new();
            for (i, j, v) in raw {
                if i >= j {
                    *lower.entry((i, j)).or_insert(0.0) += v;
                } else {
                    *upper.entry((j, i)).or_insert(0.0) += v;
                }
            }
            for (&(i, j), &v) in &upper {
                if lower.get(&(i, j)).copied().unwrap_or(0.0) != v {
                    return Err(Error::InconsistentMirror { row: j + 1, col: i + 1 });
                }
            }
            for (&(i, j), &v) in &lower {
                if i != j && upper.get(&(i, j)).copied().unwrap_or(0.0) != v {
                    return Err(Error::InconsistentMirror { row: i + 1, col: j + 1 });
                }
            }
            SymSparseMatrix::from_triplets(n, lower.into_iter().map(|((i, j), v)| (i, j, v)))
        }
    }
}

fn parse_header(line_no: usize, header: &str) -> Result<Symmetry> {
    let tokens: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(line_no, "malformed header"));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::Unsupported(format!("format: {}", tokens[2])));
    }
    match tokens[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return Err(Error::Unsupported(format!("field: {other}"))),
    }
    match tokens[4].as_str() {
        "symmetric" => Ok(Symmetry::Symmetric),
        "general" => Ok(Symmetry::General),
        other => Err(Error::Unsupported(format!("symmetry: {other}"))),
    }
}

fn parse_usize(line_no: usize, tok: Option<&str>) -> Result<usize> {
    tok.ok_or_else(|| parse_err(line_no, "missing field"))?
        .parse()
        .map_err(|_| parse_err(line_no, "expected an unsigned integer"))
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::Parse { line, msg: msg.to_string() }
}

pub fn save_matrix_market<P: AsRef<Path>>(a: &SymSparseMatrix, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix_market(a, &mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes `coordinate real symmetric` with entries in column-major
/// lower-triangle order. Values use the shortest exact round-trip form.
pub fn write_matrix_market<W: Write>(a: &SymSparseMatrix, mut w: W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", a.n(), a.n(), a.nnz())?;
    for (i, j, v) in a.iter() {
        writeln!(w, "{} {} {:e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<SymSparseMatrix> {
        read_matrix_market(s.as_bytes())
    }

    #[test]
    fn reads_symmetric_body() {
        let a = read("%%MatrixMarket matrix coordinate real symmetric\n% c\n2 2 2\n1 1 1.0\n2 1 3.0\n").unwrap();
        assert_eq!(a.n(), 2);
        assert_eq!(a.iter().collect::<Vec<_>>(), vec![(0, 0, 1.0), (1, 0, 3.0)]);
    }

    #[test]
    fn complex_field_is_rejected() {
        let err = read("%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 1 0\n").unwrap_err();
        assert!(err.to_string().contains("unsupported field"), "{err}");
    }

    #[test]
    fn general_mirrored_pair_collapses() {
        let a = read("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 3.0\n2 1 3.0\n").unwrap();
        let b = SymSparseMatrix::from_triplets(2, [(1, 0, 3.0)]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn general_inconsistent_mirror() {
        let err = read("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 3.0\n2 1 3.5\n").unwrap_err();
        assert!(matches!(err, Error::InconsistentMirror { .. }));
        let err = read("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 3.0\n").unwrap_err();
        assert!(matches!(err, Error::InconsistentMirror { .. }));
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(read("%%MatrixMarket matrix\n"), Err(Error::Parse { .. })));
        assert!(matches!(
            read("%%MatrixMarket matrix coordinate real symmetric\n2 3 0\n"),
            Err(Error::NonSquare { rows: 2, cols: 3 })
        ));
        assert!(matches!(
            read("%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 inf\n"),
            Err(Error::NonFiniteEntry { .. })
        ));
        assert!(matches!(read("%%MatrixMarket matrix array real symmetric\n2 2\n"), Err(Error::Unsupported(_))));
        assert!(matches!(
            read("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1\n"),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn writer_round_trip() {
        let a = SymSparseMatrix::from_triplets(3, [(0, 0, 1e-300), (2, 0, -3.5), (2, 2, 0.0), (1, 1, 1e300)]).unwrap();
        let mut buf = Vec::new();
        write_matrix_market(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("%%MatrixMarket matrix coordinate real symmetric\n3 3 4\n1 1 "));
        assert_eq!(read(&text).unwrap(), a);
    }
}
