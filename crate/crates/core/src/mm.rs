//! Matrix Market coordinate-format import and export.
//!
//! Entries are printed with 17 significant digits so that a write/read
//! round trip reproduces every f64 bit-exactly.

use crate::sparse::SparseMatrix;
use crate::Error;
use std::io::{BufRead, Write};

pub fn write_matrix<W: Write>(w: &mut W, a: &SparseMatrix) -> Result<(), Error> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for (r, c, v) in a.iter() {
        writeln!(w, "{} {} {:.16e}", r + 1, c + 1, v)?;
    }
    Ok(())
}

pub fn write_matrix_to_path(path: &std::path::Path, a: &SparseMatrix) -> Result<(), Error> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix(&mut f, a)
}

pub fn read_matrix<R: BufRead>(r: R) -> Result<SparseMatrix, Error> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Io("empty Matrix Market file".into()))??;
    let head = header.to_ascii_lowercase();
    if !head.starts_with("%%matrixmarket") {
        return Err(Error::Io("missing %%MatrixMarket header".into()));
    }
    if !head.contains("coordinate") || !head.contains("real") {
        return Err(Error::Io(format!("unsupported Matrix Market flavor: {header}")));
    }
    let symmetric = head.contains("symmetric");

    let mut size_line = None;
    for line in lines.by_ref() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        size_line = Some(line);
        break;
    }
    let size_line = size_line.ok_or_else(|| Error::Io("missing size line".into()))?;
    let mut parts = size_line.split_whitespace();
    let nrows: usize = parse_field(parts.next(), "rows")?;
    let ncols: usize = parse_field(parts.next(), "cols")?;
    let nnz: usize = parse_field(parts.next(), "nnz")?;

    let mut triplets = Vec::with_capacity(if symmetric { 2 * nnz } else { nnz });
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut parts = t.split_whitespace();
        let r: usize = parse_field(parts.next(), "row index")?;
        let c: usize = parse_field(parts.next(), "col index")?;
        let v: f64 = parts
            .next()
            .ok_or_else(|| Error::Io("entry missing value".into()))?
            .parse()
            .map_err(|e| Error::Io(format!("bad value: {e}")))?;
        if r == 0 || c == 0 || r > nrows || c > ncols {
            return Err(Error::Io(format!("entry ({r},{c}) out of bounds")));
        }
        triplets.push((r - 1, c - 1, v));
        if symmetric && r != c {
            triplets.push((c - 1, r - 1, v));
        }
        seen += 1;
    }
    if seen != nnz {
        return Err(Error::Io(format!("expected {nnz} entries, found {seen}")));
    }
    SparseMatrix::from_triplets(nrows, ncols, &triplets)
}

pub fn read_matrix_from_path(path: &std::path::Path) -> Result<SparseMatrix, Error> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    read_matrix(f)
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, what: &str) -> Result<T, Error> {
    field
        .ok_or_else(|| Error::Io(format!("missing {what}")))?
        .parse()
        .map_err(|_| Error::Io(format!("unparseable {what}")))
}
