//! Matrix Market coordinate files with `real symmetric` structure.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::SymSparseMatrix;
use crate::error::{Result, SlrError};

fn mm_err(line: usize, msg: impl Into<String>) -> SlrError {
    SlrError::MatrixMarket {
        line,
        msg: msg.into(),
    }
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<SymSparseMatrix> {
    let f = File::open(path)?;
    parse_matrix_market(BufReader::new(f))
}

/// Parses a coordinate `real symmetric` (or `integer symmetric`) file.
///
/// Entries may come from either triangle; repeated coordinates are summed,
/// but listing both `(i,j)` and `(j,i)` for `i != j` is rejected.
pub fn parse_matrix_market<R: BufRead>(reader: R) -> Result<SymSparseMatrix> {
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines.next().ok_or_else(|| mm_err(1, "empty file"))?;
    let header = header?;
    let tok: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tok.len() != 5 || tok[0] != "%%matrixmarket" || tok[1] != "matrix" {
        return Err(mm_err(1, format!("malformed header: {header:?}")));
    }
    if tok[2] != "coordinate" {
        return Err(mm_err(1, format!("unsupported format {:?}", tok[2])));
    }
    if tok[3] != "real" && tok[3] != "integer" {
        return Err(mm_err(1, format!("non-real field {:?}", tok[3])));
    }
    if tok[4] != "symmetric" {
        return Err(mm_err(1, format!("structure {:?} is not symmetric", tok[4])));
    }

    let mut size: Option<(usize, usize)> = None;
    let mut expected = 0usize;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    // orientation seen for each off-diagonal pair: 1 = lower, 2 = upper
    let mut seen: HashMap<(usize, usize), u8> = HashMap::new();

    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let fields: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if fields.len() != 3 {
                    return Err(mm_err(lineno, "size line needs rows cols nnz"));
                }
                let p = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| mm_err(lineno, format!("bad integer {s:?}")))
                };
                let (r, c, nz) = (p(fields[0])?, p(fields[1])?, p(fields[2])?);
                if r != c {
                    return Err(mm_err(lineno, format!("symmetric matrix must be square, got {r}x{c}")));
                }
                size = Some((r, nz));
                expected = nz;
                entries.reserve(nz);
            }
            Some((n, _)) => {
                if fields.len() != 3 {
                    return Err(mm_err(lineno, "entry needs row col value"));
                }
                let idx1 = |s: &str| -> Result<usize> {
                    let v = s
                        .parse::<usize>()
                        .map_err(|_| mm_err(lineno, format!("bad index {s:?}")))?;
                    if v == 0 || v > n {
                        return Err(mm_err(lineno, format!("index {v} outside 1..={n}")));
                    }
                    Ok(v - 1)
                };
                let (i, j) = (idx1(fields[0])?, idx1(fields[1])?);
                let v: f64 = fields[2]
                    .parse()
                    .map_err(|_| mm_err(lineno, format!("bad value {:?}", fields[2])))?;
                if i != j {
                    let key = (i.max(j), i.min(j));
                    let bit = if i > j { 1u8 } else { 2u8 };
                    let e = seen.entry(key).or_insert(0);
                    *e |= bit;
                    if *e == 3 {
                        return Err(mm_err(
                            lineno,
                            format!("both ({},{}) and ({},{}) present", i + 1, j + 1, j + 1, i + 1),
                        ));
                    }
                }
                entries.push((i, j, v));
            }
        }
    }

    let (n, _) = size.ok_or_else(|| mm_err(1, "missing size line"))?;
    if entries.len() != expected {
        return Err(mm_err(
            0,
            format!("expected {expected} entries, found {}", entries.len()),
        ));
    }
    SymSparseMatrix::from_triplets(n, entries)
}

pub fn write_matrix_market(path: impl AsRef<Path>, a: &SymSparseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_matrix_market_to(&mut w, a)?;
    w.flush()?;
    Ok(())
}

/// Writes the lower triangle with 17 significant digits.
pub fn write_matrix_market_to<W: Write>(w: &mut W, a: &SymSparseMatrix) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(w, "{} {} {}", a.n(), a.n(), a.nnz())?;
    for i in 0..a.n() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            writeln!(w, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}
