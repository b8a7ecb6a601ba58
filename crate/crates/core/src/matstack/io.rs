use std::io::{BufRead, Write};

use super::{matrix_from_rows, Matrix};
use crate::error::{Error, Result};

/// Writes `rows,cols` followed by one comma-separated line per row.
pub fn write_matrix_csv<W: Write>(m: &Matrix, mut out: W) -> Result<()> {
    writeln!(out, "{},{}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let line: Vec<String> = m.row(i).iter().map(f64::to_string).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_matrix_csv<R: BufRead>(input: R) -> Result<Matrix> {
    let mut lines = input
        .lines()
        .filter(|l| l.as_ref().map_or(true, |s| !s.trim().is_empty()));
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("missing matrix header".into()))??;
    let dims: Vec<usize> = header
        .split(',')
        .map(|f| f.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parse(format!("bad matrix header {header:?}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!("bad matrix header {header:?}")));
    };
    let mut entries = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("expected {rows} rows, found {i}")))??;
        let before = entries.len();
        for f in line.split(',') {
            let f = f.trim();
            entries.push(
                f.parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {i}: bad number {f:?}")))?,
            );
        }
        if entries.len() - before != cols {
            return Err(Error::Parse(format!(
                "row {i}: expected {cols} entries, found {}",
                entries.len() - before
            )));
        }
    }
    if lines.next().is_some() {
        return Err(Error::Parse(format!("more than {rows} rows")));
    }
    matrix_from_rows(rows, cols, &entries)
}
