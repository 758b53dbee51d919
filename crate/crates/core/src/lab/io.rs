//! CSV ingestion of kernels and targets.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::Deserialize;
use std::io::{Read, Write};

#[derive(Debug, Deserialize)]
struct Entry {
    row: usize,
    col: usize,
    value: f64,
}

#[derive(Debug, Deserialize)]
struct Mass {
    state: usize,
    prob: f64,
}

/// Reads `row,col,value` triples into an n×n matrix; missing entries are zero.
/// With `n = None` the size is one more than the largest index seen.
pub fn read_kernel_csv<R: Read>(r: R, n: Option<usize>) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut entries = Vec::new();
    for rec in rdr.deserialize() {
        let e: Entry = rec?;
        entries.push(e);
    }
    let size = n.unwrap_or_else(|| entries.iter().map(|e| e.row.max(e.col) + 1).max().unwrap_or(0));
    let mut m = DMatrix::zeros(size, size);
    for e in entries {
        if e.row >= size || e.col >= size {
            return Err(Error::Domain(format!("entry ({}, {}) outside a {size}-state space", e.row, e.col)));
        }
        m[(e.row, e.col)] += e.value;
    }
    Ok(m)
}

/// Reads `state,prob` rows into a dense probability vector.
pub fn read_target_csv<R: Read>(r: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let mut rows = Vec::new();
    for rec in rdr.deserialize() {
        let m: Mass = rec?;
        rows.push(m);
    }
    let n = rows.iter().map(|m| m.state + 1).max().unwrap_or(0);
    let mut pi = vec![0.0; n];
    for m in rows {
        pi[m.state] += m.prob;
    }
    Ok(pi)
}

pub fn write_kernel_csv<W: Write>(w: W, m: &DMatrix<f64>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["row", "col", "value"])?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            if m[(r, c)] != 0.0 {
                wtr.write_record(&[r.to_string(), c.to_string(), format!("{:e}", m[(r, c)])])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_target_csv<W: Write>(w: W, pi: &[f64]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["state", "prob"])?;
    for (k, p) in pi.iter().enumerate() {
        wtr.write_record(&[k.to_string(), format!("{p:e}")])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_round_trip() {
        let m = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.25, 0.5, 0.25, 0.0, 0.5, 0.5]);
        let mut buf = Vec::new();
        write_kernel_csv(&mut buf, &m).unwrap();
        assert_eq!(read_kernel_csv(&buf[..], None).unwrap(), m);
        assert_eq!(read_kernel_csv(&buf[..], Some(4)).unwrap().nrows(), 4);
    }

    #[test]
    fn target_round_trip_and_bad_rows() {
        let pi = vec![0.1, 0.2, 0.7];
        let mut buf = Vec::new();
        write_target_csv(&mut buf, &pi).unwrap();
        assert_eq!(read_target_csv(&buf[..]).unwrap(), pi);
        assert!(read_kernel_csv("row,col,value\n0,x,1\n".as_bytes(), None).is_err());
        assert!(read_kernel_csv("row,col,value\n0,3,1\n".as_bytes(), Some(2)).is_err());
    }
}
