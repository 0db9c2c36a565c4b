//! File formats shared by the CLI and the library: CSV with `#` metadata
//! headers, coordinate-triplet text for banded matrices, and JSON payloads.

use crate::error::{Error, Result};
use crate::linalg::{BandMatrix, SymBandMatrix};
use nalgebra::DMatrix;
use std::io::{BufRead, Write};

/// 17-significant-digit formatting so CSV round trips are bit faithful.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write `# key: value` metadata lines; payload parsers skip them.
pub fn write_metadata<W: Write>(w: &mut W, entries: &[(&str, String)]) -> Result<()> {
    writeln!(w, "# tool: psplines {}", env!("CARGO_PKG_VERSION"))?;
    for (k, v) in entries {
        writeln!(w, "# {k}: {v}")?;
    }
    Ok(())
}

pub fn write_dense_csv<W: Write>(w: &mut W, m: &DMatrix<f64>) -> Result<()> {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_f64(m[(i, j)])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// `(row, col, value)` triplets for the stored band of a rectangular band matrix.
pub fn write_band_triplets<W: Write>(w: &mut W, m: &BandMatrix) -> Result<()> {
    for i in 0..m.rows() {
        for j in m.band_cols(i) {
            writeln!(w, "{},{},{}", i, j, fmt_f64(m.get(i, j)))?;
        }
    }
    Ok(())
}

/// `(row, col, value)` triplets for the upper band of a symmetric band matrix.
pub fn write_sym_band_triplets<W: Write>(w: &mut W, m: &SymBandMatrix) -> Result<()> {
    for i in 0..m.dim() {
        for j in i..m.dim().min(i + m.bandwidth() + 1) {
            writeln!(w, "{},{},{}", i, j, fmt_f64(m.get(i, j)))?;
        }
    }
    Ok(())
}

/// Read a two-column `(x, y)` CSV; `#` comment lines and an optional
/// non-numeric header row are skipped.
pub fn read_xy_csv<R: BufRead>(r: R) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',');
        let sx = parts.next().unwrap_or("").trim();
        let sy = parts
            .next()
            .ok_or_else(|| Error::Parse(format!("line {}: expected two columns", lineno + 1)))?
            .trim();
        match (sx.parse::<f64>(), sy.parse::<f64>()) {
            (Ok(vx), Ok(vy)) => {
                x.push(vx);
                y.push(vy);
            }
            _ if lineno == 0 => continue, // header row
            _ => {
                return Err(Error::Parse(format!(
                    "line {}: cannot parse {line:?} as two numbers",
                    lineno + 1
                )))
            }
        }
    }
    if x.is_empty() {
        return Err(Error::Parse("no data rows found".into()));
    }
    Ok((x, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_round_trips() {
        for v in [0.0, 1.0 / 3.0, -2.5e-17, 6.0, f64::MIN_POSITIVE] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }

    #[test]
    fn xy_csv_skips_headers_and_comments() {
        let text = "x,y\n# seed: 42\n0.0,1.5\n1.0,2.5\n";
        let (x, y) = read_xy_csv(text.as_bytes()).unwrap();
        assert_eq!(x, vec![0.0, 1.0]);
        assert_eq!(y, vec![1.5, 2.5]);
    }

    #[test]
    fn xy_csv_rejects_garbage() {
        assert!(read_xy_csv("0.0,1.0\nbad,row\n".as_bytes()).is_err());
        assert!(read_xy_csv("".as_bytes()).is_err());
    }
}
