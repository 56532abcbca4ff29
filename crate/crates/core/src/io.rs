//! On-disk formats: a little-endian binary grid format and CSV tables.
//!
//! Binary layout: `dims` (u64), then `N_i` (u64) per axis, then `L_i` (f64)
//! per axis, then the row-major f64 values. The same container is reused for
//! any rectangular table (e.g. phase-space distributions) by passing explicit
//! axis counts and spans.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Field, SpectralGrid};

pub fn write_field(path: &Path, f: &Field) -> Result<()> {
    let g = f.grid();
    let dims: Vec<u64> = (0..g.dims()).map(|a| g.n(a) as u64).collect();
    let lens: Vec<f64> = (0..g.dims()).map(|a| g.len_axis(a)).collect();
    write_table(path, &dims, &lens, f.values())
}

/// Writes a generic rectangular table in the binary grid layout.
pub fn write_table(path: &Path, counts: &[u64], spans: &[f64], values: &[f64]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(counts.len() as u64).to_le_bytes())?;
    for c in counts {
        w.write_all(&c.to_le_bytes())?;
    }
    for s in spans {
        w.write_all(&s.to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub struct Table {
    pub counts: Vec<u64>,
    pub spans: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut r = BufReader::new(File::open(path)?);
    let dims = read_u64(&mut r)? as usize;
    if dims == 0 || dims > 8 {
        return Err(Error::InvalidParameter(format!("corrupt table header: dims={dims}")));
    }
    let mut counts = Vec::with_capacity(dims);
    for _ in 0..dims {
        counts.push(read_u64(&mut r)?);
    }
    let mut spans = Vec::with_capacity(dims);
    for _ in 0..dims {
        spans.push(read_f64(&mut r)?);
    }
    let total: u64 = counts.iter().product();
    let mut values = Vec::with_capacity(total as usize);
    for _ in 0..total {
        values.push(read_f64(&mut r)?);
    }
    Ok(Table { counts, spans, values })
}

pub fn read_field(path: &Path) -> Result<Field> {
    let t = read_table(path)?;
    let grid = match t.counts.len() {
        1 => SpectralGrid::new_1d(t.counts[0] as usize, t.spans[0])?,
        2 => SpectralGrid::new_2d(
            t.counts[0] as usize,
            t.counts[1] as usize,
            t.spans[0],
            t.spans[1],
        )?,
        d => return Err(Error::InvalidParameter(format!("unsupported field rank {d}"))),
    };
    Field::from_values(&grid, t.values)
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Fixed-precision float formatting so CSV output is bit-reproducible.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.12e}")
}

/// Writes a CSV with the given header and rows of f64 values.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a 1-d field as x,value CSV rows.
pub fn write_field_csv(path: &Path, f: &Field) -> Result<()> {
    let g = f.grid();
    if g.dims() != 1 {
        return Err(Error::InvalidParameter("CSV export is for 1-d fields".into()));
    }
    let rows: Vec<Vec<f64>> = g
        .coords(0)
        .iter()
        .zip(f.values())
        .map(|(x, v)| vec![*x, *v])
        .collect();
    write_csv(path, &["x", "value"], &rows)
}

/// Solver checkpoint: time, step size and a scenario hash, then eta and phi.
pub fn write_checkpoint(path: &Path, t: f64, dt: f64, scenario_hash: u64, eta: &Field, phi: &Field) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&t.to_le_bytes())?;
    w.write_all(&dt.to_le_bytes())?;
    w.write_all(&scenario_hash.to_le_bytes())?;
    w.flush()?;
    drop(w);
    // Field payloads are appended as two standalone tables in one file.
    let mut f = std::fs::OpenOptions::new().append(true).open(path)?;
    let mut emit = |fld: &Field| -> Result<()> {
        let g = fld.grid();
        f.write_all(&(g.dims() as u64).to_le_bytes())?;
        for a in 0..g.dims() {
            f.write_all(&(g.n(a) as u64).to_le_bytes())?;
        }
        for a in 0..g.dims() {
            f.write_all(&g.len_axis(a).to_le_bytes())?;
        }
        for v in fld.values() {
            f.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    };
    emit(eta)?;
    emit(phi)?;
    f.flush()?;
    Ok(())
}

pub struct Checkpoint {
    pub t: f64,
    pub dt: f64,
    pub scenario_hash: u64,
    pub eta: Field,
    pub phi: Field,
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    let t = read_f64(&mut r)?;
    let dt = read_f64(&mut r)?;
    let scenario_hash = read_u64(&mut r)?;
    let read_one = |r: &mut BufReader<File>| -> Result<Field> {
        let dims = read_u64(r)? as usize;
        let mut counts = Vec::new();
        for _ in 0..dims {
            counts.push(read_u64(r)? as usize);
        }
        let mut spans = Vec::new();
        for _ in 0..dims {
            spans.push(read_f64(r)?);
        }
        let grid: Arc<SpectralGrid> = match dims {
            1 => SpectralGrid::new_1d(counts[0], spans[0])?,
            2 => SpectralGrid::new_2d(counts[0], counts[1], spans[0], spans[1])?,
            d => return Err(Error::InvalidParameter(format!("unsupported field rank {d}"))),
        };
        let total = grid.total();
        let mut values = Vec::with_capacity(total);
        for _ in 0..total {
            values.push(read_f64(r)?);
        }
        Field::from_values(&grid, values)
    };
    let eta = read_one(&mut r)?;
    let phi = read_one(&mut r)?;
    Ok(Checkpoint { t, dt, scenario_hash, eta, phi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn tmpdir() -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("wavecurrent-io-{}", std::process::id()));
        std::fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn field_binary_roundtrip_1d() {
        let g = SpectralGrid::new_1d(64, 10.0).unwrap();
        let f = Field::from_fn(&g, |x, _| (TAU * x / 10.0).sin());
        let p = tmpdir().join("f1.bin");
        write_field(&p, &f).unwrap();
        let back = read_field(&p).unwrap();
        assert_eq!(back.grid().n(0), 64);
        assert_eq!(back.grid().len_axis(0), 10.0);
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn field_binary_roundtrip_2d() {
        let g = SpectralGrid::new_2d(16, 8, 3.0, 2.0).unwrap();
        let f = Field::from_fn(&g, |x, y| x + 10.0 * y);
        let p = tmpdir().join("f2.bin");
        write_field(&p, &f).unwrap();
        let back = read_field(&p).unwrap();
        assert_eq!(back.grid().n(0), 16);
        assert_eq!(back.grid().n(1), 8);
        assert_eq!(back.values(), f.values());
    }

    #[test]
    fn binary_header_layout_is_little_endian() {
        let g = SpectralGrid::new_1d(8, 2.0).unwrap();
        let f = Field::constant(&g, 1.5);
        let p = tmpdir().join("hdr.bin");
        write_field(&p, &f).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[0..8], &1u64.to_le_bytes());
        assert_eq!(&bytes[8..16], &8u64.to_le_bytes());
        assert_eq!(&bytes[16..24], &2.0f64.to_le_bytes());
        assert_eq!(&bytes[24..32], &1.5f64.to_le_bytes());
        assert_eq!(bytes.len(), 24 + 8 * 8);
    }

    #[test]
    fn checkpoint_roundtrip() {
        let g = SpectralGrid::new_1d(16, 5.0).unwrap();
        let eta = Field::from_fn(&g, |x, _| x);
        let phi = Field::from_fn(&g, |x, _| -x);
        let p = tmpdir().join("ck.bin");
        write_checkpoint(&p, 1.25, 0.01, 0xdeadbeef, &eta, &phi).unwrap();
        let ck = read_checkpoint(&p).unwrap();
        assert_eq!(ck.t, 1.25);
        assert_eq!(ck.dt, 0.01);
        assert_eq!(ck.scenario_hash, 0xdeadbeef);
        assert_eq!(ck.eta.values(), eta.values());
        assert_eq!(ck.phi.values(), phi.values());
    }

    #[test]
    fn csv_output_is_deterministic() {
        let p1 = tmpdir().join("a.csv");
        let p2 = tmpdir().join("b.csv");
        let rows = vec![vec![0.1, 1.0 / 3.0], vec![2e-17, -4.5]];
        write_csv(&p1, &["t", "v"], &rows).unwrap();
        write_csv(&p2, &["t", "v"], &rows).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }
}
