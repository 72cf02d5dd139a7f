//! Field containers.
//!
//! Binary record, all little-endian:
//!
//! ```text
//! n: u64 | N: u64 | L: f64 | origin: n × f64 | values: N^n × f64 (row-major)
//! ```
//!
//! A file holds one or more consecutive records; a vector field is written as
//! its `n` components in order. CSV rows are `x_1, .., x_n, value`.

use std::io::{Read, Write};

use crate::grid::{Grid, GridSpec, ScalarField, VectorField};
use crate::{Error, Result};

pub fn write_field<W: Write>(out: &mut W, u: &ScalarField) -> Result<()> {
    let spec = u.grid().spec();
    let mut buf = Vec::with_capacity(16 + 8 * (1 + spec.dim + u.values().len()));
    buf.extend_from_slice(&(spec.dim as u64).to_le_bytes());
    buf.extend_from_slice(&(spec.points as u64).to_le_bytes());
    buf.extend_from_slice(&spec.length.to_le_bytes());
    for o in &spec.origin {
        buf.extend_from_slice(&o.to_le_bytes());
    }
    for v in u.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf).map_err(|e| io_error("<writer>", e))
}

pub fn write_vector_field<W: Write>(out: &mut W, v: &VectorField) -> Result<()> {
    for c in v.components() {
        write_field(out, c)?;
    }
    Ok(())
}

/// Serialized bytes of one field.
pub fn field_bytes(u: &ScalarField) -> Vec<u8> {
    let mut buf = Vec::new();
    write_field(&mut buf, u).expect("writing to a Vec cannot fail");
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take8(&mut self, what: &str) -> Result<[u8; 8]> {
        let end = self.pos + 8;
        if end > self.bytes.len() {
            return Err(Error::Format(format!(
                "truncated field record while reading {what} at byte {}",
                self.pos
            )));
        }
        let mut a = [0u8; 8];
        a.copy_from_slice(&self.bytes[self.pos..end]);
        self.pos = end;
        Ok(a)
    }
    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take8(what)?))
    }
    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take8(what)?))
    }
}

/// Parse every record in a byte buffer. Records sharing a spec share a grid.
pub fn parse_fields(bytes: &[u8]) -> Result<Vec<ScalarField>> {
    let mut cur = Cursor { bytes, pos: 0 };
    let mut out: Vec<ScalarField> = Vec::new();
    while cur.pos < bytes.len() {
        let dim = cur.u64("dimension")? as usize;
        let points = cur.u64("points per axis")? as usize;
        let length = cur.f64("box length")?;
        if dim == 0 || dim > crate::grid::MAX_DIM {
            return Err(Error::Format(format!("dimension {dim} out of range")));
        }
        let origin = (0..dim)
            .map(|_| cur.f64("origin"))
            .collect::<Result<Vec<_>>>()?;
        let spec = GridSpec::with_origin(dim, points, length, origin);
        let grid = match out.last() {
            Some(prev) if prev.grid().spec() == &spec => prev.grid().clone(),
            _ => Grid::new(spec)?,
        };
        let values = (0..grid.len())
            .map(|_| cur.f64("values"))
            .collect::<Result<Vec<_>>>()?;
        out.push(ScalarField::new(grid, values)?);
    }
    if out.is_empty() {
        return Err(Error::Format("no field records".into()));
    }
    Ok(out)
}

pub fn read_fields<R: Read>(input: &mut R) -> Result<Vec<ScalarField>> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| io_error("<reader>", e))?;
    parse_fields(&bytes)
}

/// Read a single-record file.
pub fn read_field_file(path: &std::path::Path) -> Result<ScalarField> {
    let bytes = std::fs::read(path).map_err(|e| io_error(&path.display().to_string(), e))?;
    let mut fields = parse_fields(&bytes)?;
    if fields.len() != 1 {
        return Err(Error::Format(format!(
            "{} holds {} records, expected one",
            path.display(),
            fields.len()
        )));
    }
    Ok(fields.remove(0))
}

/// Group consecutive records into vector fields of `n` components each.
pub fn as_vector_field(fields: Vec<ScalarField>) -> Result<VectorField> {
    let n = fields[0].grid().dim();
    if fields.len() != n {
        return Err(Error::Format(format!(
            "vector field needs {n} records, found {}",
            fields.len()
        )));
    }
    VectorField::new(fields)
}

pub fn write_csv<W: Write>(out: W, u: &ScalarField) -> Result<()> {
    let grid = u.grid();
    let dim = grid.dim();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=dim).map(|j| format!("x{j}")).collect();
    header.push("value".into());
    w.write_record(&header).map_err(csv_error)?;
    for (i, v) in u.values().iter().enumerate() {
        let x = grid.point(i);
        let mut row: Vec<String> = x[..dim].iter().map(|c| c.to_string()).collect();
        row.push(v.to_string());
        w.write_record(&row).map_err(csv_error)?;
    }
    w.flush().map_err(|e| io_error("<csv writer>", e))
}

pub(crate) fn io_error(path: &str, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_string(),
        source,
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sample;

    #[test]
    fn binary_round_trip() {
        let g = Grid::new(GridSpec::centered(2, 8, 1.5)).unwrap();
        let u = sample(&g, |x| x[0] * 3.0 - x[1].sin()).unwrap();
        let bytes = field_bytes(&u);
        assert_eq!(bytes.len(), 8 * (3 + 2 + 64));
        let back = parse_fields(&bytes).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0], u);
    }

    #[test]
    fn vector_records_share_grid() {
        let g = Grid::new(GridSpec::centered(2, 8, 1.0)).unwrap();
        let v = VectorField::new(vec![
            sample(&g, |x| x[0]).unwrap(),
            sample(&g, |x| x[1]).unwrap(),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_vector_field(&mut buf, &v).unwrap();
        let back = as_vector_field(parse_fields(&buf).unwrap()).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn truncated_record_is_format_error() {
        let g = Grid::new(GridSpec::centered(1, 8, 1.0)).unwrap();
        let bytes = field_bytes(&ScalarField::constant(&g, 1.0));
        assert!(matches!(
            parse_fields(&bytes[..bytes.len() - 3]),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn csv_has_coordinates_then_value() {
        let g = Grid::new(GridSpec::with_origin(1, 8, 1.0, vec![0.0])).unwrap();
        let u = sample(&g, |x| 2.0 * x[0]).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &u).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x1,value");
        assert_eq!(lines[2], "0.125,0.25");
        assert_eq!(lines.len(), 9);
    }
}
