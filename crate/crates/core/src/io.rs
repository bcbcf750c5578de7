//! CSV and JSON files.
//!
//! Point clouds: header `x0,...,x{d-1}[,boundary]`. Fields: header `id,x0,...,x{d-1},value`.
//! Floats are written with 17 significant digits so files round-trip exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::field::ScalarField;
use crate::geometry::PointCloud;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(io_err(path))?;
        }
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

#[inline]
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Point cloud read from CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct PointTable {
    pub points: Vec<Vec<f64>>,
    pub boundary: Option<Vec<bool>>,
}

pub fn write_points_csv(path: &Path, points: &[Vec<f64>], boundary: Option<&[bool]>) -> Result<()> {
    let d = points.first().map(|p| p.len()).unwrap_or(0);
    let mut w = create(path)?;
    let mut header: Vec<String> = (0..d).map(|a| format!("x{a}")).collect();
    if boundary.is_some() {
        header.push("boundary".into());
    }
    writeln!(w, "{}", header.join(",")).map_err(io_err(path))?;
    for (i, p) in points.iter().enumerate() {
        if p.len() != d {
            return Err(Error::LengthMismatch { expected: d, got: p.len() });
        }
        let mut row: Vec<String> = p.iter().map(|&x| fmt_f64(x)).collect();
        if let Some(b) = boundary {
            row.push(if b[i] { "1" } else { "0" }.into());
        }
        writeln!(w, "{}", row.join(",")).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim() {
        "1" | "true" => Ok(true),
        "0" | "false" => Ok(false),
        other => Err(invalid(format!("bad boundary flag {other:?}"))),
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| invalid(format!("bad number {s:?}")))
}

pub fn read_points_csv(path: &Path) -> Result<PointTable> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let has_boundary = headers.iter().last() == Some("boundary");
    let d = headers.len() - usize::from(has_boundary);
    for (a, h) in headers.iter().take(d).enumerate() {
        if h != format!("x{a}") {
            return Err(invalid(format!("unexpected column {h:?} in {}", path.display())));
        }
    }
    let mut points = Vec::new();
    let mut boundary = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let p = rec.iter().take(d).map(parse_f64).collect::<Result<Vec<f64>>>()?;
        points.push(p);
        if has_boundary {
            boundary.push(parse_bool(&rec[d])?);
        }
    }
    Ok(PointTable {
        points,
        boundary: has_boundary.then_some(boundary),
    })
}

pub fn write_field_csv(path: &Path, cloud: &PointCloud, field: &[f64]) -> Result<()> {
    if field.len() != cloud.len() {
        return Err(Error::LengthMismatch {
            expected: cloud.len(),
            got: field.len(),
        });
    }
    let pts: Vec<&[f64]> = (0..cloud.len()).map(|i| cloud.point(i)).collect();
    write_field_rows(path, &pts, field)
}

fn write_field_rows(path: &Path, pts: &[&[f64]], field: &[f64]) -> Result<()> {
    let d = pts.first().map(|p| p.len()).unwrap_or(0);
    let mut w = create(path)?;
    let mut header = vec!["id".to_string()];
    header.extend((0..d).map(|a| format!("x{a}")));
    header.push("value".into());
    writeln!(w, "{}", header.join(",")).map_err(io_err(path))?;
    for (i, (p, v)) in pts.iter().zip(field).enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(p.iter().map(|&x| fmt_f64(x)));
        row.push(fmt_f64(*v));
        writeln!(w, "{}", row.join(",")).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// A field read from CSV with its node coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldTable {
    pub points: Vec<Vec<f64>>,
    pub values: ScalarField,
}

impl FieldTable {
    pub fn write(&self, path: &Path) -> Result<()> {
        let pts: Vec<&[f64]> = self.points.iter().map(|p| p.as_slice()).collect();
        write_field_rows(path, &pts, &self.values)
    }
}

pub fn read_field_csv(path: &Path) -> Result<FieldTable> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    if headers.len() < 3 || &headers[0] != "id" || &headers[headers.len() - 1] != "value" {
        return Err(invalid(format!("{} is not a field CSV", path.display())));
    }
    let d = headers.len() - 2;
    let mut points = Vec::new();
    let mut values = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let id: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| invalid(format!("bad id {:?}", &rec[0])))?;
        if id != row {
            return Err(invalid(format!("ids must be 0..n in order, found {id} at row {row}")));
        }
        points.push((1..=d).map(|a| parse_f64(&rec[a])).collect::<Result<Vec<f64>>>()?);
        values.push(parse_f64(&rec[d + 1])?);
    }
    Ok(FieldTable {
        points,
        values: ScalarField::new(values)?,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        let pts = vec![vec![0.1, 1.0 / 3.0], vec![2.0, -7e-300]];
        write_points_csv(&path, &pts, Some(&[true, false])).unwrap();
        let t = read_points_csv(&path).unwrap();
        assert_eq!(t.points, pts);
        assert_eq!(t.boundary, Some(vec![true, false]));
    }

    #[test]
    fn field_roundtrip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        let t = FieldTable {
            points: vec![vec![0.0, 0.5], vec![0.1, 0.7]],
            values: ScalarField::new(vec![std::f64::consts::PI, -1e-17]).unwrap(),
        };
        t.write(&a).unwrap();
        let back = read_field_csv(&a).unwrap();
        assert_eq!(back, t);
        back.write(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
