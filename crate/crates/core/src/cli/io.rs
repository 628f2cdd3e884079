//! Point-file readers and writers.
//!
//! fvecs: each record is a little-endian `i32` dimension followed by that many
//! little-endian `f32` values; all records share one dimension.
//! CSV: one point per line, comma-separated decimals, optionally led by an
//! integer id column.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use clap::ValueEnum;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PointFormat {
    Fvecs,
    Csv,
}

/// Points plus the ids read from an id column, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFile {
    pub points: Matrix,
    pub ids: Option<Vec<u64>>,
}

impl PointFile {
    pub fn into_dataset(self) -> Result<Dataset> {
        match self.ids {
            Some(ids) => Dataset::new(self.points, ids),
            None => Dataset::from_points(self.points),
        }
    }
}

pub fn read_points(path: &Path, format: PointFormat, id_column: bool) -> Result<PointFile> {
    match format {
        PointFormat::Fvecs => {
            if id_column {
                return Err(Error::invalid("--id-column applies to CSV input only"));
            }
            let mut bytes = Vec::new();
            BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
            Ok(PointFile {
                points: parse_fvecs(&bytes)?,
                ids: None,
            })
        }
        PointFormat::Csv => parse_csv(BufReader::new(File::open(path)?), id_column),
    }
}

pub fn parse_fvecs(bytes: &[u8]) -> Result<Matrix> {
    let mut data = Vec::new();
    let mut dim: Option<usize> = None;
    let mut rows = 0;
    let mut pos = 0;
    while pos < bytes.len() {
        let header = bytes
            .get(pos..pos + 4)
            .ok_or_else(|| Error::Parse(format!("truncated dimension header at byte offset {pos}")))?;
        let d = i32::from_le_bytes(header.try_into().expect("4 bytes"));
        if d <= 0 {
            return Err(Error::Parse(format!("non-positive dimension {d} at byte offset {pos}")));
        }
        let d = d as usize;
        match dim {
            None => dim = Some(d),
            Some(expect) if expect != d => {
                return Err(Error::Parse(format!(
                    "record at byte offset {pos} declares dimension {d}, expected {expect}"
                )))
            }
            _ => {}
        }
        let body = bytes.get(pos + 4..pos + 4 + 4 * d).ok_or_else(|| {
            Error::Parse(format!(
                "truncated record at byte offset {pos}: needs {} bytes",
                4 + 4 * d
            ))
        })?;
        data.extend(
            body.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64),
        );
        rows += 1;
        pos += 4 + 4 * d;
    }
    let dim = dim.ok_or_else(|| Error::Parse("fvecs file holds no records".into()))?;
    Matrix::from_vec(rows, dim, data)
}

pub fn write_fvecs(path: &Path, points: &Matrix) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for row in points.iter_rows() {
        out.write_all(&(row.len() as i32).to_le_bytes())?;
        for &v in row {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn parse_csv<R: Read>(input: R, id_column: bool) -> Result<PointFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(input);
    let mut data = Vec::new();
    let mut ids = Vec::new();
    let mut dim = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse(format!("csv: {e}")))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let mut fields = record.iter();
        if id_column {
            let raw = fields.next().unwrap_or("");
            let id = raw
                .parse::<u64>()
                .map_err(|_| Error::Parse(format!("line {line}: bad id {raw:?}")))?;
            ids.push(id);
        }
        let before = data.len();
        for f in fields {
            let v = f
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("line {line}: bad number {f:?}")))?;
            data.push(v);
        }
        let d = data.len() - before;
        match dim {
            None if d == 0 => return Err(Error::Parse(format!("line {line}: no coordinates"))),
            None => dim = Some(d),
            Some(expect) if expect != d => {
                return Err(Error::Parse(format!("line {line}: {d} coordinates, expected {expect}")))
            }
            _ => {}
        }
        rows += 1;
    }
    let dim = dim.ok_or_else(|| Error::Parse("csv file holds no points".into()))?;
    Ok(PointFile {
        points: Matrix::from_vec(rows, dim, data)?,
        ids: id_column.then_some(ids),
    })
}
