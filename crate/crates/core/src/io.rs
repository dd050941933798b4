//! CSV datasets and JSON reports.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Loads a headed numeric CSV. The `outcome` column (or the last column when
/// `None`) becomes `Y`; the remaining columns keep their order as treatments.
pub fn load_csv(path: impl AsRef<Path>, outcome: Option<&str>) -> Result<Dataset> {
    let file = File::open(path.as_ref())?;
    read_csv(file, outcome)
}

pub fn read_csv<R: std::io::Read>(reader: R, outcome: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.iter().all(String::is_empty) {
        return Err(Error::Parse {
            line: 1,
            message: "missing header".into(),
        });
    }
    let width = header.len();
    let y = match outcome {
        Some(name) => header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("outcome column {name:?} not in header"),
        })?,
        None => width - 1,
    };
    let order: Vec<usize> = (0..width).filter(|&c| c != y).chain(std::iter::once(y)).collect();

    let mut cells = Vec::new();
    let mut rows = 0;
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(rows + 2, |p| p.line() as usize);
        if record.len() != width {
            return Err(Error::Parse {
                line,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for &c in &order {
            let raw = &record[c];
            if raw.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: format!("blank cell in column {:?}", header[c]),
                });
            }
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                line,
                message: format!("non-numeric cell {raw:?} in column {:?}", header[c]),
            })?;
            cells.push(v);
        }
        rows += 1;
    }
    let names = order.iter().map(|&c| header[c].clone()).collect();
    Dataset::new(DMatrix::from_row_slice(rows, width, &cells), names)
}

pub fn write_dataset_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path.as_ref())?));
    w.write_record(data.names())?;
    let mut row = Vec::with_capacity(data.p() + 1);
    for r in data.values().row_iter() {
        row.clear();
        row.extend(r.iter().map(|v| format!("{v}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes any serializable report as pretty JSON with a trailing newline.
pub fn write_report<T: Serialize + ?Sized>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    serde_json::to_writer_pretty(&mut w, report)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
