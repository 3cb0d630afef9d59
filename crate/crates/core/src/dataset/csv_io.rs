use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::MultiLabelDataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Loads a CSV file whose last `num_labels` columns are the binary labels.
pub fn load_csv(path: &Path, num_labels: usize) -> Result<MultiLabelDataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, num_labels)
}

pub(crate) fn read_csv(input: impl Read, num_labels: usize) -> Result<MultiLabelDataset> {
    if num_labels == 0 {
        return Err(Error::InvalidArgument("label count must be at least 1".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| csv_err(1, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let width = header.len();
    if width < num_labels + 1 {
        return Err(csv_err(
            1,
            format!("{width} columns cannot hold {num_labels} labels plus a feature"),
        ));
    }
    let num_features = width - num_labels;

    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut n = 0usize;
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| csv_err(line, e.to_string()))?;
        if record.len() != width {
            return Err(csv_err(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        for (j, cell) in record.iter().enumerate() {
            if j < num_features {
                let v: f64 = cell
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| csv_err(line, format!("non-numeric feature cell {cell:?}")))?;
                features.push(v);
            } else {
                labels.push(match cell {
                    "0" => 0,
                    "1" => 1,
                    _ => {
                        return Err(Error::NonBinaryLabel {
                            label: header[j].clone(),
                            value: cell.to_string(),
                        })
                    }
                });
            }
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::InvalidDataset("CSV data section is empty".into()));
    }
    MultiLabelDataset::new(
        Matrix::from_vec(n, num_features, features)?,
        Matrix::from_vec(n, num_labels, labels)?,
        header[..num_features].to_vec(),
        header[num_features..].to_vec(),
    )
}

/// Writes features then labels; floats use the shortest round-trip form.
pub fn write_csv(ds: &MultiLabelDataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(ds, file).map_err(|e| match e {
        Error::Stream(io) => Error::io(path, io),
        other => other,
    })
}

pub(crate) fn write_csv_to(ds: &MultiLabelDataset, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header = ds.feature_names().iter().chain(ds.label_names());
    w.write_record(header).map_err(csv_write_err)?;
    for i in 0..ds.num_instances() {
        let row = ds
            .features()
            .row(i)
            .iter()
            .map(|v| format!("{v:?}"))
            .chain(ds.labels().row(i).iter().map(|b| b.to_string()));
        w.write_record(row).map_err(csv_write_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(line: usize, message: String) -> Error {
    Error::Csv { line, message }
}

fn csv_write_err(e: csv::Error) -> Error {
    Error::Csv {
        line: 0,
        message: e.to_string(),
    }
}
