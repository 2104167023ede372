use std::io::{Read, Write};
use std::path::Path;

use super::dataset::Dataset;
use super::schema::{ColumnKind, FeatureSchema};
use crate::error::{Error, Result};

/// Reads a headed CSV file into a [`Dataset`]. Header columns may appear in
/// any order; every schema column must be present.
pub fn load_csv(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema) -> Result<Dataset> {
    let mut rdr = ::csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(::csv::Trim::All)
        .from_reader(reader);

    let header = rdr
        .headers()
        .map_err(|e| csv_error(1, "<header>", e))?
        .clone();
    // position of each schema column in the file
    let mut positions = Vec::with_capacity(schema.columns().len());
    for col in schema.columns() {
        match header.iter().position(|h| h == col.name) {
            Some(p) => positions.push(p),
            None => {
                return Err(Error::Csv {
                    line: 1,
                    column: col.name.clone(),
                    message: "column missing from header".into(),
                })
            }
        }
    }
    let label = schema.label_column();

    let mut rows = Vec::new();
    let mut labels = label.map(|_| Vec::new());
    let mut record = ::csv::StringRecord::new();
    loop {
        let more = rdr
            .read_record(&mut record)
            .map_err(|e| csv_error(e.position().map_or(0, |p| p.line()), "<record>", e))?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            let column = header
                .get(record.len())
                .unwrap_or("<extra field>")
                .to_string();
            return Err(Error::Csv {
                line,
                column,
                message: format!(
                    "ragged row: {} fields, header has {}",
                    record.len(),
                    header.len()
                ),
            });
        }

        let mut row = Vec::with_capacity(schema.n_features());
        for (col, &pos) in schema.columns().iter().zip(&positions) {
            let text = &record[pos];
            let bad = |message: String| Error::Csv {
                line,
                column: col.name.clone(),
                message,
            };
            let value = match &col.kind {
                ColumnKind::Continuous => {
                    let v: f64 = text
                        .parse()
                        .map_err(|_| bad(format!("`{text}` is not a number")))?;
                    if !v.is_finite() {
                        return Err(bad(format!("`{text}` is not finite")));
                    }
                    v
                }
                ColumnKind::Categorical { categories } => categories
                    .iter()
                    .position(|c| c == text)
                    .ok_or_else(|| bad(format!("`{text}` is not a declared category")))?
                    as f64,
            };
            if Some(col.name.as_str()) == label {
                if let Some(labels) = labels.as_mut() {
                    labels.push(text.to_string());
                }
            } else {
                row.push(value);
            }
        }
        rows.push(row);
    }

    Dataset::new(schema.clone(), rows, labels, None)
}

fn csv_error(line: u64, column: &str, e: ::csv::Error) -> Error {
    Error::Csv {
        line,
        column: column.to_string(),
        message: e.to_string(),
    }
}

/// Writes the dataset with a header in schema column order. Continuous
/// values use the shortest representation that parses back to the same
/// `f64`.
pub fn write_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    write_csv_to(ds, &mut out).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn write_csv_to<W: Write>(ds: &Dataset, out: &mut W) -> std::io::Result<()> {
    let schema = ds.schema();
    let names: Vec<&str> = schema.columns().iter().map(|c| c.name.as_str()).collect();
    writeln!(out, "{}", names.join(","))?;
    let label = schema.label_column();
    let mut fields = Vec::with_capacity(names.len());
    for i in 0..ds.len() {
        fields.clear();
        let mut feature = 0;
        for col in schema.columns() {
            if Some(col.name.as_str()) == label {
                fields.push(ds.labels().map_or(String::new(), |l| l[i].clone()));
                continue;
            }
            let v = ds.row(i)[feature];
            feature += 1;
            fields.push(match &col.kind {
                ColumnKind::Continuous => format!("{v}"),
                ColumnKind::Categorical { categories } => categories[v as usize].clone(),
            });
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    Ok(())
}
