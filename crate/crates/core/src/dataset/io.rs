//! CSV ingestion and emission.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{Dataset, FeatureKind, FeatureSchema, LabelHierarchy};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Read only the header row of a CSV file.
pub fn read_header(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).from_reader(file);
    let header = rdr.headers()?;
    if header.is_empty() || (header.len() == 1 && header[0].trim().is_empty()) {
        return Err(Error::EmptyInput(format!("{} has no header", path.display())));
    }
    Ok(header.iter().map(|h| h.trim().to_string()).collect())
}

pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, &LabelHierarchy::iov())
}

/// Parse records from any reader. Lines starting with `#` are skipped. Row numbers in errors are 1-based data rows
/// (the header is not counted).
pub fn read_csv<R: Read>(reader: R, schema: &FeatureSchema, hierarchy: &LabelHierarchy) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .flexible(false)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyInput("CSV has no header".into()));
    }

    let find = |name: &str| header.iter().position(|h| h == name);
    let label_col = find(&schema.label_column)
        .ok_or_else(|| Error::Schema(format!("missing column `{}`", schema.label_column)))?;
    let mut feature_cols = Vec::with_capacity(schema.n_features());
    for name in &schema.feature_names {
        feature_cols.push(find(name).ok_or_else(|| Error::Schema(format!("missing column `{name}`")))?);
    }
    for h in &header {
        let known = *h == schema.label_column
            || schema.feature_names.contains(h)
            || schema.ignored_columns.contains(h);
        if !known {
            return Err(Error::Schema(format!("unexpected column `{h}`")));
        }
    }

    let m = schema.n_features();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let label = rec.get(label_col).unwrap_or("").trim();
        if label.is_empty() {
            return Err(Error::Parse {
                row,
                message: "missing label".into(),
            });
        }
        labels.push(hierarchy.parse_label(label).map_err(|_| Error::Parse {
            row,
            message: format!("unknown label `{label}`"),
        })?);
        for (j, &col) in feature_cols.iter().enumerate() {
            let raw = rec.get(col).unwrap_or("").trim();
            let v = parse_value(raw, schema.feature_kind).map_err(|message| Error::Parse {
                row,
                message: format!("column `{}`: {message}", schema.feature_names[j]),
            })?;
            values.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput("CSV has no data rows".into()));
    }
    let features = Matrix::new(labels.len(), m, values)?;
    Dataset::new(schema.clone(), hierarchy.clone(), features, labels)
}

fn parse_value(raw: &str, kind: FeatureKind) -> std::result::Result<f64, String> {
    if raw.is_empty() {
        return Err("missing value".into());
    }
    let v: f64 = raw.parse().map_err(|_| format!("not a number: `{raw}`"))?;
    if !v.is_finite() {
        return Err(format!("non-finite value `{raw}`"));
    }
    if kind == FeatureKind::Binary && v != 0.0 && v != 1.0 {
        return Err(format!("non-binary value `{raw}`"));
    }
    Ok(v)
}

/// Emit features then the label column, labels as canonical fine class names.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.schema().feature_names.iter().map(String::as_str).collect();
    header.push(&ds.schema().label_column);
    wtr.write_record(&header)?;
    let classes = ds.hierarchy().classes(super::Level::Fine);
    let mut fields: Vec<String> = Vec::with_capacity(ds.n_features() + 1);
    for i in 0..ds.n_records() {
        fields.clear();
        // f64 Display is the shortest string that parses back to the same value
        fields.extend(ds.record(i).iter().map(|v| v.to_string()));
        fields.push(classes[ds.labels()[i]].clone());
        wtr.write_record(&fields)?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(ds, std::io::BufWriter::new(file))
}
