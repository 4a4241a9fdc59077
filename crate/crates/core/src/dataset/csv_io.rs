use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{encode_labels, median, Dataset, FeatureSchema, PreprocessStep};
use crate::error::{Error, Result};

/// How rows with missing feature cells are handled.
///
/// A cell is missing when it is empty, or holds a non-finite token such as
/// `NaN` or `Infinity`. Rows with a missing label are always dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Drop,
    Median,
}

fn reader_builder() -> csv::ReaderBuilder {
    let mut b = csv::ReaderBuilder::new();
    b.has_headers(true).trim(csv::Trim::All).comment(Some(b'#'));
    b
}

/// Build a schema from a CSV header: every column except `label_column` is a feature.
pub fn infer_schema(
    path: &Path,
    label_column: &str,
    positive_label: &str,
) -> Result<FeatureSchema> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = reader_builder().from_reader(file);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Data(format!("{} is empty", path.display())));
    }
    if !headers.iter().any(|h| h == label_column) {
        return Err(Error::Schema(format!("missing column '{label_column}'")));
    }
    let names = headers
        .iter()
        .filter(|h| *h != label_column)
        .map(str::to_string)
        .collect();
    FeatureSchema::new(names, label_column, positive_label)
}

pub fn load_csv(path: &Path, schema: &FeatureSchema, policy: MissingPolicy) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema, policy)
}

/// Parse a flow CSV, resolve missing values and encode labels.
///
/// Columns not named by the schema are ignored.
pub fn read_csv<R: Read>(
    reader: R,
    schema: &FeatureSchema,
    policy: MissingPolicy,
) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = reader_builder().from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers.get(0) == Some("")) {
        return Err(Error::Data("input is empty".into()));
    }
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let feature_cols = schema
        .feature_names
        .iter()
        .map(|n| column(n))
        .collect::<Result<Vec<_>>>()?;
    let label_col = column(&schema.label_column)?;

    let d = feature_cols.len();
    let mut rows_read = 0usize;
    let mut dropped_missing_label = 0usize;
    let mut cells: Vec<Option<f64>> = Vec::new();
    let mut raw_labels = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        rows_read += 1;
        // Data rows are numbered from 1; the header is row 0.
        let row_no = rows_read;
        let label = record.get(label_col).unwrap_or("");
        if label.is_empty() {
            dropped_missing_label += 1;
            continue;
        }
        for (&col, name) in feature_cols.iter().zip(&schema.feature_names) {
            let cell = record.get(col).unwrap_or("");
            cells.push(parse_cell(cell).map_err(|message| Error::Parse {
                row: row_no,
                column: name.clone(),
                message,
            })?);
        }
        raw_labels.push(label.to_string());
    }
    if rows_read == 0 {
        return Err(Error::Data("input has a header but no data rows".into()));
    }

    let n = raw_labels.len();
    let mut medians = Vec::new();
    let mut imputed_cells = 0usize;
    let mut dropped_missing_features = 0usize;
    let mut values = Vec::with_capacity(n * d);
    let mut kept_labels = Vec::with_capacity(n);
    match policy {
        MissingPolicy::Drop => {
            for (i, label) in raw_labels.into_iter().enumerate() {
                let row = &cells[i * d..(i + 1) * d];
                if row.iter().all(Option::is_some) {
                    values.extend(row.iter().map(|c| c.unwrap()));
                    kept_labels.push(label);
                } else {
                    dropped_missing_features += 1;
                }
            }
        }
        MissingPolicy::Median => {
            for j in 0..d {
                let mut present: Vec<f64> = (0..n).filter_map(|i| cells[i * d + j]).collect();
                let m = median(&mut present).ok_or_else(|| {
                    Error::Data(format!(
                        "feature '{}' has no values to compute a median from",
                        schema.feature_names[j]
                    ))
                })?;
                medians.push(m);
            }
            for (k, cell) in cells.iter().enumerate() {
                values.push(cell.unwrap_or_else(|| {
                    imputed_cells += 1;
                    medians[k % d]
                }));
            }
            kept_labels = raw_labels;
        }
    }
    if kept_labels.is_empty() {
        return Err(Error::Data(
            "no records remain after removing missing values".into(),
        ));
    }

    let (labels, _) = encode_labels(&kept_labels, &schema.positive_label)?;
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let log = vec![
        PreprocessStep::Load {
            missing_policy: policy,
            rows_read,
            dropped_missing_label,
            dropped_missing_features,
            imputed_cells,
            medians,
        },
        PreprocessStep::EncodeLabels {
            positive_label: schema.positive_label.clone(),
            positives,
            negatives: labels.len() - positives,
        },
    ];
    Dataset::from_parts(schema.clone(), values, Some(labels), Some(kept_labels), log)
}

fn parse_cell(cell: &str) -> std::result::Result<Option<f64>, String> {
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        // NaN, Infinity and friends all count as missing.
        Ok(_) => Ok(None),
        Err(_) => Err(format!("'{cell}' is not a number")),
    }
}

/// Write the dataset as CSV (features then label column), reals in shortest
/// round-trip form. `comment` lines are emitted first, each prefixed by `# `.
pub fn write_csv<W: Write>(ds: &Dataset, out: W, comment: &[String]) -> Result<()> {
    let mut out = out;
    for line in comment {
        writeln!(out, "# {line}").map_err(|e| Error::io("<csv output>", e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let schema = ds.schema();
    let mut header: Vec<&str> = schema.feature_names.iter().map(String::as_str).collect();
    header.push(&schema.label_column);
    w.write_record(&header)?;
    let mut buf = Vec::with_capacity(header.len());
    for i in 0..ds.n_rows() {
        buf.clear();
        buf.extend(ds.row(i).iter().map(|&v| crate::real::format(v)));
        buf.push(match (ds.raw_labels(), ds.labels()) {
            (Some(raw), _) => raw[i].clone(),
            (None, Some(l)) => l[i].to_string(),
            (None, None) => String::new(),
        });
        w.write_record(&buf)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}
