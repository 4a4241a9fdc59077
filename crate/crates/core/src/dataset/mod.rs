//! Flow-level datasets: schema, loading, preprocessing and splitting.
//!
//! A [`Dataset`] is an immutable row-major matrix of flow features with
//! optional binary labels. Every transformation returns a new dataset and
//! appends a [`PreprocessStep`] to its log, so the exact sequence can be
//! replayed against the raw input.

mod csv_io;
mod normalize;
mod select;
mod split;
mod synth;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use csv_io::{infer_schema, load_csv, read_csv, write_csv, MissingPolicy};
pub use normalize::{
    apply_normalizer, denormalize_value, fit_normalizer, NormalizeMethod, NormalizerParams,
};
pub use select::{select_features, FeatureSelection};
pub use split::{split_indices, split_train_test, TrainTestSplit};
pub use synth::{
    feature_name, generate_synthetic, synthetic_schema, SyntheticSpec, ANOMALY_LABEL,
    ANOMALY_SPREAD, BENIGN_LABEL, DRIVER_DISPLACEMENT, DRIVER_FEATURE, LABEL_COLUMN,
};

/// Column layout of a flow CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub feature_names: Vec<String>,
    pub label_column: String,
    /// Raw label value mapped to class 1.
    pub positive_label: String,
}

impl FeatureSchema {
    pub fn new(
        feature_names: Vec<String>,
        label_column: impl Into<String>,
        positive_label: impl Into<String>,
    ) -> Result<Self> {
        let schema = Self {
            feature_names,
            label_column: label_column.into(),
            positive_label: positive_label.into(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        if self.feature_names.is_empty() {
            return Err(Error::Schema(
                "schema must name at least one feature".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for name in &self.feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name '{name}'")));
            }
        }
        if seen.contains(self.label_column.as_str()) {
            return Err(Error::Schema(format!(
                "label column '{}' is also listed as a feature",
                self.label_column
            )));
        }
        Ok(())
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }
}

/// One flow: its feature vector and (optionally) its binary label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowRecord<'a> {
    pub features: &'a [f64],
    pub label: Option<u8>,
}

/// One entry of a dataset's preprocessing history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "step")]
pub enum PreprocessStep {
    Load {
        missing_policy: MissingPolicy,
        rows_read: usize,
        dropped_missing_label: usize,
        dropped_missing_features: usize,
        imputed_cells: usize,
        #[serde(with = "crate::real::vec")]
        medians: Vec<f64>,
    },
    EncodeLabels {
        positive_label: String,
        positives: usize,
        negatives: usize,
    },
    Split {
        seed: u64,
        #[serde(with = "crate::real")]
        train_fraction: f64,
        stratified: bool,
        part: SplitPart,
    },
    SelectFeatures {
        strategy: FeatureSelection,
        removed: Vec<String>,
    },
    Normalize {
        params: NormalizerParams,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitPart {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    values: Vec<f64>,
    labels: Option<Vec<u8>>,
    raw_labels: Option<Vec<String>>,
    log: Vec<PreprocessStep>,
}

impl Dataset {
    /// Build a dataset from row-major values. Labels, when present, must be 0 or 1.
    pub fn from_rows(
        schema: FeatureSchema,
        rows: Vec<Vec<f64>>,
        labels: Option<Vec<u8>>,
    ) -> Result<Self> {
        schema.validate()?;
        let d = schema.n_features();
        let mut values = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Schema(format!(
                    "row {i} has {} values, schema has {d} features",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        let raw_labels = labels
            .as_ref()
            .map(|l| default_raw_labels(l, &schema.positive_label));
        Self::from_parts(schema, values, labels, raw_labels, Vec::new())
    }

    pub(crate) fn from_parts(
        schema: FeatureSchema,
        values: Vec<f64>,
        labels: Option<Vec<u8>>,
        raw_labels: Option<Vec<String>>,
        log: Vec<PreprocessStep>,
    ) -> Result<Self> {
        let d = schema.n_features();
        if !values.len().is_multiple_of(d) {
            return Err(Error::Contract(
                "value buffer is not a whole number of rows".into(),
            ));
        }
        let n = values.len() / d;
        if let Some(l) = &labels {
            if l.len() != n {
                return Err(Error::Contract(format!("{} labels for {n} rows", l.len())));
            }
            if let Some(bad) = l.iter().find(|&&y| y > 1) {
                return Err(Error::Data(format!("label {bad} is not binary")));
            }
        }
        if let Some(r) = &raw_labels {
            if r.len() != n {
                return Err(Error::Contract(format!(
                    "{} raw labels for {n} rows",
                    r.len()
                )));
            }
        }
        Ok(Self {
            schema,
            values,
            labels,
            raw_labels,
            log,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.schema.n_features()
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.n_features())
    }

    pub fn record(&self, i: usize) -> FlowRecord<'_> {
        FlowRecord {
            features: self.row(i),
            label: self.labels.as_ref().map(|l| l[i]),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    /// Labels, or a data error if the dataset is unlabeled.
    pub fn require_labels(&self) -> Result<&[u8]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::Data("dataset has no labels".into()))
    }

    pub fn raw_labels(&self) -> Option<&[String]> {
        self.raw_labels.as_deref()
    }

    pub fn preprocessing_log(&self) -> &[PreprocessStep] {
        &self.log
    }

    /// Class counts `[negatives, positives]`.
    pub fn class_counts(&self) -> Option<[usize; 2]> {
        self.labels.as_ref().map(|l| {
            let pos = l.iter().filter(|&&y| y == 1).count();
            [l.len() - pos, pos]
        })
    }

    /// Rows at `indices`, in that order. The log is carried over unchanged.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let d = self.n_features();
        let mut values = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Dataset {
            schema: self.schema.clone(),
            values,
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            raw_labels: self
                .raw_labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i].clone()).collect()),
            log: self.log.clone(),
        }
    }

    /// Keep only the named features (in schema order).
    pub fn project(&self, keep: &[usize]) -> Dataset {
        let names = keep
            .iter()
            .map(|&j| self.schema.feature_names[j].clone())
            .collect();
        let schema = FeatureSchema {
            feature_names: names,
            ..self.schema.clone()
        };
        let mut values = Vec::with_capacity(self.n_rows() * keep.len());
        for row in self.rows() {
            values.extend(keep.iter().map(|&j| row[j]));
        }
        Dataset {
            schema,
            values,
            labels: self.labels.clone(),
            raw_labels: self.raw_labels.clone(),
            log: self.log.clone(),
        }
    }

    pub(crate) fn with_step(mut self, step: PreprocessStep) -> Self {
        self.log.push(step);
        self
    }

    pub(crate) fn with_values(mut self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        self.values = values;
        self
    }

    /// Re-apply the logged steps after `Load`/`EncodeLabels` to a freshly
    /// loaded copy of the raw input, reproducing this dataset.
    pub fn replay(raw: &Dataset, log: &[PreprocessStep]) -> Result<Dataset> {
        let mut ds = raw.clone();
        let already = raw.log.len();
        if log.len() < already || log[..already] != raw.log[..] {
            return Err(Error::Contract(
                "replay log does not start with the raw dataset's load steps".into(),
            ));
        }
        for step in &log[already..] {
            ds = match step {
                PreprocessStep::Load { .. } | PreprocessStep::EncodeLabels { .. } => {
                    return Err(Error::Contract(
                        "load steps can only be replayed by load_csv".into(),
                    ))
                }
                PreprocessStep::Split {
                    seed,
                    train_fraction,
                    stratified,
                    part,
                } => {
                    let split = split_train_test(&ds, *train_fraction, *seed, *stratified)?;
                    match part {
                        SplitPart::Train => split.train,
                        SplitPart::Test => split.test,
                    }
                }
                PreprocessStep::SelectFeatures { strategy, removed } => {
                    let keep: Vec<usize> = (0..ds.n_features())
                        .filter(|&j| !removed.contains(&ds.schema.feature_names[j]))
                        .collect();
                    ds.project(&keep).with_step(PreprocessStep::SelectFeatures {
                        strategy: *strategy,
                        removed: removed.clone(),
                    })
                }
                PreprocessStep::Normalize { params } => apply_normalizer(&ds, params)?,
            };
        }
        Ok(ds)
    }
}

fn default_raw_labels(labels: &[u8], positive: &str) -> Vec<String> {
    labels
        .iter()
        .map(|&y| {
            if y == 1 {
                positive.to_string()
            } else {
                "0".to_string()
            }
        })
        .collect()
}

/// Map raw label strings to {0, 1}: exactly `positive_label` (case-sensitive) is 1.
///
/// A positive label that never occurs is allowed but logged as a warning;
/// the second return value reports whether it was seen.
pub fn encode_labels(raw_labels: &[String], positive_label: &str) -> Result<(Vec<u8>, bool)> {
    if let Some(i) = raw_labels.iter().position(|l| l.is_empty()) {
        return Err(Error::Data(format!("empty label at position {i}")));
    }
    let encoded: Vec<u8> = raw_labels
        .iter()
        .map(|l| u8::from(l == positive_label))
        .collect();
    let present = encoded.contains(&1);
    if !present {
        log::warn!(
            "positive label '{positive_label}' does not occur in the data; all records are class 0"
        );
    }
    Ok((encoded, present))
}

/// Median with the even-count convention (mean of the two middle values).
pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(names: &[&str]) -> FeatureSchema {
        FeatureSchema::new(
            names.iter().map(|s| s.to_string()).collect(),
            "label",
            "Botnet",
        )
        .unwrap()
    }

    #[test]
    fn schema_invariants() {
        assert!(FeatureSchema::new(vec![], "label", "x").is_err());
        assert!(FeatureSchema::new(vec!["a".into(), "a".into()], "label", "x").is_err());
        assert!(FeatureSchema::new(vec!["a".into(), "label".into()], "label", "x").is_err());
    }

    #[test]
    fn encode_labels_examples() {
        let raw: Vec<String> = ["Benign", "Botnet", "Benign"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(
            encode_labels(&raw, "Botnet").unwrap(),
            (vec![0, 1, 0], true)
        );

        let benign: Vec<String> = vec!["Benign".into(); 4];
        assert_eq!(
            encode_labels(&benign, "Botnet").unwrap(),
            (vec![0; 4], false)
        );

        let lower = vec!["botnet".to_string()];
        assert_eq!(encode_labels(&lower, "Botnet").unwrap().0, vec![0]);

        assert!(encode_labels(&["".to_string()], "Botnet").is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0]), Some(2.0));
        assert_eq!(median(&mut [5.0, 1.0, 3.0]), Some(3.0));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn rows_must_match_schema() {
        let err = Dataset::from_rows(schema(&["a", "b"]), vec![vec![1.0]], None).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn subset_and_project() {
        let ds = Dataset::from_rows(
            schema(&["a", "b", "c"]),
            vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]],
            Some(vec![0, 1]),
        )
        .unwrap();
        let s = ds.subset(&[1]);
        assert_eq!(s.row(0), &[4.0, 5.0, 6.0]);
        assert_eq!(s.labels(), Some(&[1u8][..]));
        let p = ds.project(&[0, 2]);
        assert_eq!(p.schema().feature_names, vec!["a", "c"]);
        assert_eq!(p.row(1), &[4.0, 6.0]);
    }
}
