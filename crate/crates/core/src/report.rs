//! Machine-readable JSON reports written by the pipeline commands.
//!
//! Metrics documents have the shape
//!
//! ```text
//! {protocol, model, threshold,
//!  folds: [{fold, tp, fp, fn, tn, accuracy, precision, recall, f1}],
//!  summary: {mean: {...}, stddev: {...}},
//!  config_hash, seed}
//! ```
//!
//! An undefined metric is `null` with a sibling `<metric>_undefined_reason`.

use serde_json::{json, Map, Value};

use crate::dataset::PreprocessStep;
use crate::metrics::{Metric, MetricName, MetricsReport, Summary};

/// Provenance attached to every report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    fn stamp(&self, doc: &mut Map<String, Value>) {
        doc.insert("config_hash".into(), json!(self.config_hash));
        doc.insert("seed".into(), json!(self.seed));
    }

    /// Comment lines for CSV outputs.
    pub fn comment_lines(&self) -> Vec<String> {
        vec![
            format!("config_hash={}", self.config_hash),
            format!("seed={}", self.seed),
        ]
    }
}

fn insert_metric(doc: &mut Map<String, Value>, name: MetricName, metric: &Metric) {
    match metric {
        Metric::Defined(v) => {
            doc.insert(name.as_str().into(), json!(v));
        }
        Metric::Undefined(reason) => {
            doc.insert(name.as_str().into(), Value::Null);
            doc.insert(format!("{}_undefined_reason", name.as_str()), json!(reason));
        }
    }
}

fn fold_entry(report: &MetricsReport) -> Value {
    let c = report.metrics.counts;
    let mut doc = Map::new();
    doc.insert("fold".into(), json!(report.fold));
    doc.insert("tp".into(), json!(c.tp));
    doc.insert("fp".into(), json!(c.fp));
    doc.insert("fn".into(), json!(c.fn_));
    doc.insert("tn".into(), json!(c.tn));
    for name in MetricName::ALL {
        insert_metric(&mut doc, name, report.metrics.get(name));
    }
    Value::Object(doc)
}

fn summary_part(entries: &[(MetricName, Option<f64>)]) -> Value {
    let mut doc = Map::new();
    for (name, v) in entries {
        doc.insert(name.as_str().into(), json!(v));
    }
    Value::Object(doc)
}

pub fn metrics_document(
    protocol: &str,
    reports: &[MetricsReport],
    summary: &Summary,
    prov: &Provenance,
) -> Value {
    let mut doc = Map::new();
    doc.insert("protocol".into(), json!(protocol));
    if let Some(first) = reports.first() {
        doc.insert("model".into(), json!(first.model));
        doc.insert("threshold".into(), json!(first.threshold));
    }
    doc.insert(
        "folds".into(),
        Value::Array(reports.iter().map(fold_entry).collect()),
    );
    doc.insert(
        "summary".into(),
        json!({"mean": summary_part(&summary.mean), "stddev": summary_part(&summary.stddev)}),
    );
    prov.stamp(&mut doc);
    Value::Object(doc)
}

/// Row accounting and removed features for a preprocessing run.
pub fn preprocess_document(log: &[PreprocessStep], output_rows: usize, prov: &Provenance) -> Value {
    let mut doc = Map::new();
    let mut removed: Vec<String> = Vec::new();
    for step in log {
        match step {
            PreprocessStep::Load {
                rows_read,
                dropped_missing_label,
                dropped_missing_features,
                imputed_cells,
                ..
            } => {
                doc.insert("input_rows".into(), json!(rows_read));
                doc.insert("dropped_missing_label".into(), json!(dropped_missing_label));
                doc.insert(
                    "dropped_missing_features".into(),
                    json!(dropped_missing_features),
                );
                doc.insert(
                    "dropped_rows".into(),
                    json!(dropped_missing_label + dropped_missing_features),
                );
                doc.insert("imputed_cells".into(), json!(imputed_cells));
            }
            PreprocessStep::SelectFeatures { removed: r, .. } => removed.extend(r.iter().cloned()),
            _ => {}
        }
    }
    doc.insert("output_rows".into(), json!(output_rows));
    doc.insert("removed_features".into(), json!(removed));
    doc.insert(
        "steps".into(),
        serde_json::to_value(log).expect("log serializes"),
    );
    prov.stamp(&mut doc);
    Value::Object(doc)
}

/// Pretty JSON with a trailing newline.
pub fn render(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("JSON value serializes");
    s.push('\n');
    s
}
