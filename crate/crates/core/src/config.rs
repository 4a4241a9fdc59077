//! Run configuration: one JSON document describing a whole pipeline run.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{
    FeatureSchema, FeatureSelection, MissingPolicy, NormalizeMethod, ANOMALY_LABEL, LABEL_COLUMN,
};
use crate::error::{Error, Result};
use crate::model::ModelConfig;

/// SHA-256 (hex) of the compact JSON serialization of `value`.
pub fn hash_json<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).expect("value serializes to JSON");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemaConfig {
    /// `None` takes every non-label column of the input header, in order.
    pub feature_names: Option<Vec<String>>,
    pub label_column: String,
    pub positive_label: String,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        SchemaConfig {
            feature_names: None,
            label_column: LABEL_COLUMN.to_string(),
            positive_label: ANOMALY_LABEL.to_string(),
        }
    }
}

impl SchemaConfig {
    /// Resolve against a CSV header when feature names were not given.
    pub fn resolve(&self, csv: &Path) -> Result<FeatureSchema> {
        match &self.feature_names {
            Some(names) => {
                FeatureSchema::new(names.clone(), &self.label_column, &self.positive_label)
            }
            None => crate::dataset::infer_schema(csv, &self.label_column, &self.positive_label),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessingConfig {
    pub missing_policy: MissingPolicy,
    /// Applied in order, each fitted on the training data.
    pub feature_selection: Vec<FeatureSelection>,
    pub normalization: NormalizeMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    #[default]
    Holdout,
    Kfold,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Holdout => "holdout",
            Protocol::Kfold => "kfold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub protocol: Protocol,
    /// Training share of the holdout split.
    pub holdout_fraction: f64,
    pub k: usize,
    pub stratified: bool,
    /// Decision threshold; `None` uses the model's default.
    pub threshold: Option<f64>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            protocol: Protocol::Holdout,
            holdout_fraction: 0.8,
            k: 10,
            stratified: true,
            threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub schema: SchemaConfig,
    #[serde(default)]
    pub preprocessing: PreprocessingConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    /// Required: there is no clock-derived default.
    pub seed: u64,
    /// Where to write outputs. Not part of the config hash.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl RunConfig {
    /// A small gbt configuration, mostly defaults.
    pub fn example() -> Self {
        RunConfig {
            schema: SchemaConfig::default(),
            preprocessing: PreprocessingConfig::default(),
            model: ModelConfig::default_for("gbt").expect("gbt is a model kind"),
            evaluation: EvaluationConfig::default(),
            seed: 42,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.evaluation;
        if !(e.holdout_fraction > 0.0 && e.holdout_fraction < 1.0) {
            return Err(Error::Config(format!(
                "evaluation.holdout_fraction must be in (0, 1), got {}",
                e.holdout_fraction
            )));
        }
        if e.k < 2 {
            return Err(Error::Config(format!(
                "evaluation.k must be at least 2, got {}",
                e.k
            )));
        }
        if let Some(t) = e.threshold {
            if !t.is_finite() {
                return Err(Error::Config("evaluation.threshold must be finite".into()));
            }
        }
        // Feature-count dependent checks happen once the data is known.
        match &self.model {
            ModelConfig::Rf(_) => Ok(()),
            m => m.validate(0),
        }
    }

    /// The configuration as embedded in outputs: everything but `output_dir`.
    pub fn embedded(&self) -> Self {
        RunConfig {
            output_dir: None,
            ..self.clone()
        }
    }

    /// SHA-256 (hex) of the compact JSON of [`RunConfig::embedded`].
    pub fn hash(&self) -> String {
        hash_json(&self.embedded())
    }

    pub fn threshold(&self) -> f64 {
        self.evaluation
            .threshold
            .unwrap_or_else(|| self.model.default_threshold())
    }
}
