//! Uniform train/score/classify surface over the three learners.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::gbt::{sigmoid, train_gbt, GbtConfig};
use crate::iforest::{flag_anomalies, score_from_path_length, train_iforest, IforestConfig};
use crate::rf::{train_rf, RfConfig};
use crate::tree::{Ensemble, EnsembleKind};

/// Learner choice plus its hyperparameters, e.g. `{"kind": "gbt", "n_rounds": 50}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Gbt(GbtConfig),
    Rf(RfConfig),
    Iforest(IforestConfig),
}

impl ModelConfig {
    /// Default configuration for a kind named on the command line.
    pub fn default_for(name: &str) -> Option<Self> {
        match name {
            "gbt" => Some(ModelConfig::Gbt(GbtConfig::default())),
            "rf" => Some(ModelConfig::Rf(RfConfig::default())),
            "iforest" => Some(ModelConfig::Iforest(IforestConfig::default())),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelConfig::Gbt(_) => "gbt",
            ModelConfig::Rf(_) => "rf",
            ModelConfig::Iforest(_) => "iforest",
        }
    }

    pub fn ensemble_kind(&self) -> EnsembleKind {
        match self {
            ModelConfig::Gbt(_) => EnsembleKind::Gbt,
            ModelConfig::Rf(_) => EnsembleKind::RandomForest,
            ModelConfig::Iforest(_) => EnsembleKind::IsolationForest,
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        match self {
            ModelConfig::Gbt(c) => c.validate(),
            ModelConfig::Rf(c) => c.validate(n_features),
            ModelConfig::Iforest(c) => c.validate(),
        }
    }

    /// Threshold on [`TrainedModel::scores`] used when none is configured.
    pub fn default_threshold(&self) -> f64 {
        match self {
            ModelConfig::Iforest(c) => c.score_threshold,
            _ => 0.5,
        }
    }

    /// Turn scores into class labels.
    ///
    /// gbt: probability ≥ threshold; rf: vote fraction > threshold (a tie is
    /// benign); iforest: score ≥ threshold, or the top contamination fraction.
    pub fn classify(&self, scores: &[f64], threshold: f64) -> Vec<u8> {
        match self {
            ModelConfig::Gbt(_) => scores.iter().map(|&p| u8::from(p >= threshold)).collect(),
            ModelConfig::Rf(_) => scores.iter().map(|&v| u8::from(v > threshold)).collect(),
            ModelConfig::Iforest(c) => flag_anomalies(scores, threshold, c.contamination),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub ensemble: Ensemble,
    /// gbt only: total training loss before training and after each round.
    pub round_losses: Option<Vec<f64>>,
}

pub fn train_model(train: &Dataset, cfg: &ModelConfig, seed: u64) -> Result<TrainedModel> {
    cfg.validate(train.n_features())?;
    Ok(match cfg {
        ModelConfig::Gbt(c) => {
            let out = train_gbt(train, c, seed)?;
            TrainedModel {
                ensemble: out.ensemble,
                round_losses: Some(out.round_losses),
            }
        }
        ModelConfig::Rf(c) => TrainedModel {
            ensemble: train_rf(train, c, seed)?,
            round_losses: None,
        },
        ModelConfig::Iforest(c) => TrainedModel {
            ensemble: train_iforest(train, c, seed)?,
            round_losses: None,
        },
    })
}

impl TrainedModel {
    pub fn scores(&self, ds: &Dataset) -> Result<Vec<f64>> {
        score_dataset(&self.ensemble, ds)
    }
}

/// Per-record score: probability (gbt), vote fraction (rf) or anomaly score (iforest).
pub fn score(ens: &Ensemble, x: &[f64]) -> f64 {
    let raw = ens.raw_output(x);
    match ens.kind {
        EnsembleKind::Gbt => sigmoid(raw),
        EnsembleKind::RandomForest => raw,
        EnsembleKind::IsolationForest => score_from_path_length(raw, ens.base_value as usize),
    }
}

pub fn score_dataset(ens: &Ensemble, ds: &Dataset) -> Result<Vec<f64>> {
    if let Some(j) = ens.max_feature() {
        if j >= ds.n_features() {
            return Err(Error::Schema(format!(
                "model splits on feature {j} but data has {} features",
                ds.n_features()
            )));
        }
    }
    if ds.values().iter().any(|v| v.is_nan()) {
        return Err(Error::Data("missing values at prediction time".into()));
    }
    Ok((0..ds.n_rows())
        .into_par_iter()
        .map(|i| score(ens, ds.row(i)))
        .collect())
}
