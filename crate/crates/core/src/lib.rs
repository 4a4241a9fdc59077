//! Flow-feature anomaly detection with tree ensembles and exact Shapley
//! attributions.
//!
//! The pipeline loads flow records from CSV ([`dataset`]), trains a gradient
//! boosted ensemble, random forest or isolation forest ([`model`]), evaluates
//! it ([`metrics`]) and explains its predictions with TreeSHAP ([`shap`]).
//! Trained models persist as JSON [`bundle`]s.

pub mod bundle;
pub mod config;
pub mod dataset;
pub mod error;
pub mod gbt;
pub mod iforest;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod real;
pub mod report;
pub mod rf;
pub mod rng;
pub mod shap;
pub mod tree;

pub use bundle::{load_bundle, save_bundle, ModelBundle};
pub use config::RunConfig;
pub use dataset::{Dataset, FeatureSchema};
pub use error::{Error, Result};
pub use model::{train_model, ModelConfig, TrainedModel};
pub use tree::{DecisionTree, Ensemble, EnsembleKind};
