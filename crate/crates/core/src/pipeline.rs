//! End-to-end steps shared by the command-line tool and the test suites:
//! load → split → select → normalize → train → evaluate → explain.

use std::path::Path;

use crate::bundle::ModelBundle;
use crate::config::{Protocol, RunConfig};
use crate::dataset::{
    apply_normalizer, fit_normalizer, load_csv, select_features, split_train_test, Dataset,
};
use crate::error::{Error, Result};
use crate::metrics::{compute_metrics, kfold_cv, CvOptions, CvResult, MetricsReport};
use crate::model::{score_dataset, train_model};
use crate::rng::{self, tag};
use crate::shap::{explain_dataset, ShapExplanation};

/// Load a flow CSV with the configured schema and missing-value policy.
pub fn load_input(cfg: &RunConfig, path: &Path) -> Result<Dataset> {
    let schema = cfg.schema.resolve(path)?;
    load_csv(path, &schema, cfg.preprocessing.missing_policy)
}

/// Load a CSV for an already trained bundle.
pub fn load_for_bundle(bundle: &ModelBundle, path: &Path) -> Result<Dataset> {
    load_csv(
        path,
        &bundle.schema,
        bundle.config.preprocessing.missing_policy,
    )
}

/// Apply the configured feature-selection strategies in order.
pub fn select_all(ds: &Dataset, cfg: &RunConfig) -> Result<Dataset> {
    let mut out = ds.clone();
    for &strategy in &cfg.preprocessing.feature_selection {
        out = select_features(&out, strategy)?;
    }
    Ok(out)
}

/// Keep only the columns of `ds` named by `names`, in that order.
pub fn project_by_name(ds: &Dataset, names: &[String]) -> Result<Dataset> {
    let keep = names
        .iter()
        .map(|n| {
            ds.schema()
                .index_of(n)
                .ok_or_else(|| Error::Schema(format!("missing column '{n}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ds.project(&keep))
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: ModelBundle,
    /// gbt only: training loss before the first round and after each round.
    pub round_losses: Option<Vec<f64>>,
    pub n_train: usize,
    /// Held-out rows (selected features, original scale) under the holdout protocol.
    pub test: Option<Dataset>,
}

/// Train on `raw` as configured. Under the holdout protocol the model sees
/// only the training part and the held-out part is returned.
pub fn train_pipeline(raw: &Dataset, cfg: &RunConfig) -> Result<TrainOutcome> {
    let (train, test) = match cfg.evaluation.protocol {
        Protocol::Holdout => {
            let split = split_train_test(
                raw,
                cfg.evaluation.holdout_fraction,
                rng::mix(cfg.seed, tag::SPLIT),
                cfg.evaluation.stratified,
            )?;
            (split.train, Some(split.test))
        }
        Protocol::Kfold => (raw.clone(), None),
    };
    let selected = select_all(&train, cfg)?;
    let test = test
        .map(|t| project_by_name(&t, &selected.schema().feature_names))
        .transpose()?;
    let normalizer = fit_normalizer(&selected, cfg.preprocessing.normalization)?;
    let normalized = apply_normalizer(&selected, &normalizer)?;
    let trained = train_model(&normalized, &cfg.model, cfg.seed)?;
    let embedded = cfg.embedded();
    let bundle = ModelBundle {
        ensemble: trained.ensemble,
        normalizer,
        schema: selected.schema().clone(),
        config_hash: embedded.hash(),
        seed: cfg.seed,
        config: embedded,
        preprocessing_log: normalized.preprocessing_log().to_vec(),
    };
    bundle.validate()?;
    Ok(TrainOutcome {
        bundle,
        round_losses: trained.round_losses,
        n_train: normalized.n_rows(),
        test,
    })
}

/// Normalized copy of `ds` (already restricted to the bundle's features).
pub fn prepare_for_bundle(bundle: &ModelBundle, ds: &Dataset) -> Result<Dataset> {
    if ds.schema().feature_names != bundle.schema.feature_names {
        return Err(Error::Schema(
            "input features do not match the bundle schema".into(),
        ));
    }
    apply_normalizer(ds, &bundle.normalizer)
}

/// Scores and predicted classes for `ds` in original units.
pub fn predict_bundle(
    bundle: &ModelBundle,
    ds: &Dataset,
    threshold: f64,
) -> Result<(Vec<f64>, Vec<u8>)> {
    let normalized = prepare_for_bundle(bundle, ds)?;
    let scores = score_dataset(&bundle.ensemble, &normalized)?;
    let predicted = bundle.config.model.classify(&scores, threshold);
    Ok((scores, predicted))
}

pub fn evaluate_bundle(
    bundle: &ModelBundle,
    ds: &Dataset,
    threshold: f64,
) -> Result<MetricsReport> {
    let (_, predicted) = predict_bundle(bundle, ds, threshold)?;
    Ok(MetricsReport {
        metrics: compute_metrics(ds.require_labels()?, &predicted)?,
        threshold,
        model: bundle.config.model.name().to_string(),
        fold: None,
    })
}

/// k-fold cross-validation; feature selection is fitted once on all of
/// `raw` (it ignores labels), the normalizer per fold.
pub fn crossval_pipeline(raw: &Dataset, cfg: &RunConfig) -> Result<CvResult> {
    let selected = select_all(raw, cfg)?;
    let opts = CvOptions {
        k: cfg.evaluation.k,
        stratified: cfg.evaluation.stratified,
        normalization: cfg.preprocessing.normalization,
        threshold: cfg.evaluation.threshold,
    };
    kfold_cv(
        &selected,
        &cfg.model,
        opts,
        rng::mix(cfg.seed, tag::CROSS_VALIDATION),
    )
}

/// SHAP explanations of every row of `ds` (original units) under `bundle`.
pub fn explain_bundle(bundle: &ModelBundle, ds: &Dataset) -> Result<Vec<ShapExplanation>> {
    let normalized = prepare_for_bundle(bundle, ds)?;
    explain_dataset(&bundle.ensemble, &normalized)
}
