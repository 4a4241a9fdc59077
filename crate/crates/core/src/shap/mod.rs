//! Exact Shapley-value attributions for tree ensembles.
//!
//! Conditional expectations are path-dependent: a feature outside the
//! coalition sends the evaluation down both children, weighted by child
//! cover over node cover. [`tree_shap`] computes attributions in polynomial
//! time; [`brute_force_shapley`] enumerates every coalition with the same
//! expectation rule and serves as its oracle.
//!
//! Explained quantities: gbt → log-odds margin, random forest → class-1 vote
//! fraction, isolation forest → expected path length E[h(x)], where
//! negative attributions (shorter paths) push towards "anomalous".

mod export;
mod treeshap;

use rayon::prelude::*;
use serde::Serialize;

use crate::dataset::{Dataset, FeatureSchema};
use crate::error::{Error, Result};
use crate::tree::{DecisionTree, Ensemble, NodeKind};

pub use export::{export_explanations, read_shap_csv, write_shap_csv, ExportContext, PlotKind};

/// Largest feature count accepted by the exponential oracle.
pub const BRUTE_FORCE_MAX_FEATURES: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapExplanation {
    pub instance: usize,
    pub phi: Vec<f64>,
    pub base_value: f64,
    pub model_output: f64,
}

impl ShapExplanation {
    /// `|base + Σφ − output|`; zero up to rounding for an exact explanation.
    pub fn additivity_gap(&self) -> f64 {
        (self.base_value + self.phi.iter().sum::<f64>() - self.model_output).abs()
    }
}

/// Expected ensemble output over the training distribution (the SHAP base value).
pub fn expected_output(ens: &Ensemble) -> f64 {
    let sum: f64 = ens.trees.iter().map(DecisionTree::expected_value).sum();
    ens.output_offset() + ens.tree_weight() * sum
}

pub fn tree_shap(ens: &Ensemble, x: &[f64], n_features: usize) -> Result<ShapExplanation> {
    check_width(ens, x, n_features)?;
    let mut phi = vec![0.0; n_features];
    let w = ens.tree_weight();
    for tree in &ens.trees {
        treeshap::tree_shap_into(tree, x, w, &mut phi);
    }
    Ok(ShapExplanation {
        instance: 0,
        phi,
        base_value: expected_output(ens),
        model_output: ens.raw_output(x),
    })
}

/// SHAP values for a single tree (unit weight, no offset).
pub fn tree_shap_single(tree: &DecisionTree, x: &[f64], n_features: usize) -> Vec<f64> {
    let mut phi = vec![0.0; n_features];
    treeshap::tree_shap_into(tree, x, 1.0, &mut phi);
    phi
}

/// Explain every row of `ds`; results are ordered by row index.
pub fn explain_dataset(ens: &Ensemble, ds: &Dataset) -> Result<Vec<ShapExplanation>> {
    let d = ds.n_features();
    (0..ds.n_rows())
        .into_par_iter()
        .map(|i| {
            let mut e = tree_shap(ens, ds.row(i), d)?;
            e.instance = i;
            Ok(e)
        })
        .collect()
}

fn check_width(ens: &Ensemble, x: &[f64], n_features: usize) -> Result<()> {
    if x.len() != n_features {
        return Err(Error::Contract(format!(
            "input has {} features, expected {n_features}",
            x.len()
        )));
    }
    if let Some(j) = ens.max_feature() {
        if j >= n_features {
            return Err(Error::Contract(format!(
                "ensemble splits on feature {j}, beyond the {n_features} inputs"
            )));
        }
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::Data(
            "cannot explain an input with missing values".into(),
        ));
    }
    Ok(())
}

/// Conditional expectation of one tree with the features in `coalition` fixed to `x`.
pub fn conditional_expectation(tree: &DecisionTree, x: &[f64], coalition: &[bool]) -> f64 {
    fn walk(tree: &DecisionTree, i: usize, x: &[f64], coalition: &[bool]) -> f64 {
        let node = &tree.nodes()[i];
        match node.kind {
            NodeKind::Leaf { value } => value,
            NodeKind::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                if coalition[feature] {
                    walk(
                        tree,
                        if x[feature] < threshold { left } else { right },
                        x,
                        coalition,
                    )
                } else {
                    let l = tree.nodes()[left].cover / node.cover;
                    let r = tree.nodes()[right].cover / node.cover;
                    l * walk(tree, left, x, coalition) + r * walk(tree, right, x, coalition)
                }
            }
        }
    }
    walk(tree, 0, x, coalition)
}

/// Shapley values by enumerating all 2^d coalitions.
pub fn brute_force_shapley(
    ens: &Ensemble,
    x: &[f64],
    n_features: usize,
) -> Result<ShapExplanation> {
    if n_features > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::Contract(format!(
            "brute-force Shapley supports at most {BRUTE_FORCE_MAX_FEATURES} features, got {n_features}"
        )));
    }
    check_width(ens, x, n_features)?;
    let d = n_features;
    let value = |mask: usize| -> f64 {
        let coalition: Vec<bool> = (0..d).map(|j| mask & (1 << j) != 0).collect();
        let sum: f64 = ens
            .trees
            .iter()
            .map(|t| conditional_expectation(t, x, &coalition))
            .sum();
        ens.output_offset() + ens.tree_weight() * sum
    };
    let values: Vec<f64> = (0..1usize << d).map(value).collect();

    let factorial = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    let weights: Vec<f64> = (0..d)
        .map(|s| factorial(s) * factorial(d - s - 1) / factorial(d))
        .collect();
    let mut phi = vec![0.0; d];
    for (j, p) in phi.iter_mut().enumerate() {
        let bit = 1 << j;
        for mask in 0..1usize << d {
            if mask & bit == 0 {
                *p += weights[mask.count_ones() as usize] * (values[mask | bit] - values[mask]);
            }
        }
    }
    Ok(ShapExplanation {
        instance: 0,
        phi,
        base_value: values[0],
        model_output: values[(1 << d) - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureRanking {
    /// (feature name, mean |φ|), descending; ties by feature index.
    pub entries: Vec<(String, f64)>,
}

pub fn mean_abs_shap(
    explanations: &[ShapExplanation],
    schema: &FeatureSchema,
) -> Result<FeatureRanking> {
    if explanations.is_empty() {
        return Err(Error::Data("no explanations to rank".into()));
    }
    let d = schema.n_features();
    if let Some(e) = explanations.iter().find(|e| e.phi.len() != d) {
        return Err(Error::Contract(format!(
            "explanation {} has {} attributions, schema has {d} features",
            e.instance,
            e.phi.len()
        )));
    }
    let rows: Vec<&[f64]> = explanations.iter().map(|e| e.phi.as_slice()).collect();
    Ok(rank_rows(&rows, &schema.feature_names))
}

/// Mean |value| per column, ranked descending with index-ascending ties.
///
/// Each column is summed in sorted order, so the result does not depend on
/// the order of `rows`.
pub fn rank_rows(rows: &[&[f64]], names: &[String]) -> FeatureRanking {
    let d = names.len();
    let n = rows.len() as f64;
    let means: Vec<f64> = (0..d)
        .map(|j| {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j].abs()).collect();
            col.sort_by(f64::total_cmp);
            col.iter().sum::<f64>() / n
        })
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
    FeatureRanking {
        entries: order
            .into_iter()
            .map(|j| (names[j].clone(), means[j]))
            .collect(),
    }
}
