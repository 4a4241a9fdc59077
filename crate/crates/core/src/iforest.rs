//! Isolation forest: random axis-aligned splits on small subsamples; flows
//! that isolate in few splits score as anomalous.
//!
//! Leaves store `depth + c(m)` as their value and the node size `m` as their
//! cover, so the mean leaf value over trees is the expected path length E[h].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{mix, SplitMix64};
use crate::tree::{DecisionTree, Ensemble, EnsembleKind, Node};

const EULER_GAMMA: f64 = 0.5772156649;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IforestConfig {
    pub n_trees: usize,
    /// ψ; capped at the number of training records.
    pub subsample_size: usize,
    /// `None` means ⌈log₂ ψ⌉.
    pub max_depth: Option<usize>,
    pub score_threshold: f64,
    /// When set, flag the top `contamination` fraction of each scored batch
    /// instead of applying `score_threshold`.
    pub contamination: Option<f64>,
}

impl Default for IforestConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            subsample_size: 256,
            max_depth: None,
            score_threshold: 0.5,
            contamination: None,
        }
    }
}

impl IforestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("iforest n_trees must be at least 1".into()));
        }
        if self.subsample_size < 2 {
            return Err(Error::Config(
                "iforest subsample_size must be at least 2".into(),
            ));
        }
        if !(self.score_threshold > 0.0 && self.score_threshold < 1.0) {
            return Err(Error::Config(format!(
                "iforest score_threshold must be in (0, 1), got {}",
                self.score_threshold
            )));
        }
        if let Some(q) = self.contamination {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::Config(format!(
                    "iforest contamination must be in (0, 1), got {q}"
                )));
            }
        }
        Ok(())
    }

    pub fn resolved_max_depth(&self, psi: usize) -> usize {
        self.max_depth
            .unwrap_or_else(|| (psi as f64).log2().ceil() as usize)
    }
}

/// Average path length of an unsuccessful search among `m` points, c(m).
pub fn expected_path_correction(m: usize) -> f64 {
    if m <= 1 {
        return 0.0;
    }
    let m = m as f64;
    let harmonic = (m - 1.0).ln() + EULER_GAMMA;
    2.0 * harmonic - 2.0 * (m - 1.0) / m
}

pub fn train_iforest(train: &Dataset, cfg: &IforestConfig, seed: u64) -> Result<Ensemble> {
    cfg.validate()?;
    let n = train.n_rows();
    if n < 2 {
        return Err(Error::Data(format!(
            "isolation forest needs at least 2 records, got {n}"
        )));
    }
    let psi = cfg.subsample_size.min(n);
    let max_depth = cfg.resolved_max_depth(psi);
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| train_tree(train, psi, max_depth, seed, t))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(EnsembleKind::IsolationForest, trees, psi as f64)
}

/// Build isolation tree `t` from a ψ-subsample drawn without replacement.
pub fn train_tree(
    train: &Dataset,
    psi: usize,
    max_depth: usize,
    seed: u64,
    t: usize,
) -> Result<DecisionTree> {
    let mut rng = SplitMix64::new(mix(seed, t as u64));
    let mut rows = rng.sample_without_replacement(train.n_rows(), psi);
    let mut builder = Builder {
        data: train,
        max_depth,
        rng,
        nodes: Vec::new(),
    };
    builder.build(&mut rows, 0);
    DecisionTree::from_nodes(builder.nodes)
}

struct Builder<'a> {
    data: &'a Dataset,
    max_depth: usize,
    rng: SplitMix64,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let m = rows.len();
        let id = self.nodes.len();
        self.nodes.push(Node::leaf(
            depth as f64 + expected_path_correction(m),
            m as f64,
        ));
        if m <= 1 || depth >= self.max_depth {
            return id;
        }
        let ranges: Vec<(usize, f64, f64)> = (0..self.data.n_features())
            .filter_map(|j| {
                let (lo, hi) =
                    rows.iter()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                            let v = self.data.row(r)[j];
                            (lo.min(v), hi.max(v))
                        });
                (lo < hi).then_some((j, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[self.rng.below(ranges.len())];
        let threshold = loop {
            let t = lo + self.rng.next_f64() * (hi - lo);
            if t > lo && t < hi {
                break t;
            }
        };
        let mut k = 0;
        for i in 0..m {
            if self.data.row(rows[i])[feature] < threshold {
                rows.swap(i, k);
                k += 1;
            }
        }
        let (left_rows, right_rows) = rows.split_at_mut(k);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[id] = Node::split(feature, threshold, left, right, m as f64);
        id
    }
}

fn check_kind(ens: &Ensemble) -> Result<()> {
    if ens.kind != EnsembleKind::IsolationForest {
        return Err(Error::Contract(format!(
            "expected an isolation forest, got {}",
            ens.kind.as_str()
        )));
    }
    Ok(())
}

/// Mean over trees of (path depth + c(leaf size)).
pub fn expected_path_length(ens: &Ensemble, x: &[f64]) -> Result<f64> {
    check_kind(ens)?;
    let mut total = 0.0;
    for tree in &ens.trees {
        total += crate::tree::predict_tree(tree, x)?;
    }
    Ok(total / ens.trees.len() as f64)
}

/// `2^(−E[h] / c(ψ))` for a given mean path length.
pub fn score_from_path_length(mean_path: f64, psi: usize) -> f64 {
    (-mean_path / expected_path_correction(psi)).exp2()
}

/// Anomaly score in (0, 1); higher is more anomalous.
pub fn anomaly_score(ens: &Ensemble, x: &[f64]) -> Result<f64> {
    let h = expected_path_length(ens, x)?;
    Ok(score_from_path_length(h, ens.base_value as usize))
}

/// Flag scores as anomalous, either by fixed threshold or by taking the top
/// `contamination` fraction of the batch (ties broken by lower index).
pub fn flag_anomalies(scores: &[f64], threshold: f64, contamination: Option<f64>) -> Vec<u8> {
    match contamination {
        None => scores.iter().map(|&s| u8::from(s >= threshold)).collect(),
        Some(q) => {
            let k = (scores.len() as f64 * q).round() as usize;
            let mut order: Vec<usize> = (0..scores.len()).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
            let mut flags = vec![0u8; scores.len()];
            for &i in &order[..k] {
                flags[i] = 1;
            }
            flags
        }
    }
}
