//! Random forest: bootstrap-aggregated Gini trees with per-node feature subsampling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{mix, SplitMix64};
use crate::tree::{DecisionTree, Ensemble, EnsembleKind, Node};

/// Hard cap on tree depth when `max_depth` is left unlimited.
pub const DEPTH_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfConfig {
    pub n_trees: usize,
    /// `None` means unlimited (capped at [`DEPTH_CAP`]).
    pub max_depth: Option<usize>,
    /// Features sampled per node; `None` means ⌈√d⌉.
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for RfConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            max_features: None,
            min_samples_leaf: 1,
        }
    }
}

impl RfConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config("rf n_trees must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Config(
                "rf min_samples_leaf must be at least 1".into(),
            ));
        }
        let m = self.resolved_max_features(d);
        if m == 0 || m > d {
            return Err(Error::Config(format!(
                "rf max_features must be in [1, {d}], got {m}"
            )));
        }
        Ok(())
    }

    pub fn resolved_max_features(&self, d: usize) -> usize {
        self.max_features
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
    }

    pub fn resolved_max_depth(&self) -> usize {
        self.max_depth.unwrap_or(DEPTH_CAP).min(DEPTH_CAP)
    }
}

/// Gini impurity of a node with the given class counts.
pub fn gini(n0: usize, n1: usize) -> f64 {
    let n = (n0 + n1) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (n0 as f64 / n, n1 as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

/// Bootstrap draws (with replacement) for tree `t`.
pub fn bootstrap_sample(n: usize, seed: u64, tree_index: usize) -> Vec<usize> {
    let mut rng = SplitMix64::new(mix(seed, tree_index as u64));
    (0..n).map(|_| rng.below(n)).collect()
}

pub fn train_rf(train: &Dataset, cfg: &RfConfig, seed: u64) -> Result<Ensemble> {
    let d = train.n_features();
    cfg.validate(d)?;
    let labels = train.require_labels()?;
    let n = train.n_rows();
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::Data(
            "random forest training data must contain both classes".into(),
        ));
    }
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| train_tree(train, labels, cfg, seed, t))
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(EnsembleKind::RandomForest, trees, 0.0)
}

/// Train tree `t` of the forest. Depends only on (data, config, seed, t).
pub fn train_tree(
    train: &Dataset,
    labels: &[u8],
    cfg: &RfConfig,
    seed: u64,
    t: usize,
) -> Result<DecisionTree> {
    let n = train.n_rows();
    let mut rng = SplitMix64::new(mix(seed, t as u64));
    let mut sample: Vec<usize> = (0..n).map(|_| rng.below(n)).collect();
    let mut builder = Builder {
        data: train,
        labels,
        max_depth: cfg.resolved_max_depth(),
        max_features: cfg.resolved_max_features(train.n_features()),
        min_samples_leaf: cfg.min_samples_leaf,
        rng,
        nodes: Vec::new(),
        scratch: Vec::new(),
    };
    builder.build(&mut sample, 0);
    DecisionTree::from_nodes(builder.nodes)
}

struct Builder<'a> {
    data: &'a Dataset,
    labels: &'a [u8],
    max_depth: usize,
    max_features: usize,
    min_samples_leaf: usize,
    rng: SplitMix64,
    nodes: Vec<Node>,
    scratch: Vec<(f64, u8)>,
}

struct BestSplit {
    decrease: f64,
    feature: usize,
    threshold: f64,
}

impl Builder<'_> {
    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        let m = rows.len();
        let n1 = rows.iter().filter(|&&r| self.labels[r] == 1).count();
        let n0 = m - n1;
        let id = self.nodes.len();
        let majority = if n1 > n0 { 1.0 } else { 0.0 };
        self.nodes.push(Node::leaf(majority, m as f64));
        if n0 == 0 || n1 == 0 || depth >= self.max_depth || m < 2 * self.min_samples_leaf {
            return id;
        }
        let Some(best) = self.best_split(rows, n0, n1) else {
            return id;
        };
        // Partition in place: left part first.
        let mut k = 0;
        for i in 0..m {
            if self.data.row(rows[i])[best.feature] < best.threshold {
                rows.swap(i, k);
                k += 1;
            }
        }
        debug_assert!(best.decrease > 0.0);
        let (left_rows, right_rows) = rows.split_at_mut(k);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[id] = Node::split(best.feature, best.threshold, left, right, m as f64);
        id
    }

    fn best_split(&mut self, rows: &[usize], n0: usize, n1: usize) -> Option<BestSplit> {
        let d = self.data.n_features();
        let mut features = self.rng.sample_without_replacement(d, self.max_features);
        features.sort_unstable();
        let m = rows.len();
        let parent = gini(n0, n1);
        let mut best: Option<BestSplit> = None;
        for &j in &features {
            self.scratch.clear();
            self.scratch
                .extend(rows.iter().map(|&r| (self.data.row(r)[j], self.labels[r])));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            let (mut l0, mut l1) = (0usize, 0usize);
            for i in 1..m {
                if self.scratch[i - 1].1 == 1 {
                    l1 += 1;
                } else {
                    l0 += 1;
                }
                let (lo, hi) = (self.scratch[i - 1].0, self.scratch[i].0);
                if hi <= lo || i < self.min_samples_leaf || m - i < self.min_samples_leaf {
                    continue;
                }
                let (r0, r1) = (n0 - l0, n1 - l1);
                let weighted = (i as f64 * gini(l0, l1) + (m - i) as f64 * gini(r0, r1)) / m as f64;
                let decrease = parent - weighted;
                if decrease > 1e-12 && best.as_ref().is_none_or(|b| decrease > b.decrease) {
                    let mid = lo + (hi - lo) / 2.0;
                    let threshold = if mid > lo && mid <= hi { mid } else { hi };
                    best = Some(BestSplit {
                        decrease,
                        feature: j,
                        threshold,
                    });
                }
            }
        }
        best
    }
}

/// Class and class-1 vote fraction. An exact 0.5 tie goes to class 0.
pub fn predict_rf(ens: &Ensemble, x: &[f64]) -> Result<(u8, f64)> {
    if ens.kind != EnsembleKind::RandomForest {
        return Err(Error::Contract(format!(
            "expected a random forest, got {}",
            ens.kind.as_str()
        )));
    }
    let fraction = crate::tree::predict_ensemble_margin(ens, x)?;
    Ok((u8::from(fraction > 0.5), fraction))
}
