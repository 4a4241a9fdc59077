//! Binary decision trees shared by every learner and by the SHAP engine.
//!
//! Nodes live in a flat arena with the root at index 0 and children always
//! stored after their parent. Each node carries a `cover`: the training
//! weight that reached it (sample count for the forests, hessian sum for
//! boosting).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeKind {
    /// `x[feature] < threshold` goes left, otherwise right.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub cover: f64,
}

impl Node {
    pub fn leaf(value: f64, cover: f64) -> Self {
        Node {
            kind: NodeKind::Leaf { value },
            cover,
        }
    }

    pub fn split(feature: usize, threshold: f64, left: usize, right: usize, cover: f64) -> Self {
        Node {
            kind: NodeKind::Split {
                feature,
                threshold,
                left,
                right,
            },
            cover,
        }
    }
}

const COVER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    max_depth_reached: usize,
}

impl DecisionTree {
    /// Validate an arena of nodes and wrap it as a tree.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Contract("a tree needs at least one node".into()));
        }
        let mut depth = vec![usize::MAX; nodes.len()];
        depth[0] = 0;
        let mut max_depth = 0;
        for (i, node) in nodes.iter().enumerate() {
            if depth[i] == usize::MAX {
                return Err(Error::Contract(format!(
                    "node {i} is unreachable from the root"
                )));
            }
            if node.cover.is_nan() || node.cover <= 0.0 || node.cover.is_infinite() {
                return Err(Error::Contract(format!(
                    "node {i} has non-positive cover {}",
                    node.cover
                )));
            }
            max_depth = max_depth.max(depth[i]);
            match node.kind {
                NodeKind::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(Error::Contract(format!("leaf {i} has non-finite value")));
                    }
                }
                NodeKind::Split {
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if threshold.is_nan() {
                        return Err(Error::Contract(format!("split {i} has a NaN threshold")));
                    }
                    for child in [left, right] {
                        if child <= i || child >= nodes.len() || depth[child] != usize::MAX {
                            return Err(Error::Contract(format!(
                                "split {i} has invalid child {child}"
                            )));
                        }
                        depth[child] = depth[i] + 1;
                    }
                    let sum = nodes[left].cover + nodes[right].cover;
                    if (sum - node.cover).abs() > COVER_TOLERANCE * node.cover.abs().max(sum.abs())
                    {
                        return Err(Error::Contract(format!(
                            "cover not conserved at node {i}: {} != {} + {}",
                            node.cover, nodes[left].cover, nodes[right].cover
                        )));
                    }
                }
            }
        }
        Ok(Self {
            nodes,
            max_depth_reached: max_depth,
        })
    }

    pub fn single_leaf(value: f64, cover: f64) -> Result<Self> {
        Self::from_nodes(vec![Node::leaf(value, cover)])
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn max_depth_reached(&self) -> usize {
        self.max_depth_reached
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::Leaf { .. }))
            .count()
    }

    /// Largest feature index referenced by any split.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n.kind {
                NodeKind::Split { feature, .. } => Some(feature),
                NodeKind::Leaf { .. } => None,
            })
            .max()
    }

    /// Index of the leaf reached by `x`. Assumes `x` is complete and wide enough.
    #[inline]
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i].kind {
                NodeKind::Leaf { .. } => return i,
                NodeKind::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] < threshold { left } else { right },
            }
        }
    }

    /// Leaf value for `x` without checks; see [`predict_tree`] for the checked form.
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(x)].kind {
            NodeKind::Leaf { value } => value,
            NodeKind::Split { .. } => unreachable!(),
        }
    }

    /// Number of edges from the root to the leaf reached by `x`.
    pub fn path_depth(&self, x: &[f64]) -> usize {
        let mut i = 0;
        let mut depth = 0;
        while let NodeKind::Split {
            feature,
            threshold,
            left,
            right,
        } = self.nodes[i].kind
        {
            i = if x[feature] < threshold { left } else { right };
            depth += 1;
        }
        depth
    }

    /// Cover-weighted mean of the leaf values: the tree's expected output
    /// over its training distribution.
    pub fn expected_value(&self) -> f64 {
        self.expected_from(0)
    }

    fn expected_from(&self, i: usize) -> f64 {
        let node = &self.nodes[i];
        match node.kind {
            NodeKind::Leaf { value } => value,
            NodeKind::Split { left, right, .. } => {
                (self.nodes[left].cover * self.expected_from(left)
                    + self.nodes[right].cover * self.expected_from(right))
                    / node.cover
            }
        }
    }
}

/// Leaf value of `tree` for `x`.
///
/// Descends left when `x[feature] < threshold`; equality goes right.
pub fn predict_tree(tree: &DecisionTree, x: &[f64]) -> Result<f64> {
    let mut i = 0;
    loop {
        match tree.nodes[i].kind {
            NodeKind::Leaf { value } => return Ok(value),
            NodeKind::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let v = *x.get(feature).ok_or_else(|| {
                    Error::Contract(format!(
                        "input has {} features, split needs index {feature}",
                        x.len()
                    ))
                })?;
                if v.is_nan() {
                    return Err(Error::Data(format!(
                        "missing value for feature {feature} at prediction time"
                    )));
                }
                i = if v < threshold { left } else { right };
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    Gbt,
    RandomForest,
    IsolationForest,
}

impl EnsembleKind {
    pub fn aggregation(self) -> Aggregation {
        match self {
            EnsembleKind::Gbt => Aggregation::Sum,
            EnsembleKind::RandomForest => Aggregation::MeanVote,
            EnsembleKind::IsolationForest => Aggregation::MeanPathLength,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleKind::Gbt => "gbt",
            EnsembleKind::RandomForest => "random_forest",
            EnsembleKind::IsolationForest => "isolation_forest",
        }
    }

    /// Name of the quantity that tree outputs add up to.
    pub fn explained_quantity(self) -> &'static str {
        match self {
            EnsembleKind::Gbt => "log_odds_margin",
            EnsembleKind::RandomForest => "class1_vote_fraction",
            EnsembleKind::IsolationForest => "expected_path_length",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    Sum,
    MeanVote,
    MeanPathLength,
}

/// A trained tree ensemble.
///
/// `base_value` is the initial margin for boosting, unused (0) for the random
/// forest, and the subsample size for the isolation forest.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub kind: EnsembleKind,
    pub trees: Vec<DecisionTree>,
    pub base_value: f64,
}

impl Ensemble {
    pub fn new(kind: EnsembleKind, trees: Vec<DecisionTree>, base_value: f64) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::Contract(
                "an ensemble needs at least one tree".into(),
            ));
        }
        Ok(Self {
            kind,
            trees,
            base_value,
        })
    }

    pub fn aggregation(&self) -> Aggregation {
        self.kind.aggregation()
    }

    /// Weight applied to every tree's output when aggregating.
    pub fn tree_weight(&self) -> f64 {
        match self.aggregation() {
            Aggregation::Sum => 1.0,
            Aggregation::MeanVote | Aggregation::MeanPathLength => 1.0 / self.trees.len() as f64,
        }
    }

    /// Constant added after the weighted tree sum.
    pub fn output_offset(&self) -> f64 {
        match self.aggregation() {
            Aggregation::Sum => self.base_value,
            Aggregation::MeanVote | Aggregation::MeanPathLength => 0.0,
        }
    }

    /// The aggregated raw output: margin (gbt), class-1 vote fraction (rf)
    /// or mean path length (iforest). Unchecked; inputs must be complete.
    pub fn raw_output(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.eval(x)).sum();
        self.output_offset() + self.tree_weight() * sum
    }

    pub fn check_input(&self, x: &[f64], n_features: usize) -> Result<()> {
        if x.len() != n_features {
            return Err(Error::Contract(format!(
                "input has {} features, model expects {n_features}",
                x.len()
            )));
        }
        if let Some(j) = x.iter().position(|v| v.is_nan()) {
            return Err(Error::Data(format!(
                "missing value for feature {j} at prediction time"
            )));
        }
        Ok(())
    }

    pub fn max_feature(&self) -> Option<usize> {
        self.trees
            .iter()
            .filter_map(DecisionTree::max_feature)
            .max()
    }
}

/// Margin of a boosted ensemble or vote fraction of a random forest.
pub fn predict_ensemble_margin(ens: &Ensemble, x: &[f64]) -> Result<f64> {
    match ens.kind {
        EnsembleKind::Gbt => {
            let mut margin = ens.base_value;
            for tree in &ens.trees {
                margin += predict_tree(tree, x)?;
            }
            Ok(margin)
        }
        EnsembleKind::RandomForest => {
            let mut votes = 0.0;
            for tree in &ens.trees {
                votes += predict_tree(tree, x)?;
            }
            Ok(votes / ens.trees.len() as f64)
        }
        EnsembleKind::IsolationForest => Err(Error::Contract(
            "isolation forests have no margin; use the anomaly score".into(),
        )),
    }
}
