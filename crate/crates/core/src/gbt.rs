//! Gradient-boosted trees on logistic loss with second-order statistics and
//! L1/L2-regularized leaf weights.
//!
//! Split search is exact and greedy: every feature is pre-sorted once, and a
//! whole tree level is scanned in a single pass per feature, so each level
//! costs O(n·d) regardless of how many nodes it holds.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::tree::{DecisionTree, Ensemble, EnsembleKind, Node, NodeKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtConfig {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    /// L2 penalty on leaf weights.
    pub lambda: f64,
    /// L1 penalty on leaf weights.
    pub alpha: f64,
    /// Minimum gain for a split to be kept.
    pub gamma: f64,
    /// Minimum hessian sum in each child.
    pub min_child_weight: f64,
    /// Initial probability; the starting margin is its logit.
    pub base_score: f64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 6,
            lambda: 1.0,
            alpha: 0.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            base_score: 0.5,
        }
    }
}

impl GbtConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_rounds == 0 {
            return bad("gbt n_rounds must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!(
                "gbt learning_rate must be in (0, 1], got {}",
                self.learning_rate
            ));
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("min_child_weight", self.min_child_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("gbt {name} must be a non-negative number, got {v}"));
            }
        }
        if !(self.base_score > 0.0 && self.base_score < 1.0) {
            return bad(format!(
                "gbt base_score must be in (0, 1), got {}",
                self.base_score
            ));
        }
        Ok(())
    }
}

/// A trained booster together with its per-round training loss.
#[derive(Debug, Clone)]
pub struct GbtTraining {
    pub ensemble: Ensemble,
    /// Total logistic loss on the training set: entry 0 before any tree,
    /// entry r after round r.
    pub round_losses: Vec<f64>,
}

pub fn sigmoid(margin: f64) -> f64 {
    if margin >= 0.0 {
        1.0 / (1.0 + (-margin).exp())
    } else {
        let e = margin.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// `ln(1 + e^m) - y·m`, computed without overflow.
pub fn logistic_loss(margin: f64, label: u8) -> f64 {
    let softplus = margin.max(0.0) + (-margin.abs()).exp().ln_1p();
    softplus - f64::from(label) * margin
}

fn hessian(margin: f64) -> f64 {
    // p(1-p) written as e/(1+e)^2 with e = exp(-|m|), which stays positive
    // long after p itself rounds to 1.
    let e = (-margin.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

pub fn soft_threshold(g: f64, alpha: f64) -> f64 {
    if g > alpha {
        g - alpha
    } else if g < -alpha {
        g + alpha
    } else {
        0.0
    }
}

/// Regularized leaf weight before shrinkage: `-soft_threshold(G, α) / (H + λ)`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64, alpha: f64) -> f64 {
    -soft_threshold(g, alpha) / (h + lambda)
}

/// Loss reduction of splitting a node with totals (G, H) into (G_L, H_L) and the rest.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

pub fn train_gbt(train: &Dataset, cfg: &GbtConfig, seed: u64) -> Result<GbtTraining> {
    cfg.validate()?;
    let labels = train.require_labels()?;
    let n = train.n_rows();
    if n < 2 {
        return Err(Error::Data(format!(
            "gbt needs at least 2 training records, got {n}"
        )));
    }
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::Data(
            "gbt training data must contain both classes".into(),
        ));
    }
    // Boosting is deterministic; the seed is only recorded alongside the model.
    let _ = seed;

    let sorted = presort(train);
    let base = logit(cfg.base_score);
    let mut margins = vec![base; n];
    let total_loss = |m: &[f64]| -> f64 {
        m.iter()
            .zip(labels)
            .map(|(&m, &y)| logistic_loss(m, y))
            .sum()
    };
    let mut round_losses = vec![total_loss(&margins)];
    let mut trees = Vec::with_capacity(cfg.n_rounds);
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    for _ in 0..cfg.n_rounds {
        for i in 0..n {
            grad[i] = sigmoid(margins[i]) - f64::from(labels[i]);
            hess[i] = hessian(margins[i]);
        }
        let tree = grow_tree(train, &sorted, &grad, &hess, cfg)?;
        for (i, m) in margins.iter_mut().enumerate() {
            *m += tree.eval(train.row(i));
        }
        round_losses.push(total_loss(&margins));
        trees.push(tree);
    }
    let ensemble = Ensemble::new(EnsembleKind::Gbt, trees, base)?;
    Ok(GbtTraining {
        ensemble,
        round_losses,
    })
}

/// Row indices sorted by each feature's value (ties by row index).
fn presort(ds: &Dataset) -> Vec<Vec<u32>> {
    (0..ds.n_features())
        .map(|j| {
            let mut idx: Vec<u32> = (0..ds.n_rows() as u32).collect();
            idx.sort_by(|&a, &b| {
                ds.row(a as usize)[j]
                    .total_cmp(&ds.row(b as usize)[j])
                    .then(a.cmp(&b))
            });
            idx
        })
        .collect()
}

const INACTIVE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    gl: f64,
    hl: f64,
}

struct Frontier {
    arena: usize,
    g: f64,
    h: f64,
    best: Option<Candidate>,
}

#[derive(Clone, Copy)]
struct ScanState {
    gl: f64,
    hl: f64,
    last: f64,
    seen: bool,
}

/// Grow one regression tree on gradient statistics, level by level.
///
/// Leaf values already include the learning-rate shrinkage.
pub fn grow_tree_from_stats(
    ds: &Dataset,
    grad: &[f64],
    hess: &[f64],
    cfg: &GbtConfig,
) -> Result<DecisionTree> {
    cfg.validate()?;
    grow_tree(ds, &presort(ds), grad, hess, cfg)
}

fn grow_tree(
    ds: &Dataset,
    sorted: &[Vec<u32>],
    grad: &[f64],
    hess: &[f64],
    cfg: &GbtConfig,
) -> Result<DecisionTree> {
    let n = ds.n_rows();
    let mut nodes: Vec<Node> = vec![Node::leaf(0.0, 1.0)];
    // Slot of each row's node within the current level, or INACTIVE once settled.
    let mut slot_of = vec![0u32; n];
    let (g0, h0) = (grad.iter().sum(), hess.iter().sum());
    let mut level = vec![Frontier {
        arena: 0,
        g: g0,
        h: h0,
        best: None,
    }];
    let mut depth = 0;
    let mut scan = Vec::new();
    while !level.is_empty() {
        if depth < cfg.max_depth {
            for (j, order) in sorted.iter().enumerate() {
                scan.clear();
                scan.resize(
                    level.len(),
                    ScanState {
                        gl: 0.0,
                        hl: 0.0,
                        last: 0.0,
                        seen: false,
                    },
                );
                for &r in order {
                    let r = r as usize;
                    let slot = slot_of[r];
                    if slot == INACTIVE {
                        continue;
                    }
                    let s = &mut scan[slot as usize];
                    let v = ds.row(r)[j];
                    if s.seen && v > s.last {
                        let node = &mut level[slot as usize];
                        let (gl, hl) = (s.gl, s.hl);
                        let (gr, hr) = (node.g - gl, node.h - hl);
                        if hl >= cfg.min_child_weight && hr >= cfg.min_child_weight {
                            let gain = split_gain(gl, hl, gr, hr, cfg.lambda, cfg.gamma);
                            // Strict comparison keeps the lowest feature, then the lowest threshold.
                            if gain > 0.0 && node.best.is_none_or(|b| gain > b.gain) {
                                node.best = Some(Candidate {
                                    gain,
                                    feature: j,
                                    threshold: midpoint(s.last, v),
                                    gl,
                                    hl,
                                });
                            }
                        }
                    }
                    s.gl += grad[r];
                    s.hl += hess[r];
                    s.last = v;
                    s.seen = true;
                }
            }
        }

        let mut next = Vec::new();
        let mut child_slot = vec![(INACTIVE, INACTIVE); level.len()];
        for (slot, node) in level.iter().enumerate() {
            match node.best {
                Some(c) => {
                    let left = nodes.len();
                    nodes.push(Node::leaf(0.0, 1.0));
                    nodes.push(Node::leaf(0.0, 1.0));
                    nodes[node.arena] = Node::split(c.feature, c.threshold, left, left + 1, node.h);
                    child_slot[slot] = (next.len() as u32, next.len() as u32 + 1);
                    next.push(Frontier {
                        arena: left,
                        g: c.gl,
                        h: c.hl,
                        best: None,
                    });
                    next.push(Frontier {
                        arena: left + 1,
                        g: node.g - c.gl,
                        h: node.h - c.hl,
                        best: None,
                    });
                }
                None => {
                    let w = cfg.learning_rate * leaf_weight(node.g, node.h, cfg.lambda, cfg.alpha);
                    nodes[node.arena] = Node::leaf(w, node.h);
                }
            }
        }
        // Route rows to the new level and recompute exact child sums from rows.
        for nd in next.iter_mut() {
            nd.g = 0.0;
            nd.h = 0.0;
        }
        for r in 0..n {
            let slot = slot_of[r];
            if slot == INACTIVE {
                continue;
            }
            let parent = &level[slot as usize];
            slot_of[r] = match (parent.best, child_slot[slot as usize]) {
                (Some(c), (l, rr)) => {
                    let s = if ds.row(r)[c.feature] < c.threshold {
                        l
                    } else {
                        rr
                    };
                    next[s as usize].g += grad[r];
                    next[s as usize].h += hess[r];
                    s
                }
                (None, _) => INACTIVE,
            };
        }
        level = next;
        depth += 1;
    }
    fix_covers(&mut nodes, 0);
    DecisionTree::from_nodes(nodes)
}

/// Threshold strictly above `lo` and at most `hi`, so `lo` goes left and `hi` right.
fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid > lo && mid <= hi {
        mid
    } else {
        hi
    }
}

/// Make every split's cover exactly the sum of its children's covers.
fn fix_covers(nodes: &mut [Node], i: usize) -> f64 {
    if let NodeKind::Split { left, right, .. } = nodes[i].kind {
        let c = fix_covers(nodes, left) + fix_covers(nodes, right);
        nodes[i].cover = c;
    }
    nodes[i].cover
}

/// Probability of class 1 for a boosted ensemble.
pub fn predict_proba_gbt(ens: &Ensemble, x: &[f64]) -> Result<f64> {
    if ens.kind != EnsembleKind::Gbt {
        return Err(Error::Contract(format!(
            "expected a gbt ensemble, got {}",
            ens.kind.as_str()
        )));
    }
    Ok(sigmoid(crate::tree::predict_ensemble_margin(ens, x)?))
}
