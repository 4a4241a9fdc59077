//! Polynomial-time path-dependent TreeSHAP for a single tree.
//!
//! The recursion walks every root-to-leaf path once, maintaining the
//! proportion of feature subsets ("path weights") that would reach the
//! current node. Features absent from a coalition follow both branches in
//! proportion to child cover / node cover.

use crate::tree::{DecisionTree, NodeKind};

#[derive(Debug, Clone, Copy, Default)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

/// Add `scale ×` the SHAP values of `tree` at `x` into `phi`.
pub(crate) fn tree_shap_into(tree: &DecisionTree, x: &[f64], scale: f64, phi: &mut [f64]) {
    let depth = tree.max_depth_reached();
    // Each recursion level owns a copy of the path, at most depth + 2 long.
    let mut buffer = vec![PathElement::default(); (depth + 2) * (depth + 3) / 2];
    let mut walker = Walker {
        tree,
        x,
        scale,
        phi,
    };
    walker.recurse(0, &mut buffer, 0, 0, 1.0, 1.0, None);
}

struct Walker<'a> {
    tree: &'a DecisionTree,
    x: &'a [f64],
    scale: f64,
    phi: &'a mut [f64],
}

impl Walker<'_> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &mut self,
        node: usize,
        buffer: &mut [PathElement],
        parent_start: usize,
        mut unique_depth: usize,
        zero_fraction: f64,
        one_fraction: f64,
        feature: Option<usize>,
    ) {
        // This level's path lives just past the parent's; copy the parent's in.
        let start = parent_start + unique_depth + 1;
        buffer.copy_within(parent_start..parent_start + unique_depth, start);
        let path = &mut buffer[start..];
        extend(path, unique_depth, zero_fraction, one_fraction, feature);

        let n = &self.tree.nodes()[node];
        match n.kind {
            NodeKind::Leaf { value } => {
                for i in 1..=unique_depth {
                    let w = unwound_sum(path, unique_depth, i);
                    let el = path[i];
                    let f = el.feature.expect("only the root sentinel has no feature");
                    self.phi[f] += self.scale * w * (el.one_fraction - el.zero_fraction) * value;
                }
            }
            NodeKind::Split {
                feature: split_feature,
                threshold,
                left,
                right,
            } => {
                let (hot, cold) = if self.x[split_feature] < threshold {
                    (left, right)
                } else {
                    (right, left)
                };
                let cover = n.cover;
                let hot_zero = self.tree.nodes()[hot].cover / cover;
                let cold_zero = self.tree.nodes()[cold].cover / cover;
                let (mut incoming_zero, mut incoming_one) = (1.0, 1.0);

                // A feature seen earlier on the path is merged rather than duplicated.
                if let Some(k) =
                    (1..=unique_depth).find(|&k| path[k].feature == Some(split_feature))
                {
                    incoming_zero = path[k].zero_fraction;
                    incoming_one = path[k].one_fraction;
                    unwind(path, unique_depth, k);
                    unique_depth -= 1;
                }

                self.recurse(
                    hot,
                    buffer,
                    start,
                    unique_depth + 1,
                    hot_zero * incoming_zero,
                    incoming_one,
                    Some(split_feature),
                );
                self.recurse(
                    cold,
                    buffer,
                    start,
                    unique_depth + 1,
                    cold_zero * incoming_zero,
                    0.0,
                    Some(split_feature),
                );
            }
        }
    }
}

fn extend(
    path: &mut [PathElement],
    unique_depth: usize,
    zero: f64,
    one: f64,
    feature: Option<usize>,
) {
    path[unique_depth] = PathElement {
        feature,
        zero_fraction: zero,
        one_fraction: one,
        weight: if unique_depth == 0 { 1.0 } else { 0.0 },
    };
    let d = unique_depth as f64;
    for i in (0..unique_depth).rev() {
        let fi = i as f64;
        path[i + 1].weight += one * path[i].weight * (fi + 1.0) / (d + 1.0);
        path[i].weight = zero * path[i].weight * (d - fi) / (d + 1.0);
    }
}

fn unwind(path: &mut [PathElement], unique_depth: usize, index: usize) {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d = unique_depth as f64;
    let mut next_one_portion = path[unique_depth].weight;
    for i in (0..unique_depth).rev() {
        let fi = i as f64;
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next_one_portion * (d + 1.0) / ((fi + 1.0) * one);
            next_one_portion = tmp - path[i].weight * zero * (d - fi) / (d + 1.0);
        } else {
            path[i].weight = path[i].weight * (d + 1.0) / (zero * (d - fi));
        }
    }
    for i in index..unique_depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

/// Total path weight if element `index` were removed, without modifying the path.
fn unwound_sum(path: &[PathElement], unique_depth: usize, index: usize) -> f64 {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d = unique_depth as f64;
    let mut next_one_portion = path[unique_depth].weight;
    let mut total = 0.0;
    for i in (0..unique_depth).rev() {
        let fi = i as f64;
        if one != 0.0 {
            let tmp = next_one_portion * (d + 1.0) / ((fi + 1.0) * one);
            total += tmp;
            next_one_portion = path[i].weight - tmp * zero * (d - fi) / (d + 1.0);
        } else {
            total += path[i].weight / zero * (d + 1.0) / (d - fi);
        }
    }
    total
}
