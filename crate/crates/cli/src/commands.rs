use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde_json::{json, Value};

use flowshap::config::hash_json;
use flowshap::dataset::{generate_synthetic, write_csv, Dataset, SyntheticSpec};
use flowshap::metrics::summarize;
use flowshap::pipeline::{
    crossval_pipeline, evaluate_bundle, explain_bundle, load_for_bundle, load_input,
    predict_bundle, select_all, train_pipeline,
};
use flowshap::report::{metrics_document, preprocess_document, render, Provenance};
use flowshap::shap::{
    export_explanations, mean_abs_shap, rank_rows, read_shap_csv, write_shap_csv, ExportContext,
    PlotKind, ShapExplanation,
};
use flowshap::{load_bundle, save_bundle, Error, ModelBundle, Result, RunConfig};

use crate::Common;

const DEFAULT_OUT: &str = "out";

/// Read the config file (if any), apply flag overrides, then validate.
fn load_config(
    common: &Common,
    extra: impl FnOnce(&mut serde_json::Map<String, Value>),
) -> Result<RunConfig> {
    let mut value = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?
        }
        None => json!({}),
    };
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
    if let Some(seed) = common.seed {
        obj.insert("seed".into(), json!(seed));
    }
    if !obj.contains_key("seed") {
        return Err(Error::Config(
            "a seed is required: pass --seed or set \"seed\" in the config".into(),
        ));
    }
    match &common.model {
        Some(kind) => {
            let current = obj
                .get("model")
                .and_then(|m| m.get("kind"))
                .and_then(Value::as_str);
            if current != Some(kind.as_str()) {
                obj.insert("model".into(), json!({ "kind": kind }));
            }
        }
        None => {
            obj.entry("model").or_insert_with(|| json!({"kind": "gbt"}));
        }
    }
    if let Some(out) = &common.out {
        obj.insert("output_dir".into(), json!(out.to_string_lossy()));
    }
    extra(obj);
    RunConfig::from_value(value)
}

fn output_dir(flag: Option<PathBuf>, configured: Option<&str>) -> Result<PathBuf> {
    let dir = flag
        .or_else(|| configured.map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn write_dataset(path: &Path, ds: &Dataset, prov: &Provenance) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(ds, &mut buf, &prov.comment_lines())?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn provenance(cfg: &RunConfig) -> Provenance {
    Provenance {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    }
}

fn bundle_provenance(bundle: &ModelBundle) -> Provenance {
    Provenance {
        config_hash: bundle.config_hash.clone(),
        seed: bundle.seed,
    }
}

pub fn preprocess(input: &Path, common: &Common) -> Result<()> {
    let cfg = load_config(common, |_| {})?;
    let dir = output_dir(None, cfg.output_dir.as_deref())?;
    let prov = provenance(&cfg);
    let raw = load_input(&cfg, input)?;
    let cleaned = select_all(&raw, &cfg)?;
    write_dataset(&dir.join("cleaned.csv"), &cleaned, &prov)?;
    let doc = preprocess_document(cleaned.preprocessing_log(), cleaned.n_rows(), &prov);
    write_text(&dir.join("preprocess_report.json"), &render(&doc))
}

pub fn train(input: &Path, common: &Common) -> Result<()> {
    let cfg = load_config(common, |_| {})?;
    let dir = output_dir(None, cfg.output_dir.as_deref())?;
    let prov = provenance(&cfg);
    let raw = load_input(&cfg, input)?;
    info!(
        "training {} on {} records, {} features",
        cfg.model.name(),
        raw.n_rows(),
        raw.n_features()
    );
    let out = train_pipeline(&raw, &cfg)?;
    save_bundle(&out.bundle, &dir.join("bundle.json"))?;
    info!("wrote {}", dir.join("bundle.json").display());

    let non_increasing = out
        .round_losses
        .as_ref()
        .map(|l| l.windows(2).all(|w| w[1] <= w[0]));
    let log = json!({
        "model": cfg.model.name(),
        "n_train": out.n_train,
        "n_test": out.test.as_ref().map(Dataset::n_rows),
        "n_trees": out.bundle.ensemble.trees.len(),
        "features": out.bundle.schema.feature_names,
        "round_losses": out.round_losses,
        "loss_non_increasing": non_increasing,
        "config_hash": prov.config_hash,
        "seed": prov.seed,
    });
    write_text(&dir.join("train_log.json"), &render(&log))?;
    if let Some(test) = &out.test {
        write_dataset(&dir.join("test.csv"), test, &prov)?;
    }
    Ok(())
}

pub fn evaluate(
    input: &Path,
    bundle_path: &Path,
    threshold: Option<f64>,
    out: Option<PathBuf>,
) -> Result<()> {
    let bundle = load_bundle(bundle_path)?;
    let dir = output_dir(out, None)?;
    let ds = load_for_bundle(&bundle, input)?;
    let threshold = threshold.unwrap_or_else(|| bundle.config.threshold());
    if !threshold.is_finite() {
        return Err(Error::Config("threshold must be finite".into()));
    }
    let report = evaluate_bundle(&bundle, &ds, threshold)?;
    let summary = summarize(std::slice::from_ref(&report));
    let doc = metrics_document("holdout", &[report], &summary, &bundle_provenance(&bundle));
    write_text(&dir.join("metrics.json"), &render(&doc))
}

pub fn crossval(input: &Path, k: Option<usize>, common: &Common) -> Result<()> {
    let cfg = load_config(common, |obj| {
        if let Some(k) = k {
            let eval = obj.entry("evaluation").or_insert_with(|| json!({}));
            if let Some(e) = eval.as_object_mut() {
                e.insert("k".into(), json!(k));
            }
        }
    })?;
    let dir = output_dir(None, cfg.output_dir.as_deref())?;
    let raw = load_input(&cfg, input)?;
    info!(
        "{}-fold cross-validation of {}",
        cfg.evaluation.k,
        cfg.model.name()
    );
    let result = crossval_pipeline(&raw, &cfg)?;
    let doc = metrics_document("kfold", &result.folds, &result.summary, &provenance(&cfg));
    write_text(&dir.join("crossval.json"), &render(&doc))
}

/// Case-study text: the top-k attributions of every flagged instance.
fn case_study(
    bundle: &ModelBundle,
    ds: &Dataset,
    explanations: &[ShapExplanation],
    scores: &[f64],
    predicted: &[u8],
    top_k: usize,
    prov: &Provenance,
) -> String {
    let names = &bundle.schema.feature_names;
    let kind = bundle.ensemble.kind;
    let flagged: Vec<usize> = (0..ds.n_rows()).filter(|&i| predicted[i] == 1).collect();
    let mut s = String::new();
    for line in prov.comment_lines() {
        s.push_str(&format!("# {line}\n"));
    }
    s.push_str(&format!(
        "model: {} (explained quantity: {})\n",
        bundle.config.model.name(),
        kind.explained_quantity()
    ));
    if kind == flowshap::EnsembleKind::IsolationForest {
        s.push_str("sign: negative phi shortens the isolation path (pushes towards anomalous)\n");
    }
    s.push_str(&format!(
        "flagged: {} of {} instances\n",
        flagged.len(),
        ds.n_rows()
    ));
    let raw_labels = ds.raw_labels();
    for &i in &flagged {
        let e = &explanations[i];
        let label = raw_labels.map(|l| l[i].as_str()).unwrap_or("?");
        s.push_str(&format!(
            "\ninstance {i}: score {}, label {label}, base {}, output {}\n",
            flowshap::real::format(scores[i]),
            flowshap::real::format(e.base_value),
            flowshap::real::format(e.model_output),
        ));
        let mut order: Vec<usize> = (0..names.len()).collect();
        order.sort_by(|&a, &b| e.phi[b].abs().total_cmp(&e.phi[a].abs()).then(a.cmp(&b)));
        for (rank, &j) in order.iter().take(top_k).enumerate() {
            s.push_str(&format!(
                "  {}. {} = {}  phi {:+}\n",
                rank + 1,
                names[j],
                flowshap::real::format(ds.row(i)[j]),
                e.phi[j]
            ));
        }
    }
    s
}

fn write_plot(
    path: &Path,
    explanations: &[ShapExplanation],
    ds: &Dataset,
    kind: &PlotKind,
    ctx: &ExportContext,
) -> Result<()> {
    let mut buf = Vec::new();
    export_explanations(explanations, ds, kind, ctx, &mut buf)?;
    fs::write(path, buf).map_err(|e| Error::io(path, e))?;
    info!("wrote {}", path.display());
    Ok(())
}

pub fn explain(
    input: &Path,
    bundle_path: &Path,
    top_k: usize,
    feature: Option<String>,
    instance: Option<usize>,
    out: Option<PathBuf>,
) -> Result<()> {
    if top_k == 0 {
        return Err(Error::Config("--top-k must be at least 1".into()));
    }
    let bundle = load_bundle(bundle_path)?;
    if let Some(f) = &feature {
        if bundle.schema.index_of(f).is_none() {
            return Err(Error::Config(format!(
                "--feature '{f}' is not a model feature"
            )));
        }
    }
    let dir = output_dir(out, None)?;
    let prov = bundle_provenance(&bundle);
    let ds = load_for_bundle(&bundle, input)?;
    if let Some(i) = instance {
        if i >= ds.n_rows() {
            return Err(Error::Config(format!(
                "--instance {i} is out of range for {} rows",
                ds.n_rows()
            )));
        }
    }
    let (scores, predicted) = predict_bundle(&bundle, &ds, bundle.config.threshold())?;
    let explanations = explain_bundle(&bundle, &ds)?;

    let mut buf = Vec::new();
    write_shap_csv(
        &explanations,
        &bundle.schema,
        &prov.comment_lines(),
        &mut buf,
    )?;
    let shap_path = dir.join("shap.csv");
    fs::write(&shap_path, buf).map_err(|e| Error::io(&shap_path, e))?;
    info!("wrote {}", shap_path.display());

    let report = case_study(
        &bundle,
        &ds,
        &explanations,
        &scores,
        &predicted,
        top_k,
        &prov,
    );
    write_text(&dir.join("case_study.txt"), &report)?;

    let ctx = ExportContext {
        model: bundle.config.model.name().to_string(),
        explained_quantity: bundle.ensemble.kind.explained_quantity().to_string(),
        dataset: input
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        config_hash: prov.config_hash.clone(),
        seed: prov.seed,
    };
    write_plot(
        &dir.join("summary.jsonl"),
        &explanations,
        &ds,
        &PlotKind::Summary,
        &ctx,
    )?;
    // Highest score, lowest index on ties.
    let position = instance.unwrap_or_else(|| {
        (0..scores.len()).fold(0, |best, i| if scores[i] > scores[best] { i } else { best })
    });
    write_plot(
        &dir.join("force.jsonl"),
        &explanations,
        &ds,
        &PlotKind::Force { position },
        &ctx,
    )?;
    let feature = match feature {
        Some(f) => f,
        None => mean_abs_shap(&explanations, &bundle.schema)?.entries[0]
            .0
            .clone(),
    };
    write_plot(
        &dir.join("dependence.jsonl"),
        &explanations,
        &ds,
        &PlotKind::Dependence { feature },
        &ctx,
    )
}

pub fn rank(shap_csv: &Path, out: Option<PathBuf>) -> Result<()> {
    let text = fs::read_to_string(shap_csv).map_err(|e| Error::io(shap_csv, e))?;
    let mut config_hash = None;
    let mut seed = None;
    for line in text.lines().filter_map(|l| l.strip_prefix('#')) {
        let line = line.trim();
        if let Some(h) = line.strip_prefix("config_hash=") {
            config_hash = Some(h.to_string());
        } else if let Some(s) = line.strip_prefix("seed=") {
            seed = s.parse::<u64>().ok();
        }
    }
    let (names, explanations) = read_shap_csv(text.as_bytes())?;
    let dir = output_dir(out, None)?;
    let rows: Vec<&[f64]> = explanations.iter().map(|e| e.phi.as_slice()).collect();
    let ranking: Vec<Value> = rank_rows(&rows, &names)
        .entries
        .into_iter()
        .enumerate()
        .map(|(i, (feature, mean))| json!({"rank": i + 1, "feature": feature, "mean_abs_shap": mean}))
        .collect();
    let doc = json!({
        "ranking": ranking,
        "instances": explanations.len(),
        "config_hash": config_hash,
        "seed": seed,
    });
    write_text(&dir.join("ranking.json"), &render(&doc))
}

pub fn synth(
    n: usize,
    d: usize,
    contamination: f64,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    let spec = SyntheticSpec {
        n,
        d,
        contamination,
        seed,
    };
    let ds = generate_synthetic(spec)?;
    let dir = output_dir(out, None)?;
    let prov = Provenance {
        config_hash: hash_json(&spec),
        seed,
    };
    write_dataset(&dir.join("synthetic.csv"), &ds, &prov)
}
