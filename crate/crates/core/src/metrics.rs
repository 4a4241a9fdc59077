//! Confusion-matrix metrics and the hold-out / k-fold evaluation protocols.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{apply_normalizer, fit_normalizer, Dataset, NormalizeMethod};
use crate::error::{Error, Result};
use crate::model::{train_model, ModelConfig};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn from_labels(y_true: &[u8], y_pred: &[u8]) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::Contract(format!(
                "{} true labels vs {} predictions",
                y_true.len(),
                y_pred.len()
            )));
        }
        if y_true.is_empty() {
            return Err(Error::Contract(
                "cannot compute metrics over zero records".into(),
            ));
        }
        let mut c = ConfusionCounts::default();
        for (&t, &p) in y_true.iter().zip(y_pred) {
            match (t, p) {
                (1, 1) => c.tp += 1,
                (0, 1) => c.fp += 1,
                (1, 0) => c.fn_ += 1,
                (0, 0) => c.tn += 1,
                _ => return Err(Error::Contract(format!("non-binary label pair ({t}, {p})"))),
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

/// A metric value, or the reason it is undefined (a zero denominator).
#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Defined(f64),
    Undefined(&'static str),
}

impl Metric {
    pub fn value(&self) -> Option<f64> {
        match self {
            Metric::Defined(v) => Some(*v),
            Metric::Undefined(_) => None,
        }
    }

    fn ratio(num: u64, den: u64, reason: &'static str) -> Metric {
        if den == 0 {
            Metric::Undefined(reason)
        } else {
            Metric::Defined(num as f64 / den as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub counts: ConfusionCounts,
    pub accuracy: Metric,
    pub precision: Metric,
    pub recall: Metric,
    pub f1: Metric,
}

impl Metrics {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let ConfusionCounts { tp, fp, fn_, tn } = counts;
        let accuracy = Metric::ratio(tp + tn, tp + fn_ + tn + fp, "no records");
        let precision = Metric::ratio(tp, tp + fp, "no positive predictions (TP + FP = 0)");
        let recall = Metric::ratio(tp, tp + fn_, "no positive records (TP + FN = 0)");
        let f1 = match (precision.value(), recall.value()) {
            (Some(p), Some(r)) if p + r > 0.0 => Metric::Defined(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Metric::Undefined("precision and recall are both 0"),
            _ => Metric::Undefined("precision or recall undefined"),
        };
        Self {
            counts,
            accuracy,
            precision,
            recall,
            f1,
        }
    }

    pub fn get(&self, name: MetricName) -> &Metric {
        match name {
            MetricName::Accuracy => &self.accuracy,
            MetricName::Precision => &self.precision,
            MetricName::Recall => &self.recall,
            MetricName::F1 => &self.f1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricName {
    Accuracy,
    Precision,
    Recall,
    F1,
}

impl MetricName {
    pub const ALL: [MetricName; 4] = [
        MetricName::Accuracy,
        MetricName::Precision,
        MetricName::Recall,
        MetricName::F1,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricName::Accuracy => "accuracy",
            MetricName::Precision => "precision",
            MetricName::Recall => "recall",
            MetricName::F1 => "f1",
        }
    }
}

pub fn compute_metrics(y_true: &[u8], y_pred: &[u8]) -> Result<Metrics> {
    Ok(Metrics::from_counts(ConfusionCounts::from_labels(
        y_true, y_pred,
    )?))
}

/// Metrics for one evaluated split, labelled with how they were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub metrics: Metrics,
    pub threshold: f64,
    pub model: String,
    pub fold: Option<usize>,
}

/// Unweighted mean and population standard deviation of a metric across
/// folds; `None` when any fold left it undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub mean: Vec<(MetricName, Option<f64>)>,
    pub stddev: Vec<(MetricName, Option<f64>)>,
}

pub fn summarize(reports: &[MetricsReport]) -> Summary {
    let mut mean = Vec::new();
    let mut stddev = Vec::new();
    for name in MetricName::ALL {
        let values: Option<Vec<f64>> = reports
            .iter()
            .map(|r| r.metrics.get(name).value())
            .collect();
        match values {
            Some(v) if !v.is_empty() => {
                let n = v.len() as f64;
                let m = v.iter().sum::<f64>() / n;
                let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
                mean.push((name, Some(m)));
                stddev.push((name, Some(var.sqrt())));
            }
            _ => {
                mean.push((name, None));
                stddev.push((name, None));
            }
        }
    }
    Summary { mean, stddev }
}

/// Fold index (0..k) of every record.
///
/// Stratified assignment shuffles each class separately and deals its
/// records round-robin, so every fold receives ⌊n_c/k⌋ or ⌈n_c/k⌉ of class c.
pub fn assign_folds(
    labels: Option<&[u8]>,
    n: usize,
    k: usize,
    seed: u64,
    stratified: bool,
) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::Data(format!("{n} records cannot fill {k} folds")));
    }
    let mut rng = SplitMix64::new(seed);
    let mut fold = vec![0usize; n];
    let groups: Vec<Vec<usize>> = if stratified {
        let labels = labels.ok_or_else(|| Error::Data("stratified folds need labels".into()))?;
        [0u8, 1]
            .iter()
            .map(|&c| {
                let idx: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
                if idx.len() < k {
                    Err(Error::Data(format!(
                        "class {c} has {} records, fewer than the {k} stratified folds",
                        idx.len()
                    )))
                } else {
                    Ok(idx)
                }
            })
            .collect::<Result<_>>()?
    } else {
        vec![(0..n).collect()]
    };
    // Continue the round-robin across classes so fold sizes stay balanced overall.
    let mut next = 0;
    for mut idx in groups {
        rng.shuffle(&mut idx);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvOptions {
    pub k: usize,
    pub stratified: bool,
    pub normalization: NormalizeMethod,
    /// Decision threshold; `None` uses the model's default.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub folds: Vec<MetricsReport>,
    pub fold_of: Vec<usize>,
    pub summary: Summary,
}

/// k-fold cross-validation. Each fold refits the normalizer on its training
/// part. Folds run concurrently; results are ordered by fold index.
pub fn kfold_cv(ds: &Dataset, model: &ModelConfig, opts: CvOptions, seed: u64) -> Result<CvResult> {
    let labels = ds.require_labels()?;
    let fold_of = assign_folds(Some(labels), ds.n_rows(), opts.k, seed, opts.stratified)?;
    let folds = (0..opts.k)
        .into_par_iter()
        .map(|f| {
            let train_idx: Vec<usize> = (0..ds.n_rows()).filter(|&i| fold_of[i] != f).collect();
            let test_idx: Vec<usize> = (0..ds.n_rows()).filter(|&i| fold_of[i] == f).collect();
            let mut report = holdout_evaluate(
                &ds.subset(&train_idx),
                &ds.subset(&test_idx),
                model,
                opts.normalization,
                opts.threshold,
                seed,
            )?;
            report.fold = Some(f);
            Ok(report)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&folds);
    Ok(CvResult {
        folds,
        fold_of,
        summary,
    })
}

/// Fit normalizer and model on `train`, evaluate on `test`.
pub fn holdout_evaluate(
    train: &Dataset,
    test: &Dataset,
    model: &ModelConfig,
    normalization: NormalizeMethod,
    threshold: Option<f64>,
    seed: u64,
) -> Result<MetricsReport> {
    let params = fit_normalizer(train, normalization)?;
    let train = apply_normalizer(train, &params)?;
    let test = apply_normalizer(test, &params)?;
    let trained = train_model(&train, model, seed)?;
    let scores = trained.scores(&test)?;
    let threshold = threshold.unwrap_or_else(|| model.default_threshold());
    let predicted = model.classify(&scores, threshold);
    Ok(MetricsReport {
        metrics: compute_metrics(test.require_labels()?, &predicted)?,
        threshold,
        model: model.name().to_string(),
        fold: None,
    })
}
