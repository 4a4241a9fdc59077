use serde::{Deserialize, Serialize};

use super::{Dataset, PreprocessStep};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "strategy")]
pub enum FeatureSelection {
    /// Remove features with a single distinct value.
    DropConstant,
    /// For every pair with |Pearson r| >= threshold, remove the later feature.
    CorrelationPrune { threshold: f64 },
}

pub fn select_features(ds: &Dataset, strategy: FeatureSelection) -> Result<Dataset> {
    if ds.is_empty() {
        return Err(Error::Data(
            "cannot select features of an empty dataset".into(),
        ));
    }
    let d = ds.n_features();
    let columns: Vec<Vec<f64>> = (0..d).map(|j| ds.column(j)).collect();
    let removed: Vec<usize> = match strategy {
        FeatureSelection::DropConstant => (0..d)
            .filter(|&j| columns[j].iter().all(|&v| v == columns[j][0]))
            .collect(),
        FeatureSelection::CorrelationPrune { threshold } => {
            if !(threshold > 0.0 && threshold <= 1.0) {
                return Err(Error::Config(format!(
                    "correlation threshold must be in (0, 1], got {threshold}"
                )));
            }
            (0..d)
                .filter(|&j| {
                    (0..j).any(|i| {
                        pearson(&columns[i], &columns[j]).is_some_and(|r| r.abs() >= threshold)
                    })
                })
                .collect()
        }
    };
    if removed.len() == d {
        return Err(Error::Data(format!(
            "feature selection ({strategy:?}) removed every feature"
        )));
    }
    let keep: Vec<usize> = (0..d).filter(|j| !removed.contains(j)).collect();
    let removed_names = removed
        .iter()
        .map(|&j| ds.schema().feature_names[j].clone())
        .collect();
    Ok(ds.project(&keep).with_step(PreprocessStep::SelectFeatures {
        strategy,
        removed: removed_names,
    }))
}

/// Pearson correlation; `None` when either column has zero variance.
pub(crate) fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa.sqrt() * sbb.sqrt()))
}
