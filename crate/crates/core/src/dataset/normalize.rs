use serde::{Deserialize, Serialize};

use super::{Dataset, PreprocessStep};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizeMethod {
    #[default]
    Minmax,
    Zscore,
}

/// Per-feature scaling statistics, fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum NormalizerParams {
    Minmax {
        #[serde(with = "crate::real::vec")]
        min: Vec<f64>,
        #[serde(with = "crate::real::vec")]
        max: Vec<f64>,
    },
    Zscore {
        #[serde(with = "crate::real::vec")]
        mean: Vec<f64>,
        /// Population standard deviation.
        #[serde(with = "crate::real::vec")]
        stddev: Vec<f64>,
    },
}

impl NormalizerParams {
    pub fn method(&self) -> NormalizeMethod {
        match self {
            NormalizerParams::Minmax { .. } => NormalizeMethod::Minmax,
            NormalizerParams::Zscore { .. } => NormalizeMethod::Zscore,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            NormalizerParams::Minmax { min, .. } => min.len(),
            NormalizerParams::Zscore { mean, .. } => mean.len(),
        }
    }

    /// Scale a single value of feature `j`. Out-of-range values are not clamped.
    #[inline]
    pub fn apply_value(&self, j: usize, x: f64) -> f64 {
        match self {
            NormalizerParams::Minmax { min, max } => {
                let range = max[j] - min[j];
                if range > 0.0 {
                    (x - min[j]) / range
                } else {
                    0.0
                }
            }
            NormalizerParams::Zscore { mean, stddev } => {
                if stddev[j] > 0.0 {
                    (x - mean[j]) / stddev[j]
                } else {
                    0.0
                }
            }
        }
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        self.check_width(row.len())?;
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &x)| self.apply_value(j, x))
            .collect())
    }

    fn check_width(&self, d: usize) -> Result<()> {
        if d != self.n_features() {
            return Err(Error::Schema(format!(
                "normalizer has {} features, data has {d}",
                self.n_features()
            )));
        }
        Ok(())
    }
}

pub fn fit_normalizer(ds: &Dataset, method: NormalizeMethod) -> Result<NormalizerParams> {
    if ds.is_empty() {
        return Err(Error::Data(
            "cannot fit a normalizer on an empty dataset".into(),
        ));
    }
    let d = ds.n_features();
    let n = ds.n_rows() as f64;
    Ok(match method {
        NormalizeMethod::Minmax => {
            let mut min = vec![f64::INFINITY; d];
            let mut max = vec![f64::NEG_INFINITY; d];
            for row in ds.rows() {
                for (j, &x) in row.iter().enumerate() {
                    min[j] = min[j].min(x);
                    max[j] = max[j].max(x);
                }
            }
            NormalizerParams::Minmax { min, max }
        }
        NormalizeMethod::Zscore => {
            let mut mean = vec![0.0; d];
            for row in ds.rows() {
                for (j, &x) in row.iter().enumerate() {
                    mean[j] += x;
                }
            }
            mean.iter_mut().for_each(|m| *m /= n);
            let mut var = vec![0.0; d];
            for row in ds.rows() {
                for (j, &x) in row.iter().enumerate() {
                    var[j] += (x - mean[j]) * (x - mean[j]);
                }
            }
            let stddev = var.into_iter().map(|v| (v / n).sqrt()).collect();
            NormalizerParams::Zscore { mean, stddev }
        }
    })
}

pub fn apply_normalizer(ds: &Dataset, params: &NormalizerParams) -> Result<Dataset> {
    params.check_width(ds.n_features())?;
    let d = ds.n_features();
    let values = ds
        .values()
        .iter()
        .enumerate()
        .map(|(k, &x)| params.apply_value(k % d, x))
        .collect();
    Ok(ds
        .clone()
        .with_values(values)
        .with_step(PreprocessStep::Normalize {
            params: params.clone(),
        }))
}

/// Inverse of min-max scaling for feature `j`; z-score is inverted likewise.
pub fn denormalize_value(params: &NormalizerParams, j: usize, v: f64) -> f64 {
    match params {
        NormalizerParams::Minmax { min, max } => min[j] + v * (max[j] - min[j]),
        NormalizerParams::Zscore { mean, stddev } => mean[j] + v * stddev[j],
    }
}
