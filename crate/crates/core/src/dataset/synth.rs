//! Planted-anomaly flow data for desk-scale experiments.
//!
//! Inliers: every feature i.i.d. N(0, 1).
//! Anomalies: every feature N(0, ANOMALY_SPREAD²), except the driver feature
//! (index 0), which is N(DRIVER_DISPLACEMENT, ANOMALY_SPREAD²).

use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureSchema};
use crate::error::{Error, Result};
use crate::rng::{self, SplitMix64};

pub const BENIGN_LABEL: &str = "BENIGN";
pub const ANOMALY_LABEL: &str = "ANOMALY";
pub const LABEL_COLUMN: &str = "label";
/// Mean shift of the driver feature for anomalies, in inlier standard deviations.
pub const DRIVER_DISPLACEMENT: f64 = 8.0;
/// Standard deviation of every anomaly feature.
pub const ANOMALY_SPREAD: f64 = 2.0;
/// Index of the feature that alone separates anomalies.
pub const DRIVER_FEATURE: usize = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    pub contamination: f64,
    pub seed: u64,
}

pub fn feature_name(j: usize) -> String {
    format!("f{j:02}")
}

pub fn synthetic_schema(d: usize) -> Result<FeatureSchema> {
    FeatureSchema::new(
        (0..d).map(feature_name).collect(),
        LABEL_COLUMN,
        ANOMALY_LABEL,
    )
}

/// `round(n * contamination)` anomalies at seeded random positions among `n` flows.
pub fn generate_synthetic(spec: SyntheticSpec) -> Result<Dataset> {
    let SyntheticSpec {
        n,
        d,
        contamination,
        seed,
    } = spec;
    if !(contamination > 0.0 && contamination < 0.5) {
        return Err(Error::Config(format!(
            "contamination must be in (0, 0.5), got {contamination}"
        )));
    }
    if d < 2 {
        return Err(Error::Config(format!("need at least 2 features, got {d}")));
    }
    if n == 0 {
        return Err(Error::Config("need at least one record".into()));
    }
    let n_anomalies = (n as f64 * contamination).round() as usize;
    let mut rng = SplitMix64::new(rng::mix(seed, rng::tag::SYNTHETIC));

    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_anomalies)).collect();
    rng.shuffle(&mut labels);

    let mut values = Vec::with_capacity(n * d);
    for &y in &labels {
        for j in 0..d {
            let z = rng.normal();
            values.push(if y == 0 {
                z
            } else if j == DRIVER_FEATURE {
                DRIVER_DISPLACEMENT + ANOMALY_SPREAD * z
            } else {
                ANOMALY_SPREAD * z
            });
        }
    }
    let raw = labels
        .iter()
        .map(|&y| if y == 1 { ANOMALY_LABEL } else { BENIGN_LABEL }.to_string())
        .collect();
    Dataset::from_parts(
        synthetic_schema(d)?,
        values,
        Some(labels),
        Some(raw),
        Vec::new(),
    )
}
