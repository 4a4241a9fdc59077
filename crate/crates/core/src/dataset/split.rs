use super::{Dataset, PreprocessStep, SplitPart};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

#[derive(Debug, Clone)]
pub struct TrainTestSplit {
    pub train: Dataset,
    pub test: Dataset,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

fn train_count(n: usize, fraction: f64) -> usize {
    // The epsilon keeps products like 10 * 0.8 from flooring to 7.
    ((n as f64 * fraction) + 1e-9).floor() as usize
}

/// Deterministic train/test index sets, each sorted ascending.
///
/// Stratified splits take `floor(n_c * fraction)` records of each class `c`
/// into the training part.
pub fn split_indices(
    labels: Option<&[u8]>,
    n: usize,
    train_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    if stratified {
        let labels = labels.ok_or_else(|| Error::Data("stratified split needs labels".into()))?;
        for class in [0u8, 1] {
            let mut idx: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
            if idx.is_empty() {
                return Err(Error::Data(format!(
                    "class {class} has no records; cannot stratify"
                )));
            }
            rng.shuffle(&mut idx);
            let k = train_count(idx.len(), train_fraction);
            train.extend_from_slice(&idx[..k]);
            test.extend_from_slice(&idx[k..]);
        }
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut idx);
        let k = train_count(n, train_fraction);
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::Data(format!(
            "split of {n} records at fraction {train_fraction} leaves an empty part"
        )));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_train_test(
    ds: &Dataset,
    train_fraction: f64,
    seed: u64,
    stratified: bool,
) -> Result<TrainTestSplit> {
    let (train_indices, test_indices) =
        split_indices(ds.labels(), ds.n_rows(), train_fraction, seed, stratified)?;
    let step = |part| PreprocessStep::Split {
        seed,
        train_fraction,
        stratified,
        part,
    };
    Ok(TrainTestSplit {
        train: ds.subset(&train_indices).with_step(step(SplitPart::Train)),
        test: ds.subset(&test_indices).with_step(step(SplitPart::Test)),
        train_indices,
        test_indices,
    })
}
