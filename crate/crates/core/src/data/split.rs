use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{hex_digest, seeded_rng, EpochSet};
use crate::error::{Error, Result};

const SPLIT_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        Self {
            test_fraction: 0.2,
            seed,
            stratified: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Split {
    pub train: EpochSet,
    pub test: EpochSet,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    /// Digest of the membership, equal for equal partitions.
    pub hash: String,
}

pub fn membership_hash(train: &[usize], test: &[usize]) -> String {
    let mut bytes = Vec::with_capacity(8 * (train.len() + test.len()) + 8);
    for &i in train {
        bytes.extend_from_slice(&(i as u64).to_le_bytes());
    }
    bytes.extend_from_slice(&u64::MAX.to_le_bytes());
    for &i in test {
        bytes.extend_from_slice(&(i as u64).to_le_bytes());
    }
    hex_digest(&bytes)
}

/// Seeded train/test partition. When stratified, each class contributes
/// `round(n_c · fraction)` test examples.
pub fn split(set: &EpochSet, spec: &SplitSpec) -> Result<Split> {
    if !(0.0..1.0).contains(&spec.test_fraction) {
        return Err(Error::Config(format!("test fraction {} must be in [0, 1)", spec.test_fraction)));
    }
    let counts = set.class_counts();
    for (c, &n) in counts.iter().enumerate() {
        if n < 2 {
            return Err(Error::Usage(format!(
                "class {c} ({}) has {n} samples; splitting needs at least 2",
                set.class_names[c]
            )));
        }
    }
    let mut rng = seeded_rng(spec.seed, SPLIT_STREAM);
    let mut test = Vec::new();
    if spec.stratified {
        for c in 0..set.num_classes() {
            let mut members: Vec<usize> = (0..set.len()).filter(|&i| set.labels[i] == c).collect();
            members.shuffle(&mut rng);
            let k = (members.len() as f64 * spec.test_fraction).round() as usize;
            test.extend_from_slice(&members[..k]);
        }
    } else {
        let mut all: Vec<usize> = (0..set.len()).collect();
        all.shuffle(&mut rng);
        let k = (all.len() as f64 * spec.test_fraction).round() as usize;
        test.extend_from_slice(&all[..k]);
    }
    test.sort_unstable();
    let train: Vec<usize> = (0..set.len()).filter(|i| test.binary_search(i).is_err()).collect();
    Ok(Split {
        train: set.subset(&train),
        test: set.subset(&test),
        hash: membership_hash(&train, &test),
        train_indices: train,
        test_indices: test,
    })
}
