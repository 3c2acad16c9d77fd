use serde::{Deserialize, Serialize};

use crate::corpus::ClassLabel;
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Stream key for fold shuffles; combined with the user seed and class.
const FOLD_STREAM: u64 = 0x666F_6C64;

/// Fold index of every sample, in input order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold_of: Vec<usize>,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of.len()).filter(|&i| self.fold_of[i] != fold).collect()
    }
}

fn class_key(class: ClassLabel) -> u64 {
    match class {
        ClassLabel::Benign => 0,
        ClassLabel::Suspicious => 1,
    }
}

/// Per class: sort by id, shuffle with the keyed SplitMix64 stream
/// `(seed, FOLD_STREAM, class)` (benign 0, suspicious 1), then deal the
/// shuffled samples to folds round-robin starting at fold 0.
pub fn stratified_kfold<S: AsRef<str>>(
    ids: &[S],
    labels: &[ClassLabel],
    k: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    if ids.len() != labels.len() {
        return Err(Error::Invalid(format!("{} ids but {} labels", ids.len(), labels.len())));
    }
    if k < 2 {
        return Err(Error::Invalid(format!("fold count must be at least 2, got {k}")));
    }
    let mut fold_of = vec![0; ids.len()];
    for class in ClassLabel::ALL {
        let mut members: Vec<usize> = (0..ids.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::ClassSmallerThanFolds {
                class: class.as_str(),
                count: members.len(),
                k,
            });
        }
        members.sort_by(|&a, &b| {
            ids[a]
                .as_ref()
                .as_bytes()
                .cmp(ids[b].as_ref().as_bytes())
                .then(a.cmp(&b))
        });
        SplitMix64::keyed(seed, FOLD_STREAM, class_key(class)).shuffle(&mut members);
        for (pos, &i) in members.iter().enumerate() {
            fold_of[i] = pos % k;
        }
    }
    Ok(FoldAssignment { k, fold_of })
}
