//! Deterministic (optionally label-stratified) k-fold assignment.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{CoherenceLabel, Document};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
    pub assignments: BTreeMap<String, usize>,
}

impl FoldPlan {
    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in self.assignments.values() {
            sizes[f] += 1;
        }
        sizes
    }

    /// `(train, test)` documents for fold `fold`, each in dataset order.
    pub fn split<'a>(&self, dataset: &'a [Document], fold: usize) -> (Vec<&'a Document>, Vec<&'a Document>) {
        dataset
            .iter()
            .partition(|d| self.assignments.get(&d.id).copied() != Some(fold))
    }
}

/// Stratified k-fold.
pub fn kfold(dataset: &[Document], k: usize, seed: u64) -> Result<FoldPlan> {
    kfold_with(dataset, k, seed, true)
}

/// Documents are sorted by id, grouped by label when `stratified`, each group
/// shuffled with the seeded generator, then dealt round-robin across folds.
pub fn kfold_with(dataset: &[Document], k: usize, seed: u64, stratified: bool) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if k > dataset.len() {
        return Err(Error::Config(format!("k = {k} exceeds the {} documents", dataset.len())));
    }
    let ids: BTreeSet<&str> = dataset.iter().map(|d| d.id.as_str()).collect();
    if ids.len() != dataset.len() {
        return Err(Error::Contract("document ids must be unique for fold assignment".into()));
    }
    let mut sorted: Vec<&Document> = dataset.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let mut groups: BTreeMap<Option<CoherenceLabel>, Vec<&str>> = BTreeMap::new();
    for d in &sorted {
        let key = if stratified { d.label } else { None };
        groups.entry(key).or_default().push(&d.id);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = BTreeMap::new();
    let mut position = 0usize;
    for (_, mut group) in groups {
        group.shuffle(&mut rng);
        for id in group {
            assignments.insert(id.to_string(), position % k);
            position += 1;
        }
    }
    Ok(FoldPlan {
        k,
        seed,
        stratified,
        assignments,
    })
}
