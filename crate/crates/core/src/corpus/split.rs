use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::types::Sentence;
use crate::error::{Error, Result};

pub const FOLDS: usize = 5;
pub const TEST_FRACTION: f64 = 0.2;

/// Held-out test ids plus a k-fold partition of the training ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub seed: u64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    /// (fold training ids, fold validation ids)
    pub folds: Vec<(Vec<String>, Vec<String>)>,
}

/// Stratification bucket: the class for single-label tasks, the label-count
/// bucket (0, 1, 2+) for multi-label relation sets.
pub fn stratum_of(sentence: &Sentence) -> usize {
    if let Some(s) = sentence.labels.sentiment {
        return s as usize;
    }
    match &sentence.labels.relations {
        Some(set) => 10 + set.len().min(2),
        None => 0,
    }
}

/// Orders items so that every prefix is approximately stratified: each
/// stratum is shuffled, then items are merged by their relative rank
/// within the stratum.
pub(crate) fn stratified_order(mut items: Vec<(String, usize)>, rng: &mut ChaCha8Rng) -> Vec<String> {
    items.sort();
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (id, s) in items {
        groups.entry(s).or_default().push(id);
    }
    let mut keyed = Vec::new();
    for (stratum, mut ids) in groups {
        ids.shuffle(rng);
        let n = ids.len() as f64;
        for (rank, id) in ids.into_iter().enumerate() {
            keyed.push(((rank as f64 + 0.5) / n, stratum, id));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    keyed.into_iter().map(|(_, _, id)| id).collect()
}

/// 80/20 train/test split with a 5-fold partition of the training ids.
///
/// `strata`, when given, holds one bucket per id; both the test split and the
/// folds are then stratified. The plan depends only on the set of
/// (id, stratum) pairs and the seed, not on input order.
pub fn make_split(ids: &[String], strata: Option<&[usize]>, seed: u64) -> Result<SplitPlan> {
    if ids.len() < 2 * FOLDS {
        return Err(Error::invalid(format!(
            "need at least {} ids to split into train/test and {FOLDS} folds, got {}",
            2 * FOLDS,
            ids.len()
        )));
    }
    if let Some(s) = strata {
        if s.len() != ids.len() {
            return Err(Error::shape(&[ids.len()], &[s.len()], "ids vs strata"));
        }
    }
    let items: Vec<(String, usize)> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.clone(), strata.map_or(0, |s| s[i])))
        .collect();
    let stratum: BTreeMap<String, usize> = items.iter().cloned().collect();
    if stratum.len() != ids.len() {
        return Err(Error::invalid("duplicate ids passed to make_split"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = stratified_order(items, &mut rng);
    let n_test = (order.len() as f64 * TEST_FRACTION).round() as usize;
    let test_ids = order[..n_test].to_vec();
    let train_ids = order[n_test..].to_vec();

    let train_items = train_ids.iter().map(|id| (id.clone(), stratum[id])).collect();
    let train_order = stratified_order(train_items, &mut rng);
    let mut val_sets = vec![Vec::new(); FOLDS];
    for (i, id) in train_order.into_iter().enumerate() {
        val_sets[i % FOLDS].push(id);
    }
    let folds = val_sets
        .iter()
        .enumerate()
        .map(|(k, val)| {
            let fit: Vec<String> = val_sets
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k)
                .flat_map(|(_, v)| v.iter().cloned())
                .collect();
            (fit, val.clone())
        })
        .collect();
    Ok(SplitPlan {
        seed,
        train_ids,
        test_ids,
        folds,
    })
}
