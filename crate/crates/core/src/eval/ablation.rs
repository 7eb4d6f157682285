use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::split::stratified_order;
use crate::corpus::{derive_seed, Relation, Sentence};
use crate::error::{Error, Result};

/// Stratified subset of `ids` holding `round(fraction * n)` items.
///
/// Subsets for one seed are nested: the items are put in one stratified
/// random order and every fraction takes a prefix of it. Fraction 1.0 returns
/// `ids` unchanged (same order), so training on it reproduces the full run.
pub fn nested_subsample(ids: &[String], strata: &[usize], fraction: f64, seed: u64) -> Result<Vec<String>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    if ids.len() != strata.len() {
        return Err(Error::shape(&[ids.len()], &[strata.len()], "ids vs strata"));
    }
    let stratum: BTreeMap<&String, usize> = ids.iter().zip(strata.iter().copied()).collect();
    let chosen: Vec<String> = if fraction == 1.0 {
        ids.to_vec()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "ablation"));
        let order = stratified_order(ids.iter().cloned().zip(strata.iter().copied()).collect(), &mut rng);
        let k = (fraction * ids.len() as f64).round() as usize;
        let keep: BTreeSet<&String> = order[..k].iter().collect();
        // keep the caller's order so downstream batching only sees a filter
        ids.iter().filter(|id| keep.contains(id)).cloned().collect()
    };
    let mut per: BTreeMap<usize, usize> = strata.iter().map(|&s| (s, 0)).collect();
    for id in &chosen {
        *per.get_mut(&stratum[id]).expect("known stratum") += 1;
    }
    if let Some((s, n)) = per.iter().find(|(_, &n)| n < 2) {
        return Err(Error::invalid(format!(
            "fraction {fraction} leaves {n} examples of class {s}; need at least 2 per class"
        )));
    }
    Ok(chosen)
}

/// Relations ordered by how many sentences carry them (ties by relation order).
pub fn most_frequent_relations(sentences: &[Sentence]) -> Vec<(Relation, usize)> {
    let mut counts: BTreeMap<Relation, usize> = BTreeMap::new();
    for s in sentences {
        for r in s.labels.relations.iter().flatten() {
            *counts.entry(*r).or_default() += 1;
        }
    }
    let mut v: Vec<(Relation, usize)> = counts.into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    v
}

/// One relation against sentences with no relation at all.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryRelationTask {
    pub relation: Relation,
    /// Sentences whose label set contains `relation`; class 1.
    pub positives: Vec<String>,
    /// Sentences with an empty label set; class 0.
    pub negatives: Vec<String>,
}

impl BinaryRelationTask {
    /// (id, class) pairs in corpus order.
    pub fn labelled(&self, sentences: &[Sentence]) -> Vec<(String, usize)> {
        let pos: BTreeSet<&String> = self.positives.iter().collect();
        let neg: BTreeSet<&String> = self.negatives.iter().collect();
        sentences
            .iter()
            .filter_map(|s| {
                if pos.contains(&s.id) {
                    Some((s.id.clone(), 1))
                } else if neg.contains(&s.id) {
                    Some((s.id.clone(), 0))
                } else {
                    None
                }
            })
            .collect()
    }
}

pub fn binary_relation_task(sentences: &[Sentence], relation: Relation) -> Result<BinaryRelationTask> {
    let mut task = BinaryRelationTask {
        relation,
        positives: Vec::new(),
        negatives: Vec::new(),
    };
    for s in sentences {
        let Some(set) = &s.labels.relations else { continue };
        if set.contains(&relation) {
            task.positives.push(s.id.clone());
        } else if set.is_empty() {
            task.negatives.push(s.id.clone());
        }
    }
    if task.positives.is_empty() {
        return Err(Error::invalid(format!("relation {relation} does not occur in the corpus")));
    }
    Ok(task)
}
