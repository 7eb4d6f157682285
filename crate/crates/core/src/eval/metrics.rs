use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Decision;

/// Per-class contingency counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl ConfusionCounts {
    pub fn prf(&self) -> Prf {
        let p = ratio(self.tp as f64, (self.tp + self.fp) as f64);
        let r = ratio(self.tp as f64, (self.tp + self.fn_) as f64);
        Prf {
            precision: p,
            recall: r,
            f1: ratio(2.0 * p * r, p + r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroPrf {
    pub per_class: Vec<Prf>,
    /// Unweighted means of the per-class values.
    pub macro_avg: Prf,
}

impl MacroPrf {
    pub fn from_counts(counts: &[ConfusionCounts]) -> Self {
        let per_class: Vec<Prf> = counts.iter().map(ConfusionCounts::prf).collect();
        let n = per_class.len().max(1) as f64;
        let macro_avg = Prf {
            precision: per_class.iter().map(|p| p.precision).sum::<f64>() / n,
            recall: per_class.iter().map(|p| p.recall).sum::<f64>() / n,
            f1: per_class.iter().map(|p| p.f1).sum::<f64>() / n,
        };
        MacroPrf { per_class, macro_avg }
    }
}

fn contains(d: &Decision, c: usize) -> bool {
    match d {
        Decision::Class(k) => *k == c,
        Decision::Labels(set) => set.contains(&c),
    }
}

/// Counts per class. Single-label decisions are one-vs-rest per class,
/// label sets are counted per label independently.
pub fn confusion(predictions: &[Decision], truths: &[Decision], classes: usize) -> Result<Vec<ConfusionCounts>> {
    if predictions.is_empty() {
        return Err(Error::invalid("no predictions to score"));
    }
    if predictions.len() != truths.len() {
        return Err(Error::shape(&[predictions.len()], &[truths.len()], "predictions vs truths"));
    }
    let mut counts = vec![ConfusionCounts::default(); classes];
    for (p, t) in predictions.iter().zip(truths) {
        for (c, cc) in counts.iter_mut().enumerate() {
            match (contains(p, c), contains(t, c)) {
                (true, true) => cc.tp += 1,
                (true, false) => cc.fp += 1,
                (false, true) => cc.fn_ += 1,
                (false, false) => cc.tn += 1,
            }
        }
    }
    Ok(counts)
}

pub fn macro_prf(predictions: &[Decision], truths: &[Decision], classes: usize) -> Result<MacroPrf> {
    Ok(MacroPrf::from_counts(&confusion(predictions, truths, classes)?))
}
