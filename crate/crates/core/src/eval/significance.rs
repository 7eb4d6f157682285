use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{confusion, ConfusionCounts, MacroPrf};
use crate::error::{Error, Result};
use crate::model::Decision;

pub const ALPHA: f64 = 0.05;
/// Three embedding types times six EEG feature sets.
pub const BONFERRONI_N: usize = 18;
pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub p_value: f64,
    pub significant_uncorrected: bool,
    pub significant_bonferroni: bool,
}

pub fn bonferroni(p: f64, alpha: f64, n_hypotheses: usize) -> SignificanceResult {
    SignificanceResult {
        p_value: p,
        significant_uncorrected: p < alpha,
        significant_bonferroni: p < alpha / n_hypotheses as f64,
    }
}

/// "+" below the corrected threshold, "*" below alpha, "" otherwise.
pub fn significance_mark(r: &SignificanceResult) -> &'static str {
    if r.significant_bonferroni {
        "+"
    } else if r.significant_uncorrected {
        "*"
    } else {
        ""
    }
}

/// Per-example, per-class (tp, fp, fn) contributions.
fn contributions(pred: &[Decision], truth: &[Decision], classes: usize) -> Result<Vec<Vec<ConfusionCounts>>> {
    pred.iter()
        .zip(truth)
        .map(|(p, t)| confusion(std::slice::from_ref(p), std::slice::from_ref(t), classes))
        .collect()
}

fn macro_f1(counts: &[ConfusionCounts]) -> f64 {
    MacroPrf::from_counts(counts).macro_avg.f1
}

/// Paired example-level bootstrap on macro F1.
///
/// Resamples test examples with replacement and recomputes both systems'
/// macro F1. The one-sided p value is the fraction of resamples whose delta
/// does not keep the observed sign; it is doubled and capped at 1. Each
/// resample draws from its own ChaCha stream, so the result does not depend
/// on how resamples are spread over threads.
pub fn bootstrap_compare(
    a: &[Decision],
    b: &[Decision],
    truth: &[Decision],
    classes: usize,
    n_resamples: usize,
    seed: u64,
) -> Result<SignificanceResult> {
    if a.len() != b.len() || a.len() != truth.len() {
        return Err(Error::invalid(format!(
            "bootstrap needs paired outputs: {} vs {} predictions for {} examples",
            a.len(),
            b.len(),
            truth.len()
        )));
    }
    if a.is_empty() || n_resamples == 0 {
        return Err(Error::invalid("bootstrap needs examples and at least one resample"));
    }
    let ca = contributions(a, truth, classes)?;
    let cb = contributions(b, truth, classes)?;
    let observed = macro_f1(&confusion(a, truth, classes)?) - macro_f1(&confusion(b, truth, classes)?);
    if observed == 0.0 {
        return Ok(bonferroni(1.0, ALPHA, BONFERRONI_N));
    }
    let n = a.len();
    let against: usize = (0..n_resamples)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut sa = vec![ConfusionCounts::default(); classes];
            let mut sb = sa.clone();
            for _ in 0..n {
                let i = rng.gen_range(0..n);
                for c in 0..classes {
                    sa[c].tp += ca[i][c].tp;
                    sa[c].fp += ca[i][c].fp;
                    sa[c].fn_ += ca[i][c].fn_;
                    sb[c].tp += cb[i][c].tp;
                    sb[c].fp += cb[i][c].fp;
                    sb[c].fn_ += cb[i][c].fn_;
                }
            }
            let delta = macro_f1(&sa) - macro_f1(&sb);
            usize::from(if observed > 0.0 { delta <= 0.0 } else { delta >= 0.0 })
        })
        .sum();
    let p = (2.0 * against as f64 / n_resamples as f64).min(1.0);
    Ok(bonferroni(p, ALPHA, BONFERRONI_N))
}
