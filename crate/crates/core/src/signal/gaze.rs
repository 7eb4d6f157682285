use ndarray::Array2;

use super::features::{FeatureSet, WordFeatureMatrix};
use crate::corpus::FixationEvent;
use crate::scalar::Scalar;

/// GD, TRT, FFD, GPT, nFix.
pub const GAZE_DIM: usize = 5;

/// Reading measures of one word for one subject (durations in ms).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GazeMeasures {
    /// Gaze duration: first-pass fixations on the word.
    pub gd: f64,
    /// Total reading time: all fixations on the word.
    pub trt: f64,
    /// First fixation duration.
    pub ffd: f64,
    /// Go-past time: from first entering the word until a word to its right
    /// is fixated, regressions included.
    pub gpt: f64,
    pub n_fix: usize,
}

impl GazeMeasures {
    pub fn to_array(self) -> [f64; GAZE_DIM] {
        [self.gd, self.trt, self.ffd, self.gpt, self.n_fix as f64]
    }
}

/// Measures for every word of a time-ordered fixation sequence; `None` for
/// words that were never fixated.
pub fn gaze_measures(fixations: &[FixationEvent], n_tokens: usize) -> Vec<Option<GazeMeasures>> {
    (0..n_tokens)
        .map(|w| {
            let first = fixations.iter().position(|f| f.word_index == w)?;
            let on_word = fixations.iter().filter(|f| f.word_index == w);
            let trt = on_word.clone().map(|f| f.duration_ms).sum();
            let n_fix = on_word.count();
            let gd = fixations[first..]
                .iter()
                .take_while(|f| f.word_index == w)
                .map(|f| f.duration_ms)
                .sum();
            let gpt = fixations[first..]
                .iter()
                .take_while(|f| f.word_index <= w)
                .map(|f| f.duration_ms)
                .sum();
            Some(GazeMeasures {
                gd,
                trt,
                ffd: fixations[first].duration_ms,
                gpt,
                n_fix,
            })
        })
        .collect()
}

/// Gaze features averaged over the subjects who fixated each word.
///
/// `per_subject` holds one time-ordered fixation list per subject.
pub fn extract_gaze_features<T: Scalar>(
    sentence_id: &str,
    n_tokens: usize,
    per_subject: &[&[FixationEvent]],
) -> WordFeatureMatrix<T> {
    let mut sums = Array2::<f64>::zeros((n_tokens, GAZE_DIM));
    let mut counts = vec![0usize; n_tokens];
    for fixations in per_subject {
        for (w, m) in gaze_measures(fixations, n_tokens).into_iter().enumerate() {
            if let Some(m) = m {
                counts[w] += 1;
                for (j, v) in m.to_array().into_iter().enumerate() {
                    sums[[w, j]] += v;
                }
            }
        }
    }
    let mut out = WordFeatureMatrix::empty(sentence_id, FeatureSet::Gaze, n_tokens, GAZE_DIM);
    for w in 0..n_tokens {
        if counts[w] == 0 {
            continue;
        }
        out.mask[w] = true;
        for j in 0..GAZE_DIM {
            out.rows[[w, j]] = T::of(sums[[w, j]] / counts[w] as f64);
        }
    }
    out
}
