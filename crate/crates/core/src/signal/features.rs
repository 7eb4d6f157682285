use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::bands::{Band, BandSpec};
use super::spectral::SpectralWorkspace;
use crate::corpus::{EegRecording, FixationEvent};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Raw amplitude bound; windows with any |sample| above it are rejected.
pub const ARTIFACT_THRESHOLD_UV: f64 = 90.0;

/// Which feature set a matrix holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSet {
    Eeg(Band),
    Gaze,
}

impl FeatureSet {
    pub fn name(self) -> &'static str {
        match self {
            FeatureSet::Eeg(b) => b.name(),
            FeatureSet::Gaze => "gaze",
        }
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "gaze" {
            Ok(FeatureSet::Gaze)
        } else {
            s.parse().map(FeatureSet::Eeg)
        }
    }
}

/// One feature vector per token plus a fixated/not-fixated mask.
#[derive(Debug, Clone, PartialEq)]
pub struct WordFeatureMatrix<T> {
    pub sentence_id: String,
    pub feature: FeatureSet,
    /// tokens × dim
    pub rows: Array2<T>,
    pub mask: Vec<bool>,
}

impl<T: Scalar> WordFeatureMatrix<T> {
    pub fn empty(sentence_id: &str, feature: FeatureSet, tokens: usize, dim: usize) -> Self {
        WordFeatureMatrix {
            sentence_id: sentence_id.to_owned(),
            feature,
            rows: Array2::zeros((tokens, dim)),
            mask: vec![false; tokens],
        }
    }

    pub fn tokens(&self) -> usize {
        self.rows.nrows()
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn cast<U: Scalar>(&self) -> WordFeatureMatrix<U> {
        WordFeatureMatrix {
            sentence_id: self.sentence_id.clone(),
            feature: self.feature,
            rows: self.rows.mapv(|v| U::of(v.as_f64())),
            mask: self.mask.clone(),
        }
    }
}

/// Which fixations of a word define its EEG window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    /// All fixations on the word.
    #[default]
    TotalReadingTime,
    /// The first fixation on the word.
    FirstFixation,
    /// The first-pass run of consecutive fixations on the word.
    GazeDuration,
}

/// How samples from several fixations are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Mean over the union of all window samples.
    #[default]
    UnionOfSamples,
    /// Mean of the per-fixation window means.
    PerFixationMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub alignment: Alignment,
    pub pooling: Pooling,
    pub artifact_threshold_uv: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            alignment: Alignment::default(),
            pooling: Pooling::default(),
            artifact_threshold_uv: ARTIFACT_THRESHOLD_UV,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractStats {
    pub fixations: usize,
    pub rejected_artifact: usize,
    pub clipped: usize,
    pub empty_window: usize,
}

impl std::ops::AddAssign for ExtractStats {
    fn add_assign(&mut self, o: Self) {
        self.fixations += o.fixations;
        self.rejected_artifact += o.rejected_artifact;
        self.clipped += o.clipped;
        self.empty_window += o.empty_window;
    }
}

/// True when any raw sample in the (channels × window) slice exceeds the
/// ±90 µV bound. The bound itself is kept.
pub fn reject_artifact(window: ArrayView2<'_, f32>) -> bool {
    reject_artifact_with(window, ARTIFACT_THRESHOLD_UV)
}

fn reject_artifact_with(window: ArrayView2<'_, f32>, threshold: f64) -> bool {
    window.iter().any(|&v| f64::from(v).abs() > threshold)
}

/// Selects fixation indices (into `fixations`) defining word `w`'s window.
fn select_fixations(fixations: &[FixationEvent], w: usize, alignment: Alignment) -> Vec<usize> {
    let on_word: Vec<usize> = (0..fixations.len())
        .filter(|&i| fixations[i].word_index == w)
        .collect();
    match alignment {
        Alignment::TotalReadingTime => on_word,
        Alignment::FirstFixation => on_word.into_iter().take(1).collect(),
        Alignment::GazeDuration => match on_word.first() {
            None => Vec::new(),
            Some(&first) => (first..fixations.len())
                .take_while(|&i| fixations[i].word_index == w)
                .collect(),
        },
    }
}

/// Band features for several bands at once (one forward FFT per channel).
///
/// Returns one matrix per band, in `bands` order.
pub fn extract_word_features_multi<T: Scalar>(
    rec: &EegRecording,
    fixations: &[FixationEvent],
    n_tokens: usize,
    bands: &[BandSpec],
    opts: &ExtractOptions,
    ws: &mut SpectralWorkspace<T>,
) -> Result<(Vec<WordFeatureMatrix<T>>, ExtractStats)> {
    if rec.channels() == 0 || rec.is_empty() {
        return Err(Error::invalid(format!(
            "recording {}/{} is empty",
            rec.sentence_id, rec.subject_id
        )));
    }
    let fs = f64::from(rec.sample_rate_hz);
    let n = rec.len();
    let mut stats = ExtractStats::default();

    // Sample windows of fixations that survive clipping and artifact rejection.
    let mut windows: Vec<Option<(usize, usize)>> = Vec::with_capacity(fixations.len());
    for fix in fixations {
        if fix.word_index >= n_tokens {
            return Err(Error::invalid(format!(
                "fixation on word {} but sentence {} has {n_tokens} tokens",
                fix.word_index, rec.sentence_id
            )));
        }
        stats.fixations += 1;
        let a = (fix.onset_ms * fs / 1000.0).round();
        let b = (fix.end_ms() * fs / 1000.0).round();
        if a < 0.0 || b > n as f64 {
            stats.clipped += 1;
            log::debug!(
                "clipping fixation window {a}..{b} to recording length {n} ({}/{})",
                rec.sentence_id,
                rec.subject_id
            );
        }
        let (a, b) = (a.clamp(0.0, n as f64) as usize, b.clamp(0.0, n as f64) as usize);
        if a >= b {
            stats.empty_window += 1;
            windows.push(None);
            continue;
        }
        let raw = rec.samples.slice(ndarray::s![.., a..b]);
        if reject_artifact_with(raw, opts.artifact_threshold_uv) {
            stats.rejected_artifact += 1;
            windows.push(None);
            continue;
        }
        windows.push(Some((a, b)));
    }

    // Per word: the selected, surviving windows.
    let word_windows: Vec<Vec<(usize, usize)>> = (0..n_tokens)
        .map(|w| {
            select_fixations(fixations, w, opts.alignment)
                .into_iter()
                .filter_map(|i| windows[i])
                .collect()
        })
        .collect();

    let channels = rec.channels();
    let mut out: Vec<WordFeatureMatrix<T>> = bands
        .iter()
        .map(|b| WordFeatureMatrix::empty(&rec.sentence_id, FeatureSet::Eeg(b.band), n_tokens, channels))
        .collect();
    if word_windows.iter().all(Vec::is_empty) {
        return Ok((out, stats));
    }

    // Union masks are shared across channels and bands.
    let unions: Vec<Vec<usize>> = word_windows
        .iter()
        .map(|ws| {
            let mut hit = vec![false; n];
            for &(a, b) in ws {
                hit[a..b].iter_mut().for_each(|h| *h = true);
            }
            (0..n).filter(|&t| hit[t]).collect()
        })
        .collect();

    let mut signal = vec![T::zero(); n];
    for ch in 0..channels {
        for (dst, &v) in signal.iter_mut().zip(rec.samples.row(ch)) {
            *dst = T::of(f64::from(v));
        }
        let envelopes = ws.band_envelopes(&signal, bands, fs)?;
        for (m, env) in out.iter_mut().zip(&envelopes) {
            for w in 0..n_tokens {
                if word_windows[w].is_empty() {
                    continue;
                }
                let value = match opts.pooling {
                    Pooling::UnionOfSamples => {
                        let idx = &unions[w];
                        idx.iter().map(|&t| env[t]).sum::<T>() / T::of(idx.len() as f64)
                    }
                    Pooling::PerFixationMean => {
                        let wins = &word_windows[w];
                        wins.iter()
                            .map(|&(a, b)| env[a..b].iter().copied().sum::<T>() / T::of((b - a) as f64))
                            .sum::<T>()
                            / T::of(wins.len() as f64)
                    }
                };
                m.rows[[w, ch]] = value;
            }
        }
    }
    for m in &mut out {
        for (w, ws) in word_windows.iter().enumerate() {
            m.mask[w] = !ws.is_empty();
        }
    }
    Ok((out, stats))
}

/// Per-word EEG features for one band, one subject and one sentence.
pub fn extract_word_band_features<T: Scalar>(
    rec: &EegRecording,
    fixations: &[FixationEvent],
    n_tokens: usize,
    band: &BandSpec,
    opts: &ExtractOptions,
) -> Result<(WordFeatureMatrix<T>, ExtractStats)> {
    let mut ws = SpectralWorkspace::new();
    let (mut v, stats) =
        extract_word_features_multi(rec, fixations, n_tokens, std::slice::from_ref(band), opts, &mut ws)?;
    Ok((v.remove(0), stats))
}

/// Mask-aware mean over subjects: only subjects that fixated a word
/// contribute to that word's row.
pub fn average_subjects<T: Scalar>(per_subject: &[WordFeatureMatrix<T>]) -> Result<WordFeatureMatrix<T>> {
    let first = per_subject
        .first()
        .ok_or_else(|| Error::invalid("no subject matrices to average"))?;
    for m in per_subject {
        if m.sentence_id != first.sentence_id || m.feature != first.feature {
            return Err(Error::invalid(format!(
                "cannot average {}/{} with {}/{}",
                first.sentence_id, first.feature, m.sentence_id, m.feature
            )));
        }
        if m.rows.dim() != first.rows.dim() {
            return Err(Error::shape(
                &[first.tokens(), first.dim()],
                &[m.tokens(), m.dim()],
                "average_subjects",
            ));
        }
    }
    let mut out = WordFeatureMatrix::empty(&first.sentence_id, first.feature, first.tokens(), first.dim());
    for w in 0..first.tokens() {
        let contributors: Vec<&WordFeatureMatrix<T>> =
            per_subject.iter().filter(|m| m.mask[w]).collect();
        if contributors.is_empty() {
            continue;
        }
        let k = T::of(contributors.len() as f64);
        let mut row = out.rows.row_mut(w);
        for m in &contributors {
            row += &m.rows.row(w);
        }
        row.mapv_inplace(|v| v / k);
        out.mask[w] = true;
    }
    Ok(out)
}
