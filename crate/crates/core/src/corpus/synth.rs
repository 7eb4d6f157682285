use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::io::{eeg_file_name, write_corpus_files, write_eeg, Manifest, EEG_DIR};
use super::types::{EegRecording, FixationEvent, Relation, Sentence, Sentiment, TaskLabels};
use super::derive_seed;
use crate::error::{Error, Result};
use crate::signal::Band;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthTask {
    BinarySentiment,
    TernarySentiment,
    RelationDetection,
}

impl SynthTask {
    pub fn name(self) -> &'static str {
        match self {
            SynthTask::BinarySentiment => "binary-sentiment",
            SynthTask::TernarySentiment => "ternary-sentiment",
            SynthTask::RelationDetection => "relation-detection",
        }
    }

    fn sentiment_classes(self) -> &'static [Sentiment] {
        match self {
            SynthTask::BinarySentiment => &[Sentiment::Negative, Sentiment::Positive],
            SynthTask::TernarySentiment => &Sentiment::ALL,
            SynthTask::RelationDetection => &[],
        }
    }
}

impl fmt::Display for SynthTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SynthTask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary-sentiment" => Ok(SynthTask::BinarySentiment),
            "ternary-sentiment" => Ok(SynthTask::TernarySentiment),
            "relation-detection" => Ok(SynthTask::RelationDetection),
            _ => Err(Error::invalid(format!("unknown task {s:?}"))),
        }
    }
}

/// Parameters of the synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub task: SynthTask,
    pub n_sentences: usize,
    /// Number of filler (label-neutral) words.
    pub vocab_size: usize,
    /// Size of the cue-word pool per class or relation.
    pub cue_words_per_class: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub n_subjects: usize,
    pub channels: usize,
    pub sample_rate_hz: u32,
    /// Band whose center frequency carries the injected label signal.
    pub band: Band,
    /// Injected amplitude in units of the background noise RMS.
    pub gain: f64,
    /// Background pink noise RMS per channel (µV).
    pub noise_rms_uv: f64,
    pub skip_prob: f64,
    pub refixation_prob: f64,
    pub regression_prob: f64,
    pub median_fixation_ms: f64,
    pub fixation_log_sd: f64,
    pub saccade_ms: f64,
    /// Probability that a fixation window carries a transient spike artifact.
    pub artifact_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            task: SynthTask::BinarySentiment,
            n_sentences: 260,
            vocab_size: 200,
            cue_words_per_class: 40,
            min_len: 5,
            max_len: 9,
            n_subjects: 6,
            channels: 105,
            sample_rate_hz: 500,
            band: Band::Gamma,
            gain: 2.0,
            noise_rms_uv: 10.0,
            skip_prob: 0.15,
            refixation_prob: 0.1,
            regression_prob: 0.05,
            median_fixation_ms: 200.0,
            fixation_log_sd: 0.35,
            saccade_ms: 30.0,
            artifact_prob: 0.01,
        }
    }
}

/// What a cue token signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CueClass {
    Sentiment(Sentiment),
    Relation(Relation),
}

/// Relative frequency of each relation type in generated label sets.
fn relation_weight(r: Relation) -> f64 {
    match r {
        Relation::JobTitle => 10.0,
        Relation::Visited => 8.0,
        Relation::Nationality => 5.0,
        Relation::Employer => 4.0,
        Relation::Education => 4.0,
        Relation::PoliticalAffiliation => 3.0,
        Relation::Founder => 2.0,
        Relation::Award => 2.0,
        Relation::Wife => 2.0,
        Relation::BirthPlace => 1.5,
        Relation::DeathPlace => 1.0,
    }
}

const LABEL_COUNT_WEIGHTS: [f64; 4] = [0.37, 0.40, 0.18, 0.05];

#[derive(Debug, Clone)]
pub struct SyntheticSentence {
    pub sentence: Sentence,
    /// Token positions holding cue words.
    pub cue_positions: Vec<usize>,
}

/// A generated corpus. Sentences are held in memory; fixations and EEG are
/// regenerated on demand from per-(sentence, subject) seeds.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub config: SynthConfig,
    pub seed: u64,
    pub sentences: Vec<SyntheticSentence>,
    cues: HashMap<String, CueClass>,
    spatial: Vec<f64>,
}

fn cue_token(class: CueClass, j: usize) -> String {
    match class {
        CueClass::Sentiment(s) => {
            let p = match s {
                Sentiment::Negative => "neg",
                Sentiment::Neutral => "neu",
                Sentiment::Positive => "pos",
            };
            format!("{p}{j:02}")
        }
        CueClass::Relation(r) => format!("{}{j:02}", r.name().to_lowercase()),
    }
}

impl SyntheticCorpus {
    pub fn new(config: SynthConfig, seed: u64) -> Result<Self> {
        if !(config.gain >= 0.0) {
            return Err(Error::invalid(format!("injection gain must be >= 0, got {}", config.gain)));
        }
        if config.vocab_size == 0 || config.cue_words_per_class == 0 {
            return Err(Error::invalid("empty vocabulary"));
        }
        if config.n_sentences == 0 || config.n_subjects == 0 || config.channels == 0 {
            return Err(Error::invalid("sentence, subject and channel counts must be positive"));
        }
        if config.min_len < 4 || config.max_len < config.min_len {
            return Err(Error::invalid("sentence length range must satisfy 4 <= min <= max"));
        }
        let band = config.band.spec();
        band.validate(f64::from(config.sample_rate_hz))?;

        let mut cues = HashMap::new();
        let classes: Vec<CueClass> = match config.task {
            SynthTask::RelationDetection => Relation::ALL.iter().map(|&r| CueClass::Relation(r)).collect(),
            t => t.sentiment_classes().iter().map(|&s| CueClass::Sentiment(s)).collect(),
        };
        for &c in &classes {
            for j in 0..config.cue_words_per_class {
                cues.insert(cue_token(c, j), c);
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "text"));
        let fillers: Vec<String> = (0..config.vocab_size).map(|i| format!("w{i:04}")).collect();
        let n = config.n_sentences;

        let mut sentences = Vec::with_capacity(n);
        let sentiment = config.task.sentiment_classes();
        let mut class_order: Vec<usize> = (0..n).map(|i| i % sentiment.len().max(1)).collect();
        class_order.shuffle(&mut rng);

        for (i, &class) in class_order.iter().enumerate() {
            let len = rng.gen_range(config.min_len..=config.max_len);
            let mut tokens: Vec<String> =
                (0..len).map(|_| fillers[rng.gen_range(0..fillers.len())].clone()).collect();
            let (labels, cue_classes) = if sentiment.is_empty() {
                let k = sample_weighted(&mut rng, &LABEL_COUNT_WEIGHTS);
                let mut chosen: Vec<Relation> = Vec::new();
                while chosen.len() < k {
                    let w: Vec<f64> = Relation::ALL
                        .iter()
                        .map(|&r| if chosen.contains(&r) { 0.0 } else { relation_weight(r) })
                        .collect();
                    chosen.push(Relation::ALL[sample_weighted(&mut rng, &w)]);
                }
                let labels = TaskLabels {
                    sentiment: None,
                    relations: Some(chosen.iter().copied().collect()),
                };
                (labels, chosen.into_iter().map(CueClass::Relation).collect::<Vec<_>>())
            } else {
                let s = sentiment[class];
                let labels = TaskLabels {
                    sentiment: Some(s),
                    relations: None,
                };
                (labels, vec![CueClass::Sentiment(s)])
            };
            let mut positions = index::sample(&mut rng, len, cue_classes.len()).into_vec();
            positions.sort_unstable();
            for (&pos, &c) in positions.iter().zip(&cue_classes) {
                tokens[pos] = cue_token(c, rng.gen_range(0..config.cue_words_per_class));
            }
            sentences.push(SyntheticSentence {
                sentence: Sentence {
                    id: format!("s{i:04}"),
                    tokens,
                    labels,
                },
                cue_positions: positions,
            });
        }

        let mut srng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "spatial"));
        let spatial = (0..config.channels).map(|_| srng.gen_range(0.5..=1.0)).collect();

        Ok(SyntheticCorpus {
            config,
            seed,
            sentences,
            cues,
            spatial,
        })
    }

    pub fn subjects(&self) -> Vec<String> {
        (0..self.config.n_subjects).map(|i| format!("S{:02}", i + 1)).collect()
    }

    pub fn cue_class(&self, token: &str) -> Option<CueClass> {
        self.cues.get(token).copied()
    }

    /// Amplitude multiplier applied to injections on this sentence's cues.
    fn polarity_scale(&self, sentence: &Sentence) -> f64 {
        match sentence.labels.sentiment {
            Some(s) => {
                let classes = self.config.task.sentiment_classes();
                let k = classes.iter().position(|&c| c == s).unwrap_or(0);
                (k + 1) as f64 / classes.len() as f64
            }
            None => 1.0,
        }
    }

    /// Left-to-right reading with skips, refixations and short regressions.
    /// Includes fixations shorter than the load-time floor.
    pub fn fixations(&self, sentence_idx: usize, subject_idx: usize) -> Vec<FixationEvent> {
        let cfg = &self.config;
        let s = &self.sentences[sentence_idx].sentence;
        let subject = format!("S{:02}", subject_idx + 1);
        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &format!("fix/{}/{subject}", s.id)));
        let durations = LogNormal::new(cfg.median_fixation_ms.ln(), cfg.fixation_log_sd)
            .expect("valid log-normal parameters");
        let mut t = 80.0;
        let mut out = Vec::new();
        let mut push = |word: usize, t: &mut f64, rng: &mut ChaCha8Rng| {
            let d: f64 = durations.sample(rng);
            let d = (d * 10.0).round() / 10.0;
            out.push(FixationEvent {
                sentence_id: s.id.clone(),
                subject_id: subject.clone(),
                word_index: word,
                onset_ms: (*t * 10.0).round() / 10.0,
                duration_ms: d,
            });
            *t += d + cfg.saccade_ms;
        };
        for w in 0..s.tokens.len() {
            if rng.gen::<f64>() < cfg.skip_prob {
                continue;
            }
            push(w, &mut t, &mut rng);
            if rng.gen::<f64>() < cfg.refixation_prob {
                push(w, &mut t, &mut rng);
            }
            if w > 0 && rng.gen::<f64>() < cfg.regression_prob {
                push(w - 1, &mut t, &mut rng);
            }
        }
        out
    }

    /// Pink-noise background on every channel plus a sinusoid at the band
    /// center during fixations on cue words.
    pub fn recording(
        &self,
        sentence_idx: usize,
        subject_idx: usize,
        fixations: &[FixationEvent],
        planner: &mut FftPlanner<f64>,
    ) -> EegRecording {
        let cfg = &self.config;
        let item = &self.sentences[sentence_idx];
        let s = &item.sentence;
        let subject = format!("S{:02}", subject_idx + 1);
        let fs = f64::from(cfg.sample_rate_hz);
        let end_ms = fixations.iter().map(FixationEvent::end_ms).fold(0.0, f64::max) + 150.0;
        let n = ((end_ms * fs / 1000.0).ceil() as usize).max(64);

        let mut rng =
            ChaCha8Rng::seed_from_u64(derive_seed(self.seed, &format!("eeg/{}/{subject}", s.id)));
        let mut samples = Array2::<f64>::zeros((cfg.channels, n));
        for mut row in samples.rows_mut() {
            let noise = pink_noise(n, cfg.noise_rms_uv, &mut rng, planner);
            row.iter_mut().zip(noise).for_each(|(x, v)| *x = v);
        }

        let f_c = cfg.band.spec().center_hz();
        let amp = cfg.gain * cfg.noise_rms_uv * self.polarity_scale(s);
        let to_sample = |ms: f64| ((ms * fs / 1000.0).round() as usize).min(n);
        for fix in fixations {
            let phase: f64 = rng.gen_range(0.0..2.0 * PI);
            let spike: f64 = rng.gen();
            let (a, b) = (to_sample(fix.onset_ms), to_sample(fix.end_ms()));
            if amp > 0.0 && item.cue_positions.contains(&fix.word_index) {
                for (ch, mut row) in samples.rows_mut().into_iter().enumerate() {
                    let a_ch = amp * self.spatial[ch];
                    for t in a..b {
                        let dt = (t - a) as f64 / fs;
                        row[t] += a_ch * (2.0 * PI * f_c * dt + phase).sin();
                    }
                }
            }
            if spike < cfg.artifact_prob && b > a {
                let ch = rng.gen_range(0..cfg.channels);
                let at = rng.gen_range(a..b);
                let height = rng.gen_range(120.0..200.0) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
                for t in at..(at + 3).min(n) {
                    samples[[ch, t]] += height;
                }
            }
        }

        EegRecording {
            sentence_id: s.id.clone(),
            subject_id: subject,
            sample_rate_hz: cfg.sample_rate_hz,
            samples: samples.mapv(|v| v as f32),
        }
    }

    pub fn plain_sentences(&self) -> Vec<Sentence> {
        self.sentences.iter().map(|s| s.sentence.clone()).collect()
    }

    fn manifest(&self) -> Manifest {
        Manifest {
            task: Some(self.config.task.name().to_owned()),
            subjects: self.subjects(),
            channels: Some(self.config.channels),
            sample_rate_hz: Some(self.config.sample_rate_hz),
        }
    }

    /// Writes sentences, fixations, manifest and one EEGB file per
    /// (sentence, subject).
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut fixations = Vec::new();
        for i in 0..self.sentences.len() {
            for subj in 0..self.config.n_subjects {
                fixations.extend(self.fixations(i, subj));
            }
        }
        write_corpus_files(dir, &self.plain_sentences(), &fixations, &self.manifest())?;
        let mut planner = FftPlanner::new();
        for (i, item) in self.sentences.iter().enumerate() {
            for subj in 0..self.config.n_subjects {
                let fix = self.fixations(i, subj);
                let rec = self.recording(i, subj, &fix, &mut planner);
                let path = dir
                    .join(EEG_DIR)
                    .join(eeg_file_name(&item.sentence.id, &rec.subject_id));
                write_eeg(&path, &rec)?;
            }
        }
        Ok(())
    }
}

fn sample_weighted(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

/// 1/f noise by spectral shaping of white Gaussian noise, scaled to `rms`.
fn pink_noise(
    n: usize,
    rms: f64,
    rng: &mut ChaCha8Rng,
    planner: &mut FftPlanner<f64>,
) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|_| Complex::new(StandardNormal.sample(rng), 0.0))
        .collect();
    planner.plan_fft_forward(n).process(&mut buf);
    buf[0] = Complex::new(0.0, 0.0);
    for (k, v) in buf.iter_mut().enumerate().skip(1) {
        let f = k.min(n - k) as f64;
        *v /= f.sqrt();
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    let out: Vec<f64> = buf.iter().map(|c| c.re).collect();
    let cur = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if cur == 0.0 {
        return out;
    }
    out.into_iter().map(|v| v * rms / cur).collect()
}

/// Generates a corpus and writes it to `dir`.
pub fn generate_synthetic(config: SynthConfig, seed: u64, dir: &Path) -> Result<SyntheticCorpus> {
    let corpus = SyntheticCorpus::new(config, seed)?;
    corpus.write(dir)?;
    Ok(corpus)
}
