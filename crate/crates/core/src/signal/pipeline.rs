use std::collections::BTreeMap;

use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::bands::{Band, BandSpec};
use super::features::{average_subjects, extract_word_features_multi, ExtractOptions, ExtractStats, FeatureSet, WordFeatureMatrix};
use super::gaze::extract_gaze_features;
use super::spectral::SpectralWorkspace;
use crate::corpus::{Corpus, EegRecording, FixationEvent, SyntheticCorpus, MIN_FIXATION_MS};
use crate::error::{Error, Result};

/// What to do when a (sentence, subject) recording is absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissingEeg {
    /// Log a warning and leave that subject out of the average.
    #[default]
    Warn,
    Error,
}

/// Word-level features for a whole corpus, keyed by feature set, in sentence order.
#[derive(Debug, Clone, Default)]
pub struct FeatureTable {
    pub sets: BTreeMap<FeatureSet, Vec<WordFeatureMatrix<f32>>>,
    pub stats: ExtractStats,
    /// (sentence, subject) pairs without a recording.
    pub missing_eeg: Vec<(String, String)>,
}

/// One subject's reading of a sentence.
pub struct SubjectReading {
    pub subject_id: String,
    pub recording: Option<EegRecording>,
    pub fixations: Vec<FixationEvent>,
}

struct SentenceOut {
    eeg: Vec<WordFeatureMatrix<f32>>,
    gaze: WordFeatureMatrix<f32>,
    stats: ExtractStats,
    missing: Vec<(String, String)>,
}

fn sentence_features(
    sentence_id: &str,
    n_tokens: usize,
    readings: &[SubjectReading],
    bands: &[BandSpec],
    opts: &ExtractOptions,
    ws: &mut SpectralWorkspace<f64>,
) -> Result<SentenceOut> {
    let mut stats = ExtractStats::default();
    let mut per_band: Vec<Vec<WordFeatureMatrix<f64>>> = vec![Vec::new(); bands.len()];
    let mut missing = Vec::new();
    for r in readings {
        match &r.recording {
            Some(rec) => {
                let (ms, s) = extract_word_features_multi(rec, &r.fixations, n_tokens, bands, opts, ws)?;
                stats += s;
                for (dst, m) in per_band.iter_mut().zip(ms) {
                    dst.push(m);
                }
            }
            None => missing.push((sentence_id.to_string(), r.subject_id.clone())),
        }
    }
    let eeg = bands
        .iter()
        .zip(&per_band)
        .map(|(b, ms)| {
            if ms.is_empty() {
                Ok(WordFeatureMatrix::empty(sentence_id, FeatureSet::Eeg(b.band), n_tokens, 0))
            } else {
                Ok(average_subjects(ms)?.cast())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let fix: Vec<&[FixationEvent]> = readings.iter().map(|r| r.fixations.as_slice()).collect();
    Ok(SentenceOut {
        eeg,
        gaze: extract_gaze_features(sentence_id, n_tokens, &fix),
        stats,
        missing,
    })
}

fn collect(bands: &[Band], outs: Vec<SentenceOut>, channels: usize) -> FeatureTable {
    let mut table = FeatureTable::default();
    let mut gaze = Vec::with_capacity(outs.len());
    let mut eeg: Vec<Vec<WordFeatureMatrix<f32>>> = vec![Vec::with_capacity(outs.len()); bands.len()];
    for o in outs {
        table.stats += o.stats;
        table.missing_eeg.extend(o.missing);
        gaze.push(o.gaze);
        for (dst, mut m) in eeg.iter_mut().zip(o.eeg) {
            if m.dim() == 0 {
                // nobody's recording survived: a fully masked row block of the usual width
                m = WordFeatureMatrix::empty(&m.sentence_id, m.feature, m.tokens(), channels);
            }
            dst.push(m);
        }
    }
    table.sets.insert(FeatureSet::Gaze, gaze);
    for (b, v) in bands.iter().zip(eeg) {
        table.sets.insert(FeatureSet::Eeg(*b), v);
    }
    table
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}

/// Extracts band and gaze features for every sentence of a loaded corpus.
pub fn extract_corpus(
    corpus: &Corpus,
    bands: &[Band],
    opts: &ExtractOptions,
    missing: MissingEeg,
    threads: usize,
) -> Result<FeatureTable> {
    let specs: Vec<BandSpec> = bands.iter().map(|b| b.spec()).collect();
    let outs = pool(threads)?.install(|| {
        corpus
            .sentences
            .par_iter()
            .map_init(SpectralWorkspace::new, |ws, s| {
                let readings = corpus
                    .subjects
                    .iter()
                    .map(|subj| {
                        let recording = corpus.recording(&s.id, subj)?;
                        if recording.is_none() && missing == MissingEeg::Error {
                            return Err(Error::Missing(vec![corpus.eeg_path(&s.id, subj)]));
                        }
                        Ok(SubjectReading {
                            subject_id: subj.clone(),
                            recording,
                            fixations: corpus.fixations_for(&s.id, subj).to_vec(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                sentence_features(&s.id, s.tokens.len(), &readings, &specs, opts, ws)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let table = collect(bands, outs, corpus.manifest.channels.unwrap_or(105));
    for (s, subj) in &table.missing_eeg {
        log::warn!("no EEG recording for {s}/{subj}; subject left out of the average");
    }
    Ok(table)
}

/// Same as [`extract_corpus`] but generates the synthetic recordings in memory.
/// Fixations shorter than the load-time floor are dropped, as on load.
pub fn extract_synthetic(
    corpus: &SyntheticCorpus,
    bands: &[Band],
    opts: &ExtractOptions,
    threads: usize,
) -> Result<FeatureTable> {
    let specs: Vec<BandSpec> = bands.iter().map(|b| b.spec()).collect();
    let subjects = corpus.subjects();
    let outs = pool(threads)?.install(|| {
        (0..corpus.sentences.len())
            .into_par_iter()
            .map_init(
                || (SpectralWorkspace::new(), FftPlanner::new()),
                |(ws, planner), i| {
                    let s = &corpus.sentences[i].sentence;
                    let readings: Vec<SubjectReading> = subjects
                        .iter()
                        .enumerate()
                        .map(|(j, subj)| {
                            let all = corpus.fixations(i, j);
                            let recording = corpus.recording(i, j, &all, planner);
                            SubjectReading {
                                subject_id: subj.clone(),
                                recording: Some(recording),
                                fixations: all.into_iter().filter(|f| f.duration_ms >= MIN_FIXATION_MS).collect(),
                            }
                        })
                        .collect();
                    sentence_features(&s.id, s.tokens.len(), &readings, &specs, opts, ws)
                },
            )
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(collect(bands, outs, corpus.config.channels))
}
