use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::types::{EegRecording, FixationEvent, Relation, Sentence, Sentiment, TaskLabels};
use super::MIN_FIXATION_MS;
use crate::error::{Error, Result};

pub const SENTENCES_FILE: &str = "sentences.jsonl";
pub const FIXATIONS_FILE: &str = "fixations.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const EEG_DIR: &str = "eeg";

const EEG_MAGIC: &[u8; 4] = b"EEGB";
const EEG_VERSION: u32 = 1;

/// Counts collected while loading a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub sentences: usize,
    pub fixations_kept: usize,
    pub fixations_dropped_short: usize,
}

/// Optional corpus-level metadata written next to the data files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub task: Option<String>,
    #[serde(default)]
    pub subjects: Vec<String>,
    #[serde(default)]
    pub channels: Option<usize>,
    #[serde(default)]
    pub sample_rate_hz: Option<u32>,
}

/// A loaded corpus. Sentences and fixations live in memory; EEG recordings
/// are read from disk on demand since they dominate the corpus size.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub root: PathBuf,
    pub sentences: Vec<Sentence>,
    /// Fixations keyed by (sentence id, subject id), ordered by onset.
    pub fixations: BTreeMap<(String, String), Vec<FixationEvent>>,
    pub subjects: Vec<String>,
    pub manifest: Manifest,
    pub report: LoadReport,
}

impl Corpus {
    pub fn sentence(&self, id: &str) -> Option<&Sentence> {
        self.sentences.iter().find(|s| s.id == id)
    }

    pub fn fixations_for(&self, sentence_id: &str, subject_id: &str) -> &[FixationEvent] {
        self.fixations
            .get(&(sentence_id.to_owned(), subject_id.to_owned()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn eeg_path(&self, sentence_id: &str, subject_id: &str) -> PathBuf {
        self.root
            .join(EEG_DIR)
            .join(eeg_file_name(sentence_id, subject_id))
    }

    /// Reads the recording for (sentence, subject); `Ok(None)` if no file exists.
    pub fn recording(&self, sentence_id: &str, subject_id: &str) -> Result<Option<EegRecording>> {
        let path = self.eeg_path(sentence_id, subject_id);
        if !path.exists() {
            return Ok(None);
        }
        read_eeg(&path, sentence_id, subject_id).map(Some)
    }
}

pub fn eeg_file_name(sentence_id: &str, subject_id: &str) -> String {
    format!("{sentence_id}__{subject_id}.eegb")
}

#[derive(Deserialize)]
struct SentenceLine {
    id: String,
    tokens: Vec<String>,
    #[serde(default)]
    labels: LabelLine,
}

#[derive(Default, Deserialize)]
struct LabelLine {
    #[serde(default)]
    sentiment: Option<Sentiment>,
    #[serde(default)]
    relations: Option<Vec<String>>,
}

#[derive(Serialize)]
struct SentenceOut<'a> {
    id: &'a str,
    tokens: &'a [String],
    labels: LabelOut<'a>,
}

#[derive(Serialize)]
struct LabelOut<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    sentiment: Option<Sentiment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    relations: Option<Vec<&'a str>>,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read_jsonl<T, F>(path: &Path, mut each: F) -> Result<()>
where
    T: for<'de> Deserialize<'de>,
    F: FnMut(usize, T) -> Result<()>,
{
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: T =
            serde_json::from_str(&line).map_err(|e| parse_err(path, lineno, e.to_string()))?;
        each(lineno, value)?;
    }
    Ok(())
}

fn parse_sentence(path: &Path, lineno: usize, raw: SentenceLine) -> Result<Sentence> {
    let relations = match raw.labels.relations {
        None => None,
        Some(names) => {
            let mut set = BTreeSet::new();
            for name in names {
                let rel: Relation = name
                    .parse()
                    .map_err(|e: Error| parse_err(path, lineno, e.to_string()))?;
                if !set.insert(rel) {
                    return Err(parse_err(path, lineno, format!("duplicate relation {name}")));
                }
            }
            Some(set)
        }
    };
    let sentence = Sentence {
        id: raw.id,
        tokens: raw.tokens,
        labels: TaskLabels {
            sentiment: raw.labels.sentiment,
            relations,
        },
    };
    sentence
        .validate()
        .map_err(|e| parse_err(path, lineno, e.to_string()))?;
    Ok(sentence)
}

/// Loads sentences, fixations and the EEG file index from `dir`.
///
/// Fixations shorter than [`MIN_FIXATION_MS`] are dropped and counted.
pub fn load_corpus(dir: impl AsRef<Path>) -> Result<Corpus> {
    let root = dir.as_ref().to_path_buf();
    let manifest_path = root.join(MANIFEST_FILE);
    let manifest: Manifest = if manifest_path.exists() {
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        serde_json::from_str(&text).map_err(|e| parse_err(&manifest_path, 1, e.to_string()))?
    } else {
        Manifest::default()
    };

    let sent_path = root.join(SENTENCES_FILE);
    let mut sentences = Vec::new();
    let mut token_counts = BTreeMap::new();
    read_jsonl(&sent_path, |lineno, raw: SentenceLine| {
        let s = parse_sentence(&sent_path, lineno, raw)?;
        if token_counts.insert(s.id.clone(), s.tokens.len()).is_some() {
            return Err(parse_err(&sent_path, lineno, format!("duplicate sentence id {}", s.id)));
        }
        sentences.push(s);
        Ok(())
    })?;

    let fix_path = root.join(FIXATIONS_FILE);
    let mut fixations: BTreeMap<(String, String), Vec<FixationEvent>> = BTreeMap::new();
    let mut report = LoadReport {
        sentences: sentences.len(),
        ..LoadReport::default()
    };
    let mut subjects = BTreeSet::new();
    read_jsonl(&fix_path, |lineno, fix: FixationEvent| {
        let Some(&n_tokens) = token_counts.get(&fix.sentence_id) else {
            return Err(parse_err(
                &fix_path,
                lineno,
                format!("unknown sentence id {}", fix.sentence_id),
            ));
        };
        if fix.word_index >= n_tokens {
            return Err(parse_err(
                &fix_path,
                lineno,
                format!(
                    "word_index {} out of range for sentence {} ({} tokens)",
                    fix.word_index, fix.sentence_id, n_tokens
                ),
            ));
        }
        if !(fix.onset_ms >= 0.0 && fix.onset_ms.is_finite()) || !(fix.duration_ms > 0.0) {
            return Err(parse_err(&fix_path, lineno, "onset must be >= 0 and duration > 0"));
        }
        subjects.insert(fix.subject_id.clone());
        if fix.duration_ms < MIN_FIXATION_MS {
            report.fixations_dropped_short += 1;
            return Ok(());
        }
        report.fixations_kept += 1;
        fixations
            .entry((fix.sentence_id.clone(), fix.subject_id.clone()))
            .or_default()
            .push(fix);
        Ok(())
    })?;
    for events in fixations.values_mut() {
        events.sort_by(|a, b| a.onset_ms.total_cmp(&b.onset_ms));
    }
    subjects.extend(manifest.subjects.iter().cloned());

    Ok(Corpus {
        root,
        sentences,
        fixations,
        subjects: subjects.into_iter().collect(),
        manifest,
        report,
    })
}

/// Writes the sentence and fixation files and the manifest. EEG files are
/// written separately with [`write_eeg`].
pub fn write_corpus_files(
    dir: &Path,
    sentences: &[Sentence],
    fixations: &[FixationEvent],
    manifest: &Manifest,
) -> Result<()> {
    fs::create_dir_all(dir.join(EEG_DIR)).map_err(|e| Error::io(dir, e))?;

    let path = dir.join(SENTENCES_FILE);
    let mut out = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
    for s in sentences {
        let rel: Option<Vec<&str>> = s
            .labels
            .relations
            .as_ref()
            .map(|set| set.iter().map(|r| r.name()).collect());
        let line = SentenceOut {
            id: &s.id,
            tokens: &s.tokens,
            labels: LabelOut {
                sentiment: s.labels.sentiment,
                relations: rel,
            },
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    }
    out.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(FIXATIONS_FILE);
    let mut out = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
    for f in fixations {
        serde_json::to_writer(&mut out, f)?;
        out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
    }
    out.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Serializes a recording in the EEGB layout: magic, version, channels,
/// sample rate, sample count, then channel-major little-endian `f32`.
pub fn write_eeg(path: &Path, rec: &EegRecording) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let mut header = Vec::with_capacity(24);
    header.extend_from_slice(EEG_MAGIC);
    header.extend_from_slice(&EEG_VERSION.to_le_bytes());
    header.extend_from_slice(&(rec.channels() as u32).to_le_bytes());
    header.extend_from_slice(&rec.sample_rate_hz.to_le_bytes());
    header.extend_from_slice(&(rec.len() as u64).to_le_bytes());
    out.write_all(&header).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::with_capacity(rec.samples.len() * 4);
    for row in rec.samples.rows() {
        for v in row {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf).map_err(|e| Error::io(path, e))?;
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_eeg(path: &Path, sentence_id: &str, subject_id: &str) -> Result<EegRecording> {
    let fmt_err = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 24 {
        return Err(fmt_err(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != EEG_MAGIC {
        return Err(fmt_err(format!("bad magic bytes {:?}", &bytes[0..4])));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != EEG_VERSION {
        return Err(fmt_err(format!("unsupported version {version}")));
    }
    let channels = u32_at(8) as usize;
    let sample_rate_hz = u32_at(12);
    let n_samples = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let expected = channels
        .checked_mul(n_samples)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| fmt_err("header sizes overflow".into()))?;
    let body = &bytes[24..];
    if body.len() != expected {
        return Err(fmt_err(format!(
            "expected {expected} data bytes for {channels}x{n_samples}, found {}",
            body.len()
        )));
    }
    let values: Vec<f32> = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let samples = Array2::from_shape_vec((channels, n_samples), values)
        .map_err(|e| fmt_err(e.to_string()))?;
    Ok(EegRecording {
        sentence_id: sentence_id.to_owned(),
        subject_id: subject_id.to_owned(),
        sample_rate_hz,
        samples,
    })
}
