use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::hash::{Hash, Hasher};

use ndarray::{s, Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::corpus::{stratum_of, EmbeddingKind, EmbeddingTable, Relation, Sentence};
use crate::error::{Error, Result};
use crate::model::{make_noise_features, Batch, Decision, Head, Modality, Targets, TextInput, NOISE_DIM};
use crate::signal::{FeatureTable, WordFeatureMatrix};

/// The classification tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    /// Negative vs positive; neutral sentences are left out.
    BinarySentiment,
    TernarySentiment,
    /// Multi-label over the eleven relation types.
    RelationDetection,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::BinarySentiment => "binary-sentiment",
            TaskKind::TernarySentiment => "ternary-sentiment",
            TaskKind::RelationDetection => "relation-detection",
        }
    }

    pub fn head(self) -> Head {
        match self {
            TaskKind::BinarySentiment => Head::Softmax { classes: 2 },
            TaskKind::TernarySentiment => Head::Softmax { classes: 3 },
            TaskKind::RelationDetection => Head::Sigmoid { labels: Relation::ALL.len() },
        }
    }

    /// Target for a sentence, or `None` when the sentence is not part of the task.
    pub fn target(self, s: &Sentence) -> Option<Decision> {
        match self {
            TaskKind::BinarySentiment => s.labels.sentiment.and_then(|c| c.class_index(2)).map(Decision::Class),
            TaskKind::TernarySentiment => s.labels.sentiment.and_then(|c| c.class_index(3)).map(Decision::Class),
            TaskKind::RelationDetection => s
                .labels
                .relations
                .as_ref()
                .map(|set| Decision::Labels(set.iter().map(|r| r.index()).collect())),
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary-sentiment" => Ok(TaskKind::BinarySentiment),
            "ternary-sentiment" => Ok(TaskKind::TernarySentiment),
            "relation-detection" => Ok(TaskKind::RelationDetection),
            _ => Err(Error::invalid(format!("unknown task {s:?}"))),
        }
    }
}

/// Text side of the dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum TextSource {
    /// Token ids; the table is the initial embedding matrix (random init when `None`).
    Vocab {
        words: Vec<String>,
        ids: Vec<Vec<usize>>,
        kind: EmbeddingKind,
        dim: usize,
        table: Option<Array2<f32>>,
    },
    /// Frozen precomputed vectors per sentence.
    Contextual { dim: usize, vectors: Vec<Array2<f32>> },
}

/// In-memory examples for one task: text, targets and word-level features.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub head: Head,
    pub ids: Vec<String>,
    pub strata: Vec<usize>,
    pub targets: Vec<Decision>,
    pub lengths: Vec<usize>,
    pub max_len: usize,
    pub text: TextSource,
    pub features: BTreeMap<Modality, Vec<WordFeatureMatrix<f32>>>,
}

impl Dataset {
    /// Sentences that carry a target for `task`, with random embeddings of width `dim`.
    pub fn from_sentences(sentences: &[Sentence], task: TaskKind, dim: usize) -> Result<Self> {
        let labelled: Vec<(&Sentence, Decision)> =
            sentences.iter().filter_map(|s| task.target(s).map(|t| (s, t))).collect();
        let strata = labelled.iter().map(|(s, _)| stratum_of(s)).collect();
        Self::build(labelled, strata, task.head(), dim)
    }

    /// Explicit (id, class) targets over a subset of `sentences`, e.g. one-vs-none relation tasks.
    pub fn from_labelled(sentences: &[Sentence], labels: &[(String, usize)], classes: usize, dim: usize) -> Result<Self> {
        let by_id: BTreeMap<&str, &Sentence> = sentences.iter().map(|s| (s.id.as_str(), s)).collect();
        let mut labelled = Vec::with_capacity(labels.len());
        for (id, c) in labels {
            let s = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::invalid(format!("labelled sentence {id} not in corpus")))?;
            labelled.push((*s, Decision::Class(*c)));
        }
        let strata = labels.iter().map(|(_, c)| *c).collect();
        Self::build(labelled, strata, Head::Softmax { classes }, dim)
    }

    fn build(labelled: Vec<(&Sentence, Decision)>, strata: Vec<usize>, head: Head, dim: usize) -> Result<Self> {
        if labelled.is_empty() {
            return Err(Error::invalid("no sentences carry labels for this task"));
        }
        let words: Vec<String> = labelled
            .iter()
            .flat_map(|(s, _)| s.tokens.iter().cloned())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: BTreeMap<&str, usize> = words.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let ids = labelled
            .iter()
            .map(|(s, _)| s.tokens.iter().map(|t| index[t.as_str()]).collect())
            .collect();
        let lengths: Vec<usize> = labelled.iter().map(|(s, _)| s.tokens.len()).collect();
        Ok(Dataset {
            head,
            ids: labelled.iter().map(|(s, _)| s.id.clone()).collect(),
            strata,
            targets: labelled.into_iter().map(|(_, t)| t).collect(),
            max_len: lengths.iter().copied().max().unwrap_or(1),
            lengths,
            text: TextSource::Vocab {
                words,
                ids,
                kind: EmbeddingKind::Random,
                dim,
                table: None,
            },
            features: BTreeMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn text_dim(&self) -> usize {
        match &self.text {
            TextSource::Vocab { dim, .. } | TextSource::Contextual { dim, .. } => *dim,
        }
    }

    pub fn vocab_size(&self) -> Option<usize> {
        match &self.text {
            TextSource::Vocab { words, .. } => Some(words.len()),
            TextSource::Contextual { .. } => None,
        }
    }

    pub fn embedding_kind(&self) -> EmbeddingKind {
        match &self.text {
            TextSource::Vocab { kind, .. } => *kind,
            TextSource::Contextual { .. } => EmbeddingKind::Contextual,
        }
    }

    /// Uses pretrained vectors: static tables become the frozen initial
    /// embedding matrix (OOV rows zero), contextual tables replace token ids.
    /// Returns the number of out-of-vocabulary word types.
    pub fn use_embeddings(&mut self, table: &EmbeddingTable, sentences: &[Sentence]) -> Result<usize> {
        match table.kind {
            EmbeddingKind::Random => Err(Error::invalid("random embeddings are initialized by the model")),
            EmbeddingKind::Static => {
                let TextSource::Vocab { words, ids, .. } = &self.text else {
                    return Err(Error::invalid("dataset already uses contextual vectors"));
                };
                let mut m = Array2::zeros((words.len(), table.dim));
                let mut oov = 0;
                for (i, w) in words.iter().enumerate() {
                    match table.lookup(w) {
                        Some(v) => m.row_mut(i).assign(&v),
                        None => oov += 1,
                    }
                }
                self.text = TextSource::Vocab {
                    words: words.clone(),
                    ids: ids.clone(),
                    kind: EmbeddingKind::Static,
                    dim: table.dim,
                    table: Some(m),
                };
                Ok(oov)
            }
            EmbeddingKind::Contextual => {
                let by_id: BTreeMap<&str, &Sentence> = sentences.iter().map(|s| (s.id.as_str(), s)).collect();
                let vectors = self
                    .ids
                    .iter()
                    .map(|id| {
                        let s = by_id
                            .get(id.as_str())
                            .ok_or_else(|| Error::invalid(format!("sentence {id} not in corpus")))?;
                        Ok(table.embed_sentence(s)?.0)
                    })
                    .collect::<Result<Vec<_>>>()?;
                self.text = TextSource::Contextual { dim: table.dim, vectors };
                Ok(0)
            }
        }
    }

    /// Attaches word-level features; every example needs a matrix of matching length.
    pub fn add_features(&mut self, modality: Modality, matrices: Vec<WordFeatureMatrix<f32>>) -> Result<()> {
        let mut by_id: BTreeMap<String, WordFeatureMatrix<f32>> =
            matrices.into_iter().map(|m| (m.sentence_id.clone(), m)).collect();
        let mut missing = Vec::new();
        let mut out = Vec::with_capacity(self.len());
        for (id, &len) in self.ids.iter().zip(&self.lengths) {
            match by_id.remove(id) {
                Some(m) if m.tokens() == len => out.push(m),
                Some(m) => {
                    return Err(Error::invalid(format!(
                        "{modality} features for {id} have {} rows, sentence has {len} tokens",
                        m.tokens()
                    )))
                }
                None => missing.push(id.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::invalid(format!(
                "{modality} features missing for {} sentences: {}",
                missing.len(),
                missing.join(", ")
            )));
        }
        self.features.insert(modality, out);
        Ok(())
    }

    /// Attaches every feature set of an extraction run.
    pub fn add_feature_table(&mut self, table: &FeatureTable) -> Result<()> {
        for (set, matrices) in &table.sets {
            self.add_features(Modality::from(*set), matrices.clone())?;
        }
        Ok(())
    }

    pub fn feature_dim(&self, modality: Modality) -> Result<usize> {
        match modality {
            Modality::Noise => Ok(NOISE_DIM),
            Modality::Text => Ok(self.text_dim()),
            m => self
                .features
                .get(&m)
                .and_then(|v| v.first())
                .map(|f| f.dim())
                .ok_or_else(|| Error::invalid(format!("dataset has no {m} features"))),
        }
    }

    /// Indices of the given ids, in the given order.
    pub fn indices_of(&self, ids: &[String]) -> Result<Vec<usize>> {
        let pos: BTreeMap<&str, usize> = self.ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        ids.iter()
            .map(|id| {
                pos.get(id.as_str())
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("unknown sentence id {id}")))
            })
            .collect()
    }

    /// Keeps only the listed examples (in dataset order).
    pub fn restrict(&self, keep: &BTreeSet<String>) -> Dataset {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| keep.contains(&self.ids[i])).collect();
        let pick = |v: &Vec<WordFeatureMatrix<f32>>| idx.iter().map(|&i| v[i].clone()).collect::<Vec<_>>();
        Dataset {
            head: self.head,
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            strata: idx.iter().map(|&i| self.strata[i]).collect(),
            targets: idx.iter().map(|&i| self.targets[i].clone()).collect(),
            lengths: idx.iter().map(|&i| self.lengths[i]).collect(),
            max_len: self.max_len,
            text: match &self.text {
                TextSource::Vocab {
                    words,
                    ids,
                    kind,
                    dim,
                    table,
                } => TextSource::Vocab {
                    words: words.clone(),
                    ids: idx.iter().map(|&i| ids[i].clone()).collect(),
                    kind: *kind,
                    dim: *dim,
                    table: table.clone(),
                },
                TextSource::Contextual { dim, vectors } => TextSource::Contextual {
                    dim: *dim,
                    vectors: idx.iter().map(|&i| vectors[i].clone()).collect(),
                },
            },
            features: self.features.iter().map(|(k, v)| (*k, pick(v))).collect(),
        }
    }
}

/// Per-column z-scoring fitted on the fixated rows of the fit examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(matrices: &[&WordFeatureMatrix<f32>]) -> Self {
        let dim = matrices.first().map_or(0, |m| m.dim());
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        let mut n = 0usize;
        for m in matrices {
            for (row, &keep) in m.rows.rows().into_iter().zip(&m.mask) {
                if keep {
                    n += 1;
                    for (j, &v) in row.iter().enumerate() {
                        sum[j] += v as f64;
                        sq[j] += (v as f64) * (v as f64);
                    }
                }
            }
        }
        let nf = n.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let scale = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / nf - m * m).max(0.0);
                if var > 1e-12 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    /// Padded `[max_len, dim]` copy with fixated rows standardized, others zero.
    pub fn apply(&self, m: &WordFeatureMatrix<f32>, max_len: usize) -> Array2<f32> {
        let mut out = Array2::zeros((max_len, m.dim()));
        for (t, (row, &keep)) in m.rows.rows().into_iter().zip(&m.mask).enumerate() {
            if keep {
                for (j, &v) in row.iter().enumerate() {
                    out[[t, j]] = ((v as f64 - self.mean[j]) / self.scale[j]) as f32;
                }
            }
        }
        out
    }
}

/// Which part of a split a read belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Fit,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessEntry {
    pub phase: Phase,
    /// Set once training has finished.
    pub sealed: bool,
    pub examples: Vec<usize>,
    /// Hash over the ids read.
    pub digest: u64,
}

/// Fit/validation/test indices behind an access check: test examples can
/// only be read after [`GuardedFold::seal`], and every read is logged.
#[derive(Debug, Clone)]
pub struct GuardedFold {
    fit: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
    sealed: bool,
    log: Vec<AccessEntry>,
}

impl GuardedFold {
    pub fn new(fit: Vec<usize>, val: Vec<usize>, test: Vec<usize>) -> Result<Self> {
        if fit.is_empty() || val.is_empty() || test.is_empty() {
            return Err(Error::invalid(format!(
                "empty fold: {} fit, {} validation, {} test examples",
                fit.len(),
                val.len(),
                test.len()
            )));
        }
        let f: BTreeSet<_> = fit.iter().collect();
        let v: BTreeSet<_> = val.iter().collect();
        let t: BTreeSet<_> = test.iter().collect();
        if !f.is_disjoint(&v) || !f.is_disjoint(&t) || !v.is_disjoint(&t) {
            return Err(Error::invalid("fit, validation and test examples overlap"));
        }
        Ok(GuardedFold {
            fit,
            val,
            test,
            sealed: false,
            log: Vec::new(),
        })
    }

    pub fn read(&mut self, phase: Phase, data: &Dataset) -> Result<Vec<usize>> {
        let rows = match phase {
            Phase::Fit => &self.fit,
            Phase::Validation => &self.val,
            Phase::Test if !self.sealed => {
                return Err(Error::invalid("test examples requested before training finished"))
            }
            Phase::Test => &self.test,
        };
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for &i in rows {
            data.ids[i].hash(&mut h);
        }
        self.log.push(AccessEntry {
            phase,
            sealed: self.sealed,
            examples: rows.clone(),
            digest: h.finish(),
        });
        Ok(rows.clone())
    }

    /// Ends training; unlocks the test examples.
    pub fn seal(&mut self) {
        self.sealed = true;
    }

    pub fn log(&self) -> &[AccessEntry] {
        &self.log
    }

    pub fn test_len(&self) -> usize {
        self.test.len()
    }
}

/// Second-modality features for one fold, standardized with fit statistics.
pub struct FoldFeatures {
    modalities: Vec<Modality>,
    /// Per modality, per example `[max_len, dim]`; empty for noise.
    padded: Vec<Vec<Array2<f32>>>,
}

impl FoldFeatures {
    pub fn prepare(data: &Dataset, modalities: &[Modality], fit: &[usize]) -> Result<Self> {
        let mut padded = Vec::with_capacity(modalities.len());
        for &m in modalities {
            if m == Modality::Noise {
                padded.push(Vec::new());
                continue;
            }
            let all = data
                .features
                .get(&m)
                .ok_or_else(|| Error::invalid(format!("dataset has no {m} features")))?;
            let fit_rows: Vec<&WordFeatureMatrix<f32>> = fit.iter().map(|&i| &all[i]).collect();
            let st = Standardizer::fit(&fit_rows);
            padded.push(all.iter().map(|f| st.apply(f, data.max_len)).collect());
        }
        Ok(FoldFeatures {
            modalities: modalities.to_vec(),
            padded,
        })
    }

    /// Assembles a batch. `noise_seed` feeds the noise towers' generator.
    pub fn batch(&self, data: &Dataset, rows: &[usize], noise_seed: (u64, usize)) -> Batch<f32> {
        let (b, l) = (rows.len(), data.max_len);
        let mut mask = Array2::from_elem((b, l), false);
        for (k, &i) in rows.iter().enumerate() {
            mask.slice_mut(s![k, ..data.lengths[i]]).fill(true);
        }
        let text = match &data.text {
            TextSource::Vocab { ids, .. } => {
                let mut m = Array2::zeros((b, l));
                for (k, &i) in rows.iter().enumerate() {
                    for (t, &id) in ids[i].iter().enumerate() {
                        m[[k, t]] = id;
                    }
                }
                TextInput::Ids(m)
            }
            TextSource::Contextual { dim, vectors } => {
                let mut x = Array3::zeros((b, l, *dim));
                for (k, &i) in rows.iter().enumerate() {
                    let v = &vectors[i];
                    x.slice_mut(s![k, ..v.nrows(), ..]).assign(v);
                }
                TextInput::Vectors(x)
            }
        };
        let extra = self
            .modalities
            .iter()
            .zip(&self.padded)
            .map(|(&m, padded)| {
                if m == Modality::Noise {
                    make_noise_features(&mask, noise_seed.0, noise_seed.1)
                } else {
                    let dim = padded[0].ncols();
                    let mut x = Array3::zeros((b, l, dim));
                    for (k, &i) in rows.iter().enumerate() {
                        x.slice_mut(s![k, .., ..]).assign(&padded[i]);
                    }
                    x
                }
            })
            .collect();
        let targets = match data.head {
            Head::Softmax { .. } => Targets::Classes(
                rows.iter()
                    .map(|&i| match &data.targets[i] {
                        Decision::Class(c) => *c,
                        Decision::Labels(_) => unreachable!("softmax head with label-set targets"),
                    })
                    .collect(),
            ),
            Head::Sigmoid { labels } => {
                let mut y = Array2::zeros((b, labels));
                for (k, &i) in rows.iter().enumerate() {
                    if let Decision::Labels(set) = &data.targets[i] {
                        for &c in set {
                            y[[k, c]] = 1.0;
                        }
                    }
                }
                Targets::Labels(y)
            }
        };
        Batch {
            text,
            mask,
            extra,
            targets,
        }
    }
}
