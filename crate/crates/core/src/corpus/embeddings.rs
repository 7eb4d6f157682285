use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::types::Sentence;
use crate::error::{Error, Result};

/// Half-width of the uniform distribution used for random embeddings.
pub const RANDOM_INIT_RANGE: f32 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingKind {
    /// Randomly initialized, trained with the model.
    Random,
    /// Pre-trained word vectors, frozen.
    Static,
    /// Precomputed per-token contextual vectors, frozen.
    Contextual,
}

impl EmbeddingKind {
    pub fn default_dim(self) -> usize {
        match self {
            EmbeddingKind::Random => 32,
            EmbeddingKind::Static => 300,
            EmbeddingKind::Contextual => 768,
        }
    }

    pub fn trainable(self) -> bool {
        matches!(self, EmbeddingKind::Random)
    }
}

impl std::str::FromStr for EmbeddingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(EmbeddingKind::Random),
            "static" | "glove" => Ok(EmbeddingKind::Static),
            "contextual" | "bert" => Ok(EmbeddingKind::Contextual),
            _ => Err(Error::invalid(format!("unknown embedding kind {s:?}"))),
        }
    }
}

/// Word vectors keyed either by token (random/static) or by
/// (sentence id, word index) for contextual vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub kind: EmbeddingKind,
    pub dim: usize,
    pub trainable: bool,
    words: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Array2<f32>,
    contextual: HashMap<String, Array2<f32>>,
}

impl EmbeddingTable {
    pub fn vocab_size(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn token_id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Vector matrix for token-keyed tables (vocab × dim).
    pub fn matrix(&self) -> &Array2<f32> {
        &self.vectors
    }

    pub fn lookup(&self, token: &str) -> Option<ArrayView1<'_, f32>> {
        self.token_id(token).map(|i| self.vectors.row(i))
    }

    /// Per-token vectors for a sentence (tokens × dim) and the number of
    /// out-of-vocabulary tokens, which map to the zero vector.
    pub fn embed_sentence(&self, sentence: &Sentence) -> Result<(Array2<f32>, usize)> {
        let n = sentence.tokens.len();
        if self.kind == EmbeddingKind::Contextual {
            let m = self.contextual.get(&sentence.id).ok_or_else(|| {
                Error::invalid(format!("no contextual vectors for sentence {}", sentence.id))
            })?;
            if m.nrows() != n {
                return Err(Error::invalid(format!(
                    "sentence {} has {n} tokens but {} contextual vectors",
                    sentence.id,
                    m.nrows()
                )));
            }
            return Ok((m.clone(), 0));
        }
        let mut out = Array2::zeros((n, self.dim));
        let mut oov = 0;
        for (i, tok) in sentence.tokens.iter().enumerate() {
            match self.lookup(tok) {
                Some(v) => out.row_mut(i).assign(&v),
                None => oov += 1,
            }
        }
        Ok((out, oov))
    }

    /// Contextual vectors for a sentence, if present.
    pub fn contextual_for(&self, sentence_id: &str) -> Option<&Array2<f32>> {
        self.contextual.get(sentence_id)
    }
}

/// Draws a `vocab.len() × dim` table i.i.d. from U(-0.05, 0.05).
pub fn init_random_embeddings(vocab: &[String], dim: usize, seed: u64) -> Result<EmbeddingTable> {
    if vocab.is_empty() {
        return Err(Error::invalid("empty vocabulary"));
    }
    if dim == 0 {
        return Err(Error::invalid("embedding dimension must be positive"));
    }
    let mut index = HashMap::with_capacity(vocab.len());
    for (i, w) in vocab.iter().enumerate() {
        if index.insert(w.clone(), i).is_some() {
            return Err(Error::invalid(format!("duplicate vocabulary entry {w:?}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vectors = Array2::from_shape_simple_fn((vocab.len(), dim), || {
        rng.gen_range(-RANDOM_INIT_RANGE..=RANDOM_INIT_RANGE)
    });
    Ok(EmbeddingTable {
        kind: EmbeddingKind::Random,
        dim,
        trainable: true,
        words: vocab.to_vec(),
        index,
        vectors,
        contextual: HashMap::new(),
    })
}

#[derive(Deserialize)]
struct ContextualLine {
    sentence_id: String,
    vectors: Vec<Vec<f32>>,
}

/// Loads a static (text) or contextual (JSON lines) embedding file.
pub fn load_embeddings(path: &Path, kind: EmbeddingKind, dim: usize) -> Result<EmbeddingTable> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match kind {
        EmbeddingKind::Random => Err(Error::invalid(
            "random embeddings are initialized, not loaded",
        )),
        EmbeddingKind::Static => {
            let mut words = Vec::new();
            let mut index = HashMap::new();
            let mut flat = Vec::new();
            for (i, line) in reader.lines().enumerate() {
                let lineno = i + 1;
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let mut parts = line.split_whitespace();
                let token = parts.next().unwrap_or_default().to_owned();
                let values = parts
                    .map(|p| {
                        p.parse::<f32>()
                            .map_err(|e| parse_err(lineno, format!("bad float {p:?}: {e}")))
                    })
                    .collect::<Result<Vec<f32>>>()?;
                if values.len() != dim {
                    return Err(parse_err(
                        lineno,
                        format!("expected {dim} values for {token:?}, found {}", values.len()),
                    ));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(parse_err(lineno, "non-finite value".into()));
                }
                if index.contains_key(&token) {
                    continue;
                }
                index.insert(token.clone(), words.len());
                words.push(token);
                flat.extend(values);
            }
            let vectors = Array2::from_shape_vec((words.len(), dim), flat)
                .map_err(|e| Error::invalid(e.to_string()))?;
            Ok(EmbeddingTable {
                kind,
                dim,
                trainable: false,
                words,
                index,
                vectors,
                contextual: HashMap::new(),
            })
        }
        EmbeddingKind::Contextual => {
            let mut contextual = HashMap::new();
            for (i, line) in reader.lines().enumerate() {
                let lineno = i + 1;
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: ContextualLine =
                    serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
                let n = rec.vectors.len();
                let mut flat = Vec::with_capacity(n * dim);
                for (w, v) in rec.vectors.into_iter().enumerate() {
                    if v.len() != dim {
                        return Err(parse_err(
                            lineno,
                            format!("word {w}: expected {dim} values, found {}", v.len()),
                        ));
                    }
                    if v.iter().any(|x| !x.is_finite()) {
                        return Err(parse_err(lineno, format!("word {w}: non-finite value")));
                    }
                    flat.extend(v);
                }
                let m = Array2::from_shape_vec((n, dim), flat)
                    .map_err(|e| Error::invalid(e.to_string()))?;
                contextual.insert(rec.sentence_id, m);
            }
            Ok(EmbeddingTable {
                kind,
                dim,
                trainable: false,
                words: Vec::new(),
                index: HashMap::new(),
                vectors: Array2::zeros((0, dim)),
                contextual,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TaskLabels;

    fn sentence(tokens: &[&str]) -> Sentence {
        Sentence {
            id: "s".into(),
            tokens: tokens.iter().map(|t| t.to_string()).collect(),
            labels: TaskLabels::default(),
        }
    }

    #[test]
    fn static_parse_and_oov() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        std::fs::write(&path, "cat 0.1 0.2\ndog 0.3 -0.4\n").unwrap();
        let table = load_embeddings(&path, EmbeddingKind::Static, 2).unwrap();
        assert_eq!(table.lookup("cat").unwrap().to_vec(), vec![0.1, 0.2]);
        assert!(!table.trainable);

        let (m, oov) = table.embed_sentence(&sentence(&["cat", "zzzq"])).unwrap();
        assert_eq!(oov, 1);
        assert_eq!(m.row(1).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn oov_is_zero_vector_dim3() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        std::fs::write(&path, "a 1 2 3\n").unwrap();
        let table = load_embeddings(&path, EmbeddingKind::Static, 3).unwrap();
        let (m, oov) = table.embed_sentence(&sentence(&["zzzq"])).unwrap();
        assert_eq!((m.row(0).to_vec(), oov), (vec![0.0; 3], 1));
    }

    #[test]
    fn short_line_names_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vec.txt");
        std::fs::write(&path, "a 1 2 3\nb 1 2\n").unwrap();
        match load_embeddings(&path, EmbeddingKind::Static, 3) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn contextual_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ctx.jsonl");
        std::fs::write(&path, r#"{"sentence_id":"s","vectors":[[1,2],[3,4]]}"#).unwrap();
        let table = load_embeddings(&path, EmbeddingKind::Contextual, 2).unwrap();
        let (m, _) = table.embed_sentence(&sentence(&["x", "y"])).unwrap();
        assert_eq!(m[[1, 0]], 3.0);
        assert!(table.embed_sentence(&sentence(&["x"])).is_err());
    }

    #[test]
    fn random_tables_are_seeded() {
        let vocab: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        let a = init_random_embeddings(&vocab, 32, 7).unwrap();
        let b = init_random_embeddings(&vocab, 32, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matrix().dim(), (10, 32));
        assert!(a.trainable);
        assert!(init_random_embeddings(&[], 32, 7).is_err());
    }

    #[test]
    fn random_init_mean_is_near_zero() {
        let vocab: Vec<String> = (0..3125).map(|i| format!("w{i}")).collect();
        let t = init_random_embeddings(&vocab, 32, 11).unwrap();
        let m = t.matrix();
        assert_eq!(m.len(), 100_000);
        let mean = m.iter().map(|&v| f64::from(v)).sum::<f64>() / m.len() as f64;
        // sd of the mean = 0.05 / sqrt(3) / sqrt(1e5) ~ 9.1e-5
        assert!(mean.abs() < 0.002, "{mean}");
        assert!(m.iter().all(|v| v.abs() <= RANDOM_INIT_RANGE));
    }
}
