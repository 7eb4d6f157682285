use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Band, FeatureSet};

/// Input modality of a tower.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Modality {
    Text,
    Eeg(Band),
    Gaze,
    Noise,
}

impl Modality {
    pub fn name(self) -> String {
        match self {
            Modality::Text => "text".into(),
            Modality::Eeg(b) => format!("eeg:{}", b.name()),
            Modality::Gaze => "gaze".into(),
            Modality::Noise => "noise".into(),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "text" => Ok(Modality::Text),
            "gaze" | "et" => Ok(Modality::Gaze),
            "noise" => Ok(Modality::Noise),
            _ => match s.strip_prefix("eeg:") {
                Some(b) => Ok(Modality::Eeg(b.parse()?)),
                None => Err(Error::invalid(format!("unknown modality {s:?}"))),
            },
        }
    }
}

impl From<FeatureSet> for Modality {
    fn from(f: FeatureSet) -> Self {
        match f {
            FeatureSet::Eeg(b) => Modality::Eeg(b),
            FeatureSet::Gaze => Modality::Gaze,
        }
    }
}

impl TryFrom<String> for Modality {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Modality> for String {
    fn from(m: Modality) -> String {
        m.name()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    Recurrent,
    Convolutional,
}

impl FromStr for Decoder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "recurrent" | "lstm" => Ok(Decoder::Recurrent),
            "convolutional" | "cnn" | "inception" => Ok(Decoder::Convolutional),
            other => Err(Error::invalid(format!("unknown decoder {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fusion {
    Concat,
    Add,
    Subtract,
    Max,
}

impl FromStr for Fusion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "concat" => Ok(Fusion::Concat),
            "add" => Ok(Fusion::Add),
            "subtract" => Ok(Fusion::Subtract),
            "max" => Ok(Fusion::Max),
            other => Err(Error::invalid(format!("unknown fusion {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum Head {
    Softmax { classes: usize },
    Sigmoid { labels: usize },
}

impl Head {
    pub fn outputs(self) -> usize {
        match self {
            Head::Softmax { classes } => classes,
            Head::Sigmoid { labels } => labels,
        }
    }
}

/// One tower: input -> encoder -> dense(relu) -> dropout -> dense(relu).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TowerSpec {
    pub modality: Modality,
    pub decoder: Decoder,
    /// Width of the per-word input vectors (embedding dim for text).
    pub input_dim: usize,
    /// Token-id input through an embedding table of this size; `None` means
    /// the tower consumes precomputed vectors.
    pub vocab_size: Option<usize>,
    pub lstm_dim: usize,
    pub lstm_layers: usize,
    pub cnn_filters: usize,
    pub kernels: Vec<usize>,
    pub pool: usize,
    /// Width of both dense layers, and so of the tower output.
    pub dense: usize,
    pub dropout: f64,
}

impl TowerSpec {
    /// Recurrent tower with desk-scale defaults.
    pub fn new(modality: Modality, input_dim: usize) -> Self {
        TowerSpec {
            modality,
            decoder: Decoder::Recurrent,
            input_dim,
            vocab_size: None,
            lstm_dim: 64,
            lstm_layers: 1,
            cnn_filters: 16,
            kernels: vec![1, 4, 7],
            pool: 3,
            dense: 32,
            dropout: 0.3,
        }
    }

    pub fn encoder_dim(&self, max_len: usize) -> usize {
        match self.decoder {
            Decoder::Recurrent => 2 * self.lstm_dim,
            Decoder::Convolutional => max_len * (self.kernels.len() + 1) * self.cnn_filters,
        }
    }

    pub fn output_dim(&self) -> usize {
        self.dense
    }

    pub fn parameter_count(&self, max_len: usize) -> usize {
        let emb = self.vocab_size.map_or(0, |v| v * self.input_dim);
        let enc = match self.decoder {
            Decoder::Recurrent => {
                let h = self.lstm_dim;
                (0..self.lstm_layers)
                    .map(|l| {
                        let d_in = if l == 0 { self.input_dim } else { 2 * h };
                        2 * 4 * h * (d_in + h + 1)
                    })
                    .sum()
            }
            Decoder::Convolutional => {
                let (c, f) = (self.input_dim, self.cnn_filters);
                self.kernels.iter().map(|k| k * c * f + f).sum::<usize>() + c * f + f
            }
        };
        let d = self.dense;
        emb + enc + (self.encoder_dim(max_len) * d + d) + (d * d + d)
    }

    fn validate(&self, idx: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(format!("tower {idx} ({}): {msg}", self.modality)));
        if self.input_dim == 0 || self.dense == 0 {
            return bad("input and dense widths must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        match self.decoder {
            Decoder::Recurrent if self.lstm_dim == 0 || self.lstm_layers == 0 => {
                bad("LSTM size and layer count must be positive")
            }
            Decoder::Convolutional if self.cnn_filters == 0 || self.pool == 0 || self.kernels.contains(&0) || self.kernels.is_empty() => {
                bad("inception block needs positive filters, pool and kernel sizes")
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub towers: Vec<TowerSpec>,
    pub fusion: Fusion,
    pub head: Head,
    /// Decision threshold for the sigmoid head.
    pub threshold: f64,
    /// Padded sentence length.
    pub max_len: usize,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let n = self.towers.len();
        if ![1, 2, 5].contains(&n) {
            return Err(Error::invalid(format!("a model has 1, 2 or 5 towers, got {n}")));
        }
        let text = &self.towers[0];
        if text.modality != Modality::Text {
            return Err(Error::invalid("the first tower must be the text tower"));
        }
        if text.decoder != Decoder::Recurrent {
            return Err(Error::invalid("the text tower is always recurrent"));
        }
        if let Some(t) = self.towers[1..].iter().find(|t| t.modality == Modality::Text) {
            return Err(Error::invalid(format!("second-modality tower cannot be {}", t.modality)));
        }
        for (i, t) in self.towers.iter().enumerate() {
            t.validate(i)?;
        }
        if self.max_len == 0 {
            return Err(Error::invalid("max_len must be positive"));
        }
        if n == 5 && self.fusion != Fusion::Concat {
            return Err(Error::invalid("the five-tower model uses concat fusion"));
        }
        if self.fusion == Fusion::Subtract && n != 2 {
            return Err(Error::invalid("subtract fusion needs exactly two towers"));
        }
        if self.fusion != Fusion::Concat {
            let d = text.output_dim();
            if let Some(t) = self.towers.iter().find(|t| t.output_dim() != d) {
                return Err(Error::invalid(format!(
                    "{:?} fusion needs equal tower widths: text {d} vs {} {}",
                    self.fusion,
                    t.modality,
                    t.output_dim()
                )));
            }
        }
        match self.head {
            Head::Softmax { classes } if classes < 2 => Err(Error::invalid("softmax head needs at least 2 classes")),
            Head::Sigmoid { labels } if labels == 0 => Err(Error::invalid("sigmoid head needs at least 1 label")),
            Head::Sigmoid { .. } if !(self.threshold > 0.0 && self.threshold < 1.0) => {
                Err(Error::invalid("threshold must lie in (0, 1)"))
            }
            _ => Ok(()),
        }
    }

    pub fn fused_dim(&self) -> usize {
        match self.fusion {
            Fusion::Concat => self.towers.iter().map(TowerSpec::output_dim).sum(),
            _ => self.towers[0].output_dim(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        let towers: usize = self.towers.iter().map(|t| t.parameter_count(self.max_len)).sum();
        towers + (self.fused_dim() + 1) * self.head.outputs()
    }
}
