use std::collections::BTreeSet;

use ndarray::{concatenate, s, Array2, ArrayView3, Axis, Ix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::batch::{Batch, Targets, TextInput};
use super::spec::{Decoder, Fusion, Head, ModelSpec, TowerSpec};
use crate::corpus::{derive_seed, RANDOM_INIT_RANGE};
use crate::error::{Error, Result};
use crate::nn::{
    sigmoid, sigmoid_bce, softmax_cross_entropy, softmax_rows, Activation, BiLstm, Dense, Dropout, Embedding,
    HasParams, Inception, Param,
};
use crate::scalar::Scalar;

enum Encoder<T: Scalar> {
    Recurrent(BiLstm<T>),
    Convolutional(Inception<T>),
}

struct Tower<T: Scalar> {
    embedding: Option<Embedding<T>>,
    encoder: Encoder<T>,
    dense1: Dense<T>,
    dropout: Dropout<T, Ix2>,
    dense2: Dense<T>,
}

enum TowerInput<'a, T> {
    Ids(&'a Array2<usize>),
    Features(ArrayView3<'a, T>),
}

impl<T: Scalar> Tower<T> {
    fn new(spec: &TowerSpec, max_len: usize, seed: u64) -> Result<Self> {
        let name = spec.modality.name();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("tower/{name}")));
        let embedding = match spec.vocab_size {
            Some(v) => {
                let mut emb_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "embedding"));
                let table = Param::uniform(
                    format!("{name}.embedding"),
                    v,
                    spec.input_dim,
                    RANDOM_INIT_RANGE as f64,
                    &mut emb_rng,
                );
                Some(Embedding::new(table))
            }
            None => None,
        };
        let encoder = match spec.decoder {
            Decoder::Recurrent => Encoder::Recurrent(BiLstm::new(
                &format!("{name}.lstm"),
                spec.input_dim,
                spec.lstm_dim,
                spec.lstm_layers,
                &mut rng,
            )?),
            Decoder::Convolutional => Encoder::Convolutional(Inception::new(
                &format!("{name}.inception"),
                spec.input_dim,
                &spec.kernels,
                spec.cnn_filters,
                spec.pool,
                &mut rng,
            )?),
        };
        let enc_dim = spec.encoder_dim(max_len);
        Ok(Tower {
            embedding,
            encoder,
            dense1: Dense::new(&format!("{name}.dense1"), enc_dim, spec.dense, Activation::Relu, &mut rng),
            dropout: Dropout::new(spec.dropout)?,
            dense2: Dense::new(&format!("{name}.dense2"), spec.dense, spec.dense, Activation::Relu, &mut rng),
        })
    }

    fn forward<R: Rng>(
        &mut self,
        input: TowerInput<'_, T>,
        mask: &Array2<bool>,
        training: bool,
        rng: &mut R,
    ) -> Result<Array2<T>> {
        let enc = match (input, self.embedding.as_mut()) {
            (TowerInput::Ids(ids), Some(emb)) => {
                let x = emb.forward(ids, mask)?;
                self.encode(x.view(), mask)?
            }
            (TowerInput::Features(x), None) => self.encode(x, mask)?,
            (TowerInput::Ids(_), None) => return Err(Error::invalid("token ids given to a tower without embeddings")),
            (TowerInput::Features(_), Some(_)) => {
                return Err(Error::invalid("word vectors given to a tower that expects token ids"))
            }
        };
        let h1 = self.dense1.forward(enc.view())?;
        let h1 = self.dropout.forward(&h1, training, rng);
        self.dense2.forward(h1.view())
    }

    fn encode(&mut self, x: ArrayView3<'_, T>, mask: &Array2<bool>) -> Result<Array2<T>> {
        match &mut self.encoder {
            Encoder::Recurrent(lstm) => Ok(lstm.forward(x, mask)?.1),
            Encoder::Convolutional(block) => block.forward(x),
        }
    }

    fn backward(&mut self, dy: &Array2<T>) {
        let d1 = self.dense2.backward(dy.view());
        let d1 = self.dropout.backward(&d1);
        let d_enc = self.dense1.backward(d1.view());
        let dx = match &mut self.encoder {
            Encoder::Recurrent(lstm) => lstm.backward(None, d_enc.view()),
            Encoder::Convolutional(block) => block.backward_flat(&d_enc),
        };
        if let Some(emb) = self.embedding.as_mut() {
            emb.backward(dx.view());
        }
    }

    fn relu_margin(&self) -> T {
        [&self.dense1, &self.dense2]
            .iter()
            .filter_map(|d| d.kink_margin())
            .fold(T::infinity(), |a, b| a.min(b))
    }
}

impl<T: Scalar> HasParams<T> for Tower<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v: Vec<&Param<T>> = self.embedding.iter().flat_map(|e| e.params()).collect();
        match &self.encoder {
            Encoder::Recurrent(l) => v.extend(l.params()),
            Encoder::Convolutional(b) => v.extend(b.params()),
        }
        v.extend(self.dense1.params());
        v.extend(self.dense2.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v: Vec<&mut Param<T>> = self.embedding.iter_mut().flat_map(|e| e.params_mut()).collect();
        match &mut self.encoder {
            Encoder::Recurrent(l) => v.extend(l.params_mut()),
            Encoder::Convolutional(b) => v.extend(b.params_mut()),
        }
        v.extend(self.dense1.params_mut());
        v.extend(self.dense2.params_mut());
        v
    }
}

/// Decided output for one example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision {
    Class(usize),
    Labels(BTreeSet<usize>),
}

/// Argmax (lowest index on ties) for softmax scores; `{c : score > threshold}` for sigmoid scores.
pub fn decide(scores: &[f64], head: Head, threshold: f64) -> Decision {
    match head {
        Head::Softmax { .. } => {
            let mut best = 0;
            for (i, &s) in scores.iter().enumerate() {
                if s > scores[best] {
                    best = i;
                }
            }
            Decision::Class(best)
        }
        Head::Sigmoid { .. } => Decision::Labels(
            scores
                .iter()
                .enumerate()
                .filter(|(_, &s)| s > threshold)
                .map(|(i, _)| i)
                .collect(),
        ),
    }
}

/// A late-fusion classifier built from a [`ModelSpec`].
pub struct Network<T: Scalar> {
    spec: ModelSpec,
    towers: Vec<Tower<T>>,
    head: Dense<T>,
    tower_out: Vec<Array2<T>>,
}

impl<T: Scalar> Network<T> {
    /// Component initializations are seeded by role, so the text tower of every
    /// system built from the same seed starts from identical parameters.
    pub fn new(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let towers = spec
            .towers
            .iter()
            .map(|t| Tower::new(t, spec.max_len, seed))
            .collect::<Result<Vec<_>>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "head"));
        let head = Dense::new("head", spec.fused_dim(), spec.head.outputs(), Activation::None, &mut rng);
        Ok(Network {
            spec: spec.clone(),
            towers,
            head,
            tower_out: Vec::new(),
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Replaces the text embedding table, e.g. with pretrained static vectors.
    pub fn set_embedding_table(&mut self, table: Array2<T>, trainable: bool) -> Result<()> {
        let emb = self.towers[0]
            .embedding
            .as_mut()
            .ok_or_else(|| Error::invalid("text tower has no embedding table"))?;
        if table.dim() != emb.table.value.dim() {
            return Err(Error::shape(
                &[table.nrows(), table.ncols()],
                &[emb.table.value.nrows(), emb.table.value.ncols()],
                "embedding table",
            ));
        }
        emb.table.value = table;
        emb.table.trainable = trainable;
        Ok(())
    }

    /// Head weights, rows ordered like the fused vector.
    pub fn head_mut(&mut self) -> &mut Dense<T> {
        &mut self.head
    }

    /// Logits `[B, outputs]`.
    pub fn forward<R: Rng>(&mut self, batch: &Batch<T>, training: bool, rng: &mut R) -> Result<Array2<T>> {
        let n_extra = self.towers.len() - 1;
        if batch.extra.len() != n_extra {
            return Err(Error::invalid(format!(
                "model has {} second-modality towers but the batch carries {} feature tensors",
                n_extra,
                batch.extra.len()
            )));
        }
        let (b, l) = batch.mask.dim();
        if l != self.spec.max_len {
            return Err(Error::shape(&[b, l], &[b, self.spec.max_len], "batch length vs max_len"));
        }
        let mut outs = Vec::with_capacity(self.towers.len());
        let text = match &batch.text {
            TextInput::Ids(ids) => TowerInput::Ids(ids),
            TextInput::Vectors(v) => TowerInput::Features(v.view()),
        };
        outs.push(self.towers[0].forward(text, &batch.mask, training, rng)?);
        for (i, (tower, x)) in self.towers[1..].iter_mut().zip(&batch.extra).enumerate() {
            let want = self.spec.towers[i + 1].input_dim;
            if x.dim() != (b, l, want) {
                let (xb, xl, xd) = x.dim();
                return Err(Error::shape(&[xb, xl, xd], &[b, l, want], "second-modality features"));
            }
            let mut masked = x.clone();
            for ((bi, t), &m) in batch.mask.indexed_iter() {
                if !m {
                    masked.slice_mut(s![bi, t, ..]).fill(T::zero());
                }
            }
            outs.push(tower.forward(TowerInput::Features(masked.view()), &batch.mask, training, rng)?);
        }
        let fused = match self.spec.fusion {
            Fusion::Concat => {
                let views: Vec<_> = outs.iter().map(|o| o.view()).collect();
                concatenate(Axis(1), &views).expect("towers share the batch size")
            }
            Fusion::Add => outs[1..].iter().fold(outs[0].clone(), |acc, o| acc + o),
            Fusion::Subtract => &outs[0] - &outs[1],
            Fusion::Max => outs[1..].iter().fold(outs[0].clone(), |mut acc, o| {
                acc.zip_mut_with(o, |a, &v| *a = a.max(v));
                acc
            }),
        };
        self.tower_out = outs;
        self.head.forward(fused.view())
    }

    pub fn backward(&mut self, d_logits: &Array2<T>) {
        let d_fused = self.head.backward(d_logits.view());
        let grads: Vec<Array2<T>> = match self.spec.fusion {
            Fusion::Concat => {
                let mut off = 0;
                self.tower_out
                    .iter()
                    .map(|o| {
                        let w = o.ncols();
                        let g = d_fused.slice(s![.., off..off + w]).to_owned();
                        off += w;
                        g
                    })
                    .collect()
            }
            Fusion::Add => vec![d_fused.clone(); self.towers.len()],
            Fusion::Subtract => vec![d_fused.clone(), d_fused.mapv(|v| -v)],
            Fusion::Max => {
                let mut grads: Vec<Array2<T>> = self.tower_out.iter().map(|o| Array2::zeros(o.raw_dim())).collect();
                for ((i, j), &g) in d_fused.indexed_iter() {
                    let mut best = 0;
                    for k in 1..self.tower_out.len() {
                        if self.tower_out[k][[i, j]] > self.tower_out[best][[i, j]] {
                            best = k;
                        }
                    }
                    grads[best][[i, j]] = g;
                }
                grads
            }
        };
        for (tower, g) in self.towers.iter_mut().zip(&grads) {
            tower.backward(g);
        }
    }

    /// Zeroes gradients, runs forward and backward, and returns the loss.
    pub fn loss_and_grad<R: Rng>(&mut self, batch: &Batch<T>, training: bool, rng: &mut R) -> Result<T> {
        self.zero_grad();
        let logits = self.forward(batch, training, rng)?;
        let (loss, d) = self.loss_from_logits(&logits, &batch.targets)?;
        self.backward(&d);
        Ok(loss)
    }

    /// Loss without touching gradients (evaluation mode).
    pub fn loss(&mut self, batch: &Batch<T>) -> Result<T> {
        let logits = self.forward(batch, false, &mut ChaCha8Rng::seed_from_u64(0))?;
        Ok(self.loss_from_logits(&logits, &batch.targets)?.0)
    }

    fn loss_from_logits(&self, logits: &Array2<T>, targets: &Targets<T>) -> Result<(T, Array2<T>)> {
        match (self.spec.head, targets) {
            (Head::Softmax { .. }, Targets::Classes(c)) => softmax_cross_entropy(logits.view(), c),
            (Head::Sigmoid { .. }, Targets::Labels(y)) => sigmoid_bce(logits.view(), y.view()),
            _ => Err(Error::invalid("targets do not match the model head")),
        }
    }

    /// Class probabilities (softmax) or independent label scores (sigmoid), in evaluation mode.
    pub fn scores(&mut self, batch: &Batch<T>) -> Result<Array2<T>> {
        let logits = self.forward(batch, false, &mut ChaCha8Rng::seed_from_u64(0))?;
        Ok(match self.spec.head {
            Head::Softmax { .. } => softmax_rows(&logits),
            Head::Sigmoid { .. } => sigmoid(&logits),
        })
    }

    pub fn predict(&mut self, batch: &Batch<T>) -> Result<Vec<Decision>> {
        let scores = self.scores(batch)?;
        Ok(scores
            .rows()
            .into_iter()
            .map(|r| {
                let v: Vec<f64> = r.iter().map(|x| x.as_f64()).collect();
                decide(&v, self.spec.head, self.spec.threshold)
            })
            .collect())
    }

    /// Smallest distance of any ReLU pre-activation or max-fusion pair from a
    /// tie in the last forward pass. Used to avoid kinks in gradient checks.
    pub fn kink_margin(&self) -> T {
        let mut m = self
            .towers
            .iter()
            .map(Tower::relu_margin)
            .fold(T::infinity(), |a, b| a.min(b));
        if self.spec.fusion == Fusion::Max && self.tower_out.len() > 1 {
            for ((i, j), &v) in self.tower_out[0].indexed_iter() {
                for o in &self.tower_out[1..] {
                    m = m.min((o[[i, j]] - v).abs());
                }
            }
        }
        m
    }

    /// Copies all parameter values into `other`, which must share the architecture.
    pub fn copy_params_to(&self, other: &mut Network<T>) {
        for (src, dst) in self.params().into_iter().zip(other.params_mut()) {
            dst.value.assign(&src.value);
        }
    }

    pub fn tower_count(&self) -> usize {
        self.towers.len()
    }
}

impl<T: Scalar> HasParams<T> for Network<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v: Vec<&Param<T>> = self.towers.iter().flat_map(|t| t.params()).collect();
        v.extend(self.head.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v: Vec<&mut Param<T>> = self.towers.iter_mut().flat_map(|t| t.params_mut()).collect();
        v.extend(self.head.params_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decisions() {
        let sig = Head::Sigmoid { labels: 3 };
        assert_eq!(decide(&[0.2, 0.6, 0.71], sig, 0.7), Decision::Labels([2].into()));
        assert_eq!(decide(&[0.2, 0.6, 0.69], sig, 0.7), Decision::Labels(BTreeSet::new()));
        assert_eq!(decide(&[0.5, 0.5], Head::Softmax { classes: 2 }, 0.5), Decision::Class(0));
    }
}
