use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::derive_seed;
use crate::scalar::Scalar;

/// Width of the noise baseline vectors, matching the EEG channel count.
pub const NOISE_DIM: usize = 105;

#[derive(Debug, Clone, PartialEq)]
pub enum TextInput<T> {
    /// Token ids `[B, L]` into the text tower's embedding table.
    Ids(Array2<usize>),
    /// Precomputed word vectors `[B, L, d]`.
    Vectors(Array3<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Targets<T> {
    Classes(Vec<usize>),
    /// k-hot `[B, labels]`.
    Labels(Array2<T>),
}

/// A padded mini-batch. `extra[i]` feeds tower `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub text: TextInput<T>,
    pub mask: Array2<bool>,
    pub extra: Vec<Array3<T>>,
    pub targets: Targets<T>,
}

impl<T: Scalar> Batch<T> {
    pub fn len(&self) -> usize {
        self.mask.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.nrows() == 0
    }

    pub fn max_len(&self) -> usize {
        self.mask.ncols()
    }
}

/// Uniform [0, 1) vectors for the noise baseline, zero at padded positions.
/// The stream depends only on `(run_seed, epoch)` and the example order.
pub fn make_noise_features<T: Scalar>(mask: &Array2<bool>, run_seed: u64, epoch: usize) -> Array3<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(run_seed, &format!("noise/epoch{epoch}")));
    let (b, l) = mask.dim();
    let mut out = Array3::zeros((b, l, NOISE_DIM));
    for ((bi, t, _), v) in out.indexed_iter_mut() {
        let u: f64 = rng.gen();
        if mask[[bi, t]] {
            *v = T::of(u);
        }
    }
    out
}
