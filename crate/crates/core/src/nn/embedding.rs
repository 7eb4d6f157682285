use ndarray::{s, Array2, Array3, ArrayView3};

use super::param::{HasParams, Param};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Token-id lookup into a `[vocab, dim]` table. Padded positions give zero rows
/// and receive no gradient.
pub struct Embedding<T: Scalar> {
    pub table: Param<T>,
    ids: Array2<usize>,
    mask: Array2<bool>,
}

impl<T: Scalar> Embedding<T> {
    pub fn new(table: Param<T>) -> Self {
        Embedding {
            table,
            ids: Array2::zeros((0, 0)),
            mask: Array2::from_elem((0, 0), false),
        }
    }

    pub fn dim(&self) -> usize {
        self.table.value.ncols()
    }

    pub fn vocab_size(&self) -> usize {
        self.table.value.nrows()
    }

    pub fn forward(&mut self, ids: &Array2<usize>, mask: &Array2<bool>) -> Result<Array3<T>> {
        if ids.dim() != mask.dim() {
            return Err(Error::shape(
                &[ids.nrows(), ids.ncols()],
                &[mask.nrows(), mask.ncols()],
                "token ids vs mask",
            ));
        }
        let (b, l) = ids.dim();
        let mut out = Array3::zeros((b, l, self.dim()));
        for ((bi, t), &id) in ids.indexed_iter() {
            if !mask[[bi, t]] {
                continue;
            }
            if id >= self.vocab_size() {
                return Err(Error::invalid(format!("token id {id} outside vocabulary of {}", self.vocab_size())));
            }
            out.slice_mut(s![bi, t, ..]).assign(&self.table.value.row(id));
        }
        self.ids = ids.clone();
        self.mask = mask.clone();
        Ok(out)
    }

    pub fn backward(&mut self, dy: ArrayView3<'_, T>) {
        if !self.table.trainable {
            return;
        }
        for ((bi, t), &id) in self.ids.indexed_iter() {
            if self.mask[[bi, t]] {
                let mut row = self.table.grad.row_mut(id);
                row += &dy.slice(s![bi, t, ..]);
            }
        }
    }
}

impl<T: Scalar> HasParams<T> for Embedding<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.table]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.table]
    }
}
