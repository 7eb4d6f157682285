use ndarray::{concatenate, s, Array2, Array3, ArrayView3, Axis};
use rand::Rng;

use super::activation::Activation;
use super::conv::Conv1d;
use super::param::{HasParams, Param};
use super::pool::{MaxPool1d, PoolMode};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Parallel convolutions of several widths plus a max-pool branch, concatenated
/// over channels and flattened.
///
/// Each conv branch has `filters` ELU units. The pool branch is a stride-1
/// same-padded max-pool followed by a width-1 ELU convolution, so all branches
/// keep the sequence length. Output is `[B, L * (branches + 1) * filters]`.
pub struct Inception<T: Scalar> {
    convs: Vec<Conv1d<T>>,
    pool: MaxPool1d,
    pool_conv: Conv1d<T>,
    filters: usize,
    len: usize,
}

impl<T: Scalar> Inception<T> {
    pub fn new<R: Rng>(
        name: &str,
        c_in: usize,
        kernels: &[usize],
        filters: usize,
        pool_size: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if kernels.is_empty() {
            return Err(Error::invalid("inception block needs at least one kernel size"));
        }
        let convs = kernels
            .iter()
            .map(|&k| Conv1d::new(&format!("{name}.k{k}"), c_in, filters, k, Activation::Elu, rng))
            .collect::<Result<Vec<_>>>()?;
        let pool_conv = Conv1d::new(&format!("{name}.pool"), c_in, filters, 1, Activation::Elu, rng)?;
        Ok(Inception {
            convs,
            pool: MaxPool1d::new(pool_size, PoolMode::Same)?,
            pool_conv,
            filters,
            len: 0,
        })
    }

    /// Channels after concatenation.
    pub fn channels(&self) -> usize {
        (self.convs.len() + 1) * self.filters
    }

    pub fn output_dim(&self, len: usize) -> usize {
        len * self.channels()
    }

    pub fn forward(&mut self, x: ArrayView3<'_, T>) -> Result<Array2<T>> {
        let (b, l, _) = x.dim();
        let mut parts = Vec::with_capacity(self.convs.len() + 1);
        for conv in &mut self.convs {
            parts.push(conv.forward(x)?);
        }
        let pooled = self.pool.forward(x);
        parts.push(self.pool_conv.forward(pooled.view())?);
        let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
        let cat = concatenate(Axis(2), &views).expect("branches share B and L");
        self.len = l;
        let width = l * self.channels();
        Ok(cat
            .as_standard_layout()
            .into_owned()
            .into_shape_with_order((b, width))
            .expect("standard layout"))
    }

    pub fn backward(&mut self, dy: ArrayView3<'_, T>) -> Array3<T> {
        let f = self.filters;
        let mut dx: Option<Array3<T>> = None;
        let mut add = |d: Array3<T>| match dx.as_mut() {
            Some(acc) => *acc += &d,
            None => dx = Some(d),
        };
        for (i, conv) in self.convs.iter_mut().enumerate() {
            add(conv.backward(dy.slice(s![.., .., i * f..(i + 1) * f])));
        }
        let i = self.convs.len();
        let d_pooled = self.pool_conv.backward(dy.slice(s![.., .., i * f..(i + 1) * f]));
        add(self.pool.backward(d_pooled.view()));
        dx.expect("at least one branch")
    }

    /// Backward from the flattened gradient `[B, L * channels]`.
    pub fn backward_flat(&mut self, dy: &Array2<T>) -> Array3<T> {
        let b = dy.nrows();
        let d3 = dy
            .to_owned()
            .into_shape_with_order((b, self.len, self.channels()))
            .expect("flattened gradient matches forward");
        self.backward(d3.view())
    }

    pub fn pool_tie_margin(&self, x: ArrayView3<'_, T>) -> T {
        self.pool.tie_margin(x)
    }
}

impl<T: Scalar> HasParams<T> for Inception<T> {
    fn params(&self) -> Vec<&Param<T>> {
        self.convs
            .iter()
            .chain(std::iter::once(&self.pool_conv))
            .flat_map(|c| c.params())
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.convs
            .iter_mut()
            .chain(std::iter::once(&mut self.pool_conv))
            .flat_map(|c| c.params_mut())
            .collect()
    }
}
