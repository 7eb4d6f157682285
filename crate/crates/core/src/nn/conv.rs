use ndarray::{Array2, Array3, ArrayView3, Axis};
use rand::Rng;

use super::activation::Activation;
use super::param::{HasParams, Param};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

struct Cache<T> {
    cols: Array2<T>,
    z: Array2<T>,
    y: Array2<T>,
    dims: (usize, usize),
}

/// 1-D cross-correlation along time with zero "same" padding.
///
/// Weights are stored im2col style as `[k * c_in, filters]`; row `j * c_in + c`
/// multiplies input channel `c` at offset `j - (k - 1) / 2`.
pub struct Conv1d<T: Scalar> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub kernel: usize,
    pub activation: Activation,
    cache: Option<Cache<T>>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn new<R: Rng>(
        name: &str,
        c_in: usize,
        filters: usize,
        kernel: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if kernel == 0 {
            return Err(Error::invalid("convolution kernel size must be at least 1"));
        }
        let weight = Param::glorot(
            format!("{name}.weight"),
            kernel * c_in,
            filters,
            kernel * c_in,
            kernel * filters,
            rng,
        );
        Ok(Conv1d {
            weight,
            bias: Param::zeros(format!("{name}.bias"), 1, filters),
            kernel,
            activation,
            cache: None,
        })
    }

    pub fn c_in(&self) -> usize {
        self.weight.value.nrows() / self.kernel
    }

    pub fn filters(&self) -> usize {
        self.weight.value.ncols()
    }

    fn offset(&self) -> isize {
        ((self.kernel - 1) / 2) as isize
    }

    pub fn forward(&mut self, x: ArrayView3<'_, T>) -> Result<Array3<T>> {
        let (b, l, c) = x.dim();
        if c != self.c_in() {
            return Err(Error::shape(&[b, l, c], &[self.kernel, self.c_in(), self.filters()], "conv1d input channels"));
        }
        let k = self.kernel;
        let off = self.offset();
        let mut cols = Array2::zeros((b * l, k * c));
        for bi in 0..b {
            for t in 0..l {
                let mut row = cols.row_mut(bi * l + t);
                for j in 0..k {
                    let src = t as isize + j as isize - off;
                    if src >= 0 && (src as usize) < l {
                        row.slice_mut(ndarray::s![j * c..(j + 1) * c])
                            .assign(&x.slice(ndarray::s![bi, src as usize, ..]));
                    }
                }
            }
        }
        let z = cols.dot(&self.weight.value) + &self.bias.value;
        let y = self.activation.forward(&z);
        let out = y.clone().into_shape_with_order((b, l, self.filters())).expect("contiguous");
        self.cache = Some(Cache { cols, z, y, dims: (b, l) });
        Ok(out)
    }

    pub fn backward(&mut self, dy: ArrayView3<'_, T>) -> Array3<T> {
        let c = self.c_in();
        let k = self.kernel;
        let off = self.offset();
        let cache = self.cache.as_ref().expect("Conv1d::backward called before forward");
        let (b, l) = cache.dims;
        let dy2 = dy.to_owned().into_shape_with_order((b * l, self.filters())).expect("contiguous");
        let dz = self.activation.backward(&cache.z, &cache.y, &dy2.view());
        self.weight.grad += &cache.cols.t().dot(&dz);
        self.bias.grad += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dcols = dz.dot(&self.weight.value.t());
        let mut dx = Array3::zeros((b, l, c));
        for bi in 0..b {
            for t in 0..l {
                let row = dcols.row(bi * l + t);
                for j in 0..k {
                    let src = t as isize + j as isize - off;
                    if src >= 0 && (src as usize) < l {
                        let mut d = dx.slice_mut(ndarray::s![bi, src as usize, ..]);
                        d += &row.slice(ndarray::s![j * c..(j + 1) * c]);
                    }
                }
            }
        }
        dx
    }
}

impl<T: Scalar> HasParams<T> for Conv1d<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}
