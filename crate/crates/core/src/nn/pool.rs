use ndarray::{Array3, ArrayView3};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    /// Windows of `p` with stride `p`; a trailing partial window is kept.
    NonOverlapping,
    /// Stride 1, window centered like a same-padded convolution. Keeps the length.
    Same,
}

/// Max pooling along time. Ties go to the lowest index.
pub struct MaxPool1d {
    pub size: usize,
    pub mode: PoolMode,
    argmax: Vec<usize>,
    in_dims: (usize, usize, usize),
}

impl MaxPool1d {
    pub fn new(size: usize, mode: PoolMode) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("pool size must be at least 1"));
        }
        Ok(MaxPool1d {
            size,
            mode,
            argmax: Vec::new(),
            in_dims: (0, 0, 0),
        })
    }

    pub fn output_len(&self, len: usize) -> usize {
        match self.mode {
            PoolMode::NonOverlapping => len.div_ceil(self.size),
            PoolMode::Same => len,
        }
    }

    fn window(&self, out_t: usize, len: usize) -> (usize, usize) {
        match self.mode {
            PoolMode::NonOverlapping => (out_t * self.size, ((out_t + 1) * self.size).min(len)),
            PoolMode::Same => {
                let left = (self.size - 1) / 2;
                let lo = out_t.saturating_sub(left);
                let hi = (out_t + self.size - left).min(len);
                (lo, hi)
            }
        }
    }

    pub fn forward<T: Scalar>(&mut self, x: ArrayView3<'_, T>) -> Array3<T> {
        let (b, l, c) = x.dim();
        let lo_len = self.output_len(l);
        let mut y = Array3::zeros((b, lo_len, c));
        self.argmax = vec![0; b * lo_len * c];
        self.in_dims = (b, l, c);
        for bi in 0..b {
            for t in 0..lo_len {
                let (lo, hi) = self.window(t, l);
                for ch in 0..c {
                    let mut best = lo;
                    for s in lo + 1..hi {
                        if x[[bi, s, ch]] > x[[bi, best, ch]] {
                            best = s;
                        }
                    }
                    y[[bi, t, ch]] = x[[bi, best, ch]];
                    self.argmax[(bi * lo_len + t) * c + ch] = best;
                }
            }
        }
        y
    }

    pub fn backward<T: Scalar>(&self, dy: ArrayView3<'_, T>) -> Array3<T> {
        let (b, l, c) = self.in_dims;
        let lo_len = dy.dim().1;
        let mut dx = Array3::zeros((b, l, c));
        for bi in 0..b {
            for t in 0..lo_len {
                for ch in 0..c {
                    let s = self.argmax[(bi * lo_len + t) * c + ch];
                    dx[[bi, s, ch]] = dx[[bi, s, ch]] + dy[[bi, t, ch]];
                }
            }
        }
        dx
    }

    /// Smallest gap between the winner and the runner-up in any window.
    pub fn tie_margin<T: Scalar>(&self, x: ArrayView3<'_, T>) -> T {
        let (b, l, c) = x.dim();
        let mut margin = T::infinity();
        for bi in 0..b {
            for t in 0..self.output_len(l) {
                let (lo, hi) = self.window(t, l);
                for ch in 0..c {
                    let mut vals: Vec<T> = (lo..hi).map(|s| x[[bi, s, ch]]).collect();
                    vals.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
                    if vals.len() > 1 {
                        margin = margin.min(vals[0] - vals[1]);
                    }
                }
            }
        }
        margin
    }
}

#[cfg(test)]
mod tests {
    use ndarray::Array3;

    use super::*;

    fn seq(v: &[f64]) -> Array3<f64> {
        Array3::from_shape_vec((1, v.len(), 1), v.to_vec()).unwrap()
    }

    #[test]
    fn max_of_window() {
        let mut p = MaxPool1d::new(3, PoolMode::NonOverlapping).unwrap();
        assert_eq!(p.forward(seq(&[1.0, 5.0, 2.0]).view()), seq(&[5.0]));
    }

    #[test]
    fn partial_window_kept() {
        let mut p = MaxPool1d::new(3, PoolMode::NonOverlapping).unwrap();
        assert_eq!(p.forward(seq(&[1.0, 5.0, 2.0, 7.0, 0.0]).view()), seq(&[5.0, 7.0]));
    }

    #[test]
    fn unit_pool_is_identity() {
        let x = seq(&[3.0, -1.0, 2.0]);
        for mode in [PoolMode::NonOverlapping, PoolMode::Same] {
            let mut p = MaxPool1d::new(1, mode).unwrap();
            assert_eq!(p.forward(x.view()), x);
        }
    }

    #[test]
    fn gradient_goes_to_argmax_lowest_on_ties() {
        let mut p = MaxPool1d::new(3, PoolMode::NonOverlapping).unwrap();
        p.forward(seq(&[1.0, 5.0, 2.0]).view());
        assert_eq!(p.backward(seq(&[1.0]).view()), seq(&[0.0, 1.0, 0.0]));
        p.forward(seq(&[4.0, 4.0, 2.0]).view());
        assert_eq!(p.backward(seq(&[1.0]).view()), seq(&[1.0, 0.0, 0.0]));
    }

    #[test]
    fn same_mode_keeps_length() {
        let mut p = MaxPool1d::new(3, PoolMode::Same).unwrap();
        let y = p.forward(seq(&[1.0, 5.0, 2.0, 0.0, 0.0]).view());
        assert_eq!(y, seq(&[5.0, 5.0, 5.0, 2.0, 0.0]));
    }
}
