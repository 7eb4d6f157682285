use ndarray::{Array, Array2, ArrayView2, Dimension};

use super::activation::{sigmoid_scalar, Activation};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn softmax_rows<T: Scalar>(logits: &Array2<T>) -> Array2<T> {
    Activation::Softmax.forward(logits)
}

pub fn sigmoid<T: Scalar, D: Dimension>(z: &Array<T, D>) -> Array<T, D> {
    z.mapv(sigmoid_scalar)
}

/// Mean cross-entropy over the batch and its gradient w.r.t. the logits.
pub fn softmax_cross_entropy<T: Scalar>(logits: ArrayView2<'_, T>, classes: &[usize]) -> Result<(T, Array2<T>)> {
    let (b, k) = logits.dim();
    if classes.len() != b {
        return Err(Error::shape(&[b, k], &[classes.len()], "logits vs targets"));
    }
    let n = T::of(b.max(1) as f64);
    let mut grad = Array2::zeros((b, k));
    let mut loss = T::zero();
    for (i, (row, &c)) in logits.rows().into_iter().zip(classes).enumerate() {
        if c >= k {
            return Err(Error::invalid(format!("class index {c} out of range for {k} classes")));
        }
        let max = row.fold(T::neg_infinity(), |m, &v| m.max(v));
        let lse = row.iter().map(|&v| (v - max).exp()).sum::<T>().ln() + max;
        loss = loss + lse - row[c];
        for j in 0..k {
            let p = (row[j] - lse).exp();
            grad[[i, j]] = (p - if j == c { T::one() } else { T::zero() }) / n;
        }
    }
    Ok((loss / n, grad))
}

/// Binary cross-entropy on logits, averaged over all entries.
pub fn sigmoid_bce<T: Scalar>(logits: ArrayView2<'_, T>, targets: ArrayView2<'_, T>) -> Result<(T, Array2<T>)> {
    if logits.dim() != targets.dim() {
        return Err(Error::shape(
            &[logits.nrows(), logits.ncols()],
            &[targets.nrows(), targets.ncols()],
            "logits vs k-hot targets",
        ));
    }
    let n = T::of(logits.len().max(1) as f64);
    let mut loss = T::zero();
    let mut grad = Array2::zeros(logits.raw_dim());
    for ((g, &z), &y) in grad.iter_mut().zip(logits.iter()).zip(targets.iter()) {
        // max(z, 0) - z*y + log(1 + exp(-|z|))
        loss = loss + z.max(T::zero()) - z * y + (-z.abs()).exp().ln_1p();
        *g = (sigmoid_scalar(z) - y) / n;
    }
    Ok((loss / n, grad))
}

#[cfg(test)]
mod tests {
    use ndarray::array;

    use super::*;

    #[test]
    fn uniform_logits_give_ln2() {
        let (l, _) = softmax_cross_entropy(array![[0.0f64, 0.0]].view(), &[0]).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
        let (l, _) = sigmoid_bce(array![[0.0f64]].view(), array![[1.0]].view()).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn stable_for_large_logits() {
        let (l, g) = softmax_cross_entropy(array![[1000.0f64, -1000.0]].view(), &[1]).unwrap();
        assert!((l - 2000.0).abs() < 1e-9);
        assert!(g.iter().all(|v| v.is_finite()));
        let (l, _) = sigmoid_bce(array![[-800.0f64]].view(), array![[1.0]].view()).unwrap();
        assert!((l - 800.0).abs() < 1e-9);
    }

    #[test]
    fn class_out_of_range_is_error() {
        assert!(softmax_cross_entropy(array![[0.0f32, 1.0]].view(), &[2]).is_err());
    }
}
