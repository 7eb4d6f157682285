use ndarray::{Array, ArrayView, Axis, Dimension, Zip};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Relu,
    /// ELU with alpha = 1.
    Elu,
    Sigmoid,
    /// Softmax over the last axis.
    Softmax,
}

pub(crate) fn sigmoid_scalar<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

impl Activation {
    pub fn forward<T: Scalar, D: Dimension>(self, z: &Array<T, D>) -> Array<T, D> {
        match self {
            Activation::None => z.clone(),
            Activation::Relu => z.mapv(|v| if v > T::zero() { v } else { T::zero() }),
            Activation::Elu => z.mapv(|v| if v > T::zero() { v } else { v.exp_m1() }),
            Activation::Sigmoid => z.mapv(sigmoid_scalar),
            Activation::Softmax => {
                let mut y = z.clone();
                let last = Axis(y.ndim() - 1);
                for mut lane in y.lanes_mut(last) {
                    let max = lane.fold(T::neg_infinity(), |m, &v| m.max(v));
                    lane.mapv_inplace(|v| (v - max).exp());
                    let s = lane.sum();
                    lane.mapv_inplace(|v| v / s);
                }
                y
            }
        }
    }

    /// Gradient w.r.t. the pre-activation `z`, given output `y` and `dy`.
    pub fn backward<T: Scalar, D: Dimension>(
        self,
        z: &Array<T, D>,
        y: &Array<T, D>,
        dy: &ArrayView<'_, T, D>,
    ) -> Array<T, D> {
        match self {
            Activation::None => dy.to_owned(),
            Activation::Relu => {
                let mut dz = dy.to_owned();
                Zip::from(&mut dz).and(z).for_each(|g, &v| {
                    if v <= T::zero() {
                        *g = T::zero()
                    }
                });
                dz
            }
            Activation::Elu => {
                let mut dz = dy.to_owned();
                Zip::from(&mut dz).and(z).and(y).for_each(|g, &v, &out| {
                    if v <= T::zero() {
                        *g = *g * (out + T::one())
                    }
                });
                dz
            }
            Activation::Sigmoid => {
                let mut dz = dy.to_owned();
                Zip::from(&mut dz).and(y).for_each(|g, &s| *g = *g * s * (T::one() - s));
                dz
            }
            Activation::Softmax => {
                let mut dz = dy.to_owned();
                let last = Axis(dz.ndim() - 1);
                for (mut g, s) in dz.lanes_mut(last).into_iter().zip(y.lanes(last)) {
                    let dot = g.iter().zip(s.iter()).fold(T::zero(), |acc, (&a, &b)| acc + a * b);
                    Zip::from(&mut g).and(&s).for_each(|gi, &si| *gi = si * (*gi - dot));
                }
                dz
            }
        }
    }
}
