use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;

use super::activation::Activation;
use super::param::{HasParams, Param};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

struct Cache<T> {
    x: Array2<T>,
    z: Array2<T>,
    y: Array2<T>,
}

/// Fully connected layer `y = act(x W + b)`.
pub struct Dense<T: Scalar> {
    pub weight: Param<T>,
    pub bias: Param<T>,
    pub activation: Activation,
    cache: Option<Cache<T>>,
}

impl<T: Scalar> Dense<T> {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng>(name: &str, inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        Self::from_params(
            Param::glorot(format!("{name}.weight"), inputs, outputs, inputs, outputs, rng),
            Param::zeros(format!("{name}.bias"), 1, outputs),
            activation,
        )
    }

    pub fn from_params(weight: Param<T>, bias: Param<T>, activation: Activation) -> Self {
        Dense {
            weight,
            bias,
            activation,
            cache: None,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn forward(&mut self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if x.ncols() != self.inputs() {
            return Err(Error::shape(
                &[x.nrows(), x.ncols()],
                &[self.inputs(), self.outputs()],
                "dense input vs weight",
            ));
        }
        let z = x.dot(&self.weight.value) + &self.bias.value;
        let y = self.activation.forward(&z);
        self.cache = Some(Cache {
            x: x.to_owned(),
            z,
            y: y.clone(),
        });
        Ok(y)
    }

    /// Accumulates dW, db and returns dx.
    pub fn backward(&mut self, dy: ArrayView2<'_, T>) -> Array2<T> {
        let c = self.cache.as_ref().expect("Dense::backward called before forward");
        let dz = self.activation.backward(&c.z, &c.y, &dy);
        self.weight.grad += &c.x.t().dot(&dz);
        self.bias.grad += &dz.sum_axis(Axis(0)).insert_axis(Axis(0));
        dz.dot(&self.weight.value.t())
    }

    /// Minimum |pre-activation| from the last forward; distance to the ReLU kink.
    pub fn kink_margin(&self) -> Option<T> {
        if self.activation != Activation::Relu {
            return None;
        }
        self.cache
            .as_ref()
            .map(|c| c.z.iter().fold(T::infinity(), |m, v| m.min(v.abs())))
    }
}

impl<T: Scalar> HasParams<T> for Dense<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[cfg(test)]
mod tests {
    use ndarray::{array, Array2};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn identity_weights_pass_through() {
        let mut d = Dense::from_params(
            Param::new("w", Array2::<f64>::eye(3)),
            Param::zeros("b", 1, 3),
            Activation::None,
        );
        let x = array![[1.0, -2.0, 3.5], [0.0, 4.0, -1.0]];
        assert_eq!(d.forward(x.view()).unwrap(), x);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut d = Dense::<f64>::new("d", 3, 2, Activation::Relu, &mut rng);
        let err = d.forward(Array2::zeros((4, 5)).view()).unwrap_err().to_string();
        assert!(err.contains("[4, 5]") && err.contains("[3, 2]"), "{err}");
    }
}
