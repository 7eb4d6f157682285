use ndarray::Array2;
use rand::Rng;

use crate::scalar::Scalar;

/// A named parameter matrix with its accumulated gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub value: Array2<T>,
    pub grad: Array2<T>,
    pub trainable: bool,
}

impl<T: Scalar> Param<T> {
    pub fn new(name: impl Into<String>, value: Array2<T>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Param {
            name: name.into(),
            value,
            grad,
            trainable: true,
        }
    }

    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self::new(name, Array2::zeros((rows, cols)))
    }

    /// Uniform on [-bound, bound].
    pub fn uniform<R: Rng>(name: impl Into<String>, rows: usize, cols: usize, bound: f64, rng: &mut R) -> Self {
        let value = Array2::from_shape_simple_fn((rows, cols), || T::of(rng.gen_range(-bound..=bound)));
        Self::new(name, value)
    }

    /// Glorot-uniform with the given fans.
    pub fn glorot<R: Rng>(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Self::uniform(name, rows, cols, bound, rng)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Access to a component's parameters in declaration order.
pub trait HasParams<T: Scalar> {
    fn params(&self) -> Vec<&Param<T>>;
    fn params_mut(&mut self) -> Vec<&mut Param<T>>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.fill(T::zero());
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}
