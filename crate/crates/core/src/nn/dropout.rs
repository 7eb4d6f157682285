use ndarray::{Array, Dimension};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::invalid(format!("dropout rate must be in [0, 1), got {rate}")));
    }
    Ok(())
}

/// Inverted dropout; keeps the mask of the last training-mode forward.
pub struct Dropout<T: Scalar, D: Dimension> {
    pub rate: f64,
    mask: Option<Array<T, D>>,
}

impl<T: Scalar, D: Dimension> Dropout<T, D> {
    pub fn new(rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(Dropout { rate, mask: None })
    }

    pub fn forward<R: Rng>(&mut self, x: &Array<T, D>, training: bool, rng: &mut R) -> Array<T, D> {
        if !training || self.rate == 0.0 {
            self.mask = None;
            return x.clone();
        }
        let scale = T::of(1.0 / (1.0 - self.rate));
        let mask = x.map(|_| if rng.gen::<f64>() < self.rate { T::zero() } else { scale });
        let y = x * &mask;
        self.mask = Some(mask);
        y
    }

    pub fn backward(&self, dy: &Array<T, D>) -> Array<T, D> {
        match &self.mask {
            Some(m) => dy * m,
            None => dy.clone(),
        }
    }
}

/// Stateless inverted dropout with its own seeded stream.
pub fn dropout<T: Scalar, D: Dimension>(x: &Array<T, D>, rate: f64, training: bool, seed: u64) -> Result<Array<T, D>> {
    let mut layer = Dropout::new(rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(layer.forward(x, training, &mut rng))
}
