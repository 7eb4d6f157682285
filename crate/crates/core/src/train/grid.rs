use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Run seeds used for every reported result.
pub const SEEDS: [u64; 5] = [13, 22, 42, 66, 78];

/// The searched value ranges. `kernels` is a single fixed set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub lstm_dim: Vec<usize>,
    pub lstm_layers: Vec<usize>,
    pub cnn_filters: Vec<usize>,
    pub kernels: Vec<usize>,
    pub pool: Vec<usize>,
    pub dense: Vec<usize>,
    pub dropout: Vec<f64>,
    pub batch_size: Vec<usize>,
    pub lr: Vec<f64>,
    pub threshold: Vec<f64>,
}

impl HyperGrid {
    /// Full published ranges.
    pub fn full() -> Self {
        HyperGrid {
            lstm_dim: vec![64, 128, 256, 512],
            lstm_layers: vec![1, 2, 3, 4],
            cnn_filters: vec![14, 16, 18],
            kernels: vec![1, 4, 7],
            pool: vec![3, 5, 7],
            dense: vec![8, 16, 32, 64, 128, 256, 512],
            dropout: vec![0.1, 0.3, 0.5],
            batch_size: vec![20, 40, 60],
            lr: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            threshold: vec![0.3, 0.5, 0.7],
        }
    }

    /// Full ranges with hidden sizes capped at `cap`.
    pub fn capped(cap: usize) -> Self {
        let mut g = Self::full();
        g.lstm_dim.retain(|&v| v <= cap);
        g.dense.retain(|&v| v <= cap);
        g
    }

    /// Default for laptop-scale runs: hidden sizes capped at 128.
    pub fn desk() -> Self {
        Self::capped(128)
    }

    pub fn size(&self) -> usize {
        self.lstm_dim.len()
            * self.lstm_layers.len()
            * self.cnn_filters.len()
            * self.pool.len()
            * self.dense.len()
            * self.dropout.len()
            * self.batch_size.len()
            * self.lr.len()
            * self.threshold.len()
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("lstm_dim", self.lstm_dim.is_empty()),
            ("lstm_layers", self.lstm_layers.is_empty()),
            ("cnn_filters", self.cnn_filters.is_empty()),
            ("kernels", self.kernels.is_empty()),
            ("pool", self.pool.is_empty()),
            ("dense", self.dense.is_empty()),
            ("dropout", self.dropout.is_empty()),
            ("batch_size", self.batch_size.is_empty()),
            ("lr", self.lr.is_empty()),
            ("threshold", self.threshold.is_empty()),
        ];
        match empty.iter().find(|(_, e)| *e) {
            Some((name, _)) => Err(Error::Config(format!("grid field {name} has no values"))),
            None => Ok(()),
        }
    }

    /// `budget` distinct configurations drawn uniformly from the grid.
    pub fn sample(&self, budget: usize, seed: u64) -> Result<Vec<HyperConfig>> {
        self.validate()?;
        if budget == 0 {
            return Err(Error::Config("grid budget must be at least 1".into()));
        }
        let budget = budget.min(self.size());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(budget);
        while out.len() < budget {
            let c = HyperConfig {
                lstm_dim: *self.lstm_dim.choose(&mut rng).expect("non-empty"),
                lstm_layers: *self.lstm_layers.choose(&mut rng).expect("non-empty"),
                cnn_filters: *self.cnn_filters.choose(&mut rng).expect("non-empty"),
                kernels: self.kernels.clone(),
                pool: *self.pool.choose(&mut rng).expect("non-empty"),
                dense: *self.dense.choose(&mut rng).expect("non-empty"),
                dropout: *self.dropout.choose(&mut rng).expect("non-empty"),
                batch_size: *self.batch_size.choose(&mut rng).expect("non-empty"),
                lr: *self.lr.choose(&mut rng).expect("non-empty"),
                threshold: *self.threshold.choose(&mut rng).expect("non-empty"),
            };
            if seen.insert(c.key()) {
                out.push(c);
            }
        }
        Ok(out)
    }
}

/// One point of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    pub lstm_dim: usize,
    pub lstm_layers: usize,
    pub cnn_filters: usize,
    pub kernels: Vec<usize>,
    pub pool: usize,
    pub dense: usize,
    pub dropout: f64,
    pub batch_size: usize,
    pub lr: f64,
    pub threshold: f64,
}

impl Default for HyperConfig {
    fn default() -> Self {
        HyperConfig {
            lstm_dim: 64,
            lstm_layers: 1,
            cnn_filters: 16,
            kernels: vec![1, 4, 7],
            pool: 3,
            dense: 32,
            dropout: 0.3,
            batch_size: 20,
            lr: 1e-3,
            threshold: 0.5,
        }
    }
}

impl HyperConfig {
    fn key(&self) -> String {
        format!("{self:?}")
    }

    /// True when every field takes a value listed in `grid`.
    pub fn within(&self, grid: &HyperGrid) -> bool {
        grid.lstm_dim.contains(&self.lstm_dim)
            && grid.lstm_layers.contains(&self.lstm_layers)
            && grid.cnn_filters.contains(&self.cnn_filters)
            && grid.kernels == self.kernels
            && grid.pool.contains(&self.pool)
            && grid.dense.contains(&self.dense)
            && grid.dropout.contains(&self.dropout)
            && grid.batch_size.contains(&self.batch_size)
            && grid.lr.contains(&self.lr)
            && grid.threshold.contains(&self.threshold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_stay_on_grid_and_are_reproducible() {
        let g = HyperGrid::desk();
        let a = g.sample(20, 3).unwrap();
        assert_eq!(a, g.sample(20, 3).unwrap());
        assert_ne!(a, g.sample(20, 4).unwrap());
        assert!(a.iter().all(|c| c.within(&g)));
        assert!(a.iter().all(|c| c.lstm_dim <= 128 && c.dense <= 128));
        let keys: BTreeSet<String> = a.iter().map(HyperConfig::key).collect();
        assert_eq!(keys.len(), 20);
    }

    #[test]
    fn budget_is_clamped_to_grid_size() {
        let mut g = HyperGrid::desk();
        g.lstm_dim = vec![64];
        g.lstm_layers = vec![1];
        g.cnn_filters = vec![16];
        g.pool = vec![3];
        g.dense = vec![32];
        g.dropout = vec![0.3];
        g.batch_size = vec![20];
        g.lr = vec![1e-3, 1e-2];
        g.threshold = vec![0.5];
        assert_eq!(g.sample(10, 0).unwrap().len(), 2);
        assert!(g.sample(0, 0).is_err());
    }
}
