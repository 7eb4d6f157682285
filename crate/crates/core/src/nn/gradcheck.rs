use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::param::Param;

/// Central finite-difference gradient check in `f64`.
#[derive(Debug, Clone)]
pub struct GradCheck {
    pub step: f64,
    /// Check every coordinate up to this many, otherwise a random subsample of this size.
    pub max_coords: usize,
    pub seed: u64,
    /// Denominator floor for the relative error.
    pub floor: f64,
    pub tolerance: f64,
}

impl Default for GradCheck {
    fn default() -> Self {
        GradCheck {
            step: 1e-5,
            max_coords: 400,
            seed: 0,
            floor: 1e-6,
            tolerance: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct GradReport {
    pub max_rel_error: f64,
    pub coords_checked: usize,
    /// Failing coordinates where the loss is visibly non-smooth (ReLU / max kinks).
    pub kink_hits: usize,
    pub non_finite: bool,
    /// (coordinate, analytic, numeric) of the largest relative error.
    pub worst: Option<(usize, f64, f64)>,
}

impl GradReport {
    pub fn passed(&self, tolerance: f64) -> bool {
        !self.non_finite && self.max_rel_error < tolerance
    }
}

impl GradCheck {
    /// Compares `analytic` against central differences of `loss` around `theta`.
    pub fn check<F>(&self, theta: &[f64], analytic: &[f64], mut loss: F) -> GradReport
    where
        F: FnMut(&[f64]) -> f64,
    {
        assert_eq!(theta.len(), analytic.len(), "parameter and gradient length differ");
        let n = theta.len();
        let coords: Vec<usize> = if n <= self.max_coords {
            (0..n).collect()
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let mut idx = sample(&mut rng, n, self.max_coords).into_vec();
            idx.sort_unstable();
            idx
        };
        let mut report = GradReport {
            coords_checked: coords.len(),
            ..Default::default()
        };
        let mut x = theta.to_vec();
        let f0 = loss(&x);
        if !f0.is_finite() {
            report.non_finite = true;
            return report;
        }
        for &i in &coords {
            let orig = x[i];
            x[i] = orig + self.step;
            let fp = loss(&x);
            x[i] = orig - self.step;
            let fm = loss(&x);
            x[i] = orig;
            let a = analytic[i];
            if !(fp.is_finite() && fm.is_finite() && a.is_finite()) {
                report.non_finite = true;
                continue;
            }
            let num = (fp - fm) / (2.0 * self.step);
            let rel = (a - num).abs() / a.abs().max(num.abs()).max(self.floor);
            if rel >= self.tolerance && (fp - 2.0 * f0 + fm).abs() > 1e-8 * f0.abs().max(1.0) {
                report.kink_hits += 1;
            }
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((i, a, num));
            }
        }
        report
    }
}

pub fn flatten_values(params: &[&Param<f64>]) -> Vec<f64> {
    params.iter().flat_map(|p| p.value.iter().copied()).collect()
}

pub fn flatten_grads(params: &[&Param<f64>]) -> Vec<f64> {
    params.iter().flat_map(|p| p.grad.iter().copied()).collect()
}

/// Writes a flat vector back into the parameters, in order.
pub fn set_values(params: &mut [&mut Param<f64>], values: &[f64]) {
    let mut it = values.iter();
    for p in params.iter_mut() {
        for v in p.value.iter_mut() {
            *v = *it.next().expect("value vector too short");
        }
    }
    assert!(it.next().is_none(), "value vector too long");
}
