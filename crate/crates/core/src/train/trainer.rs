use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{Dataset, FoldFeatures, GuardedFold, Phase, TextSource};
use super::grid::HyperConfig;
use crate::corpus::derive_seed;
use crate::error::{Error, Result};
use crate::eval::{confusion, ConfusionCounts, MacroPrf};
use crate::model::{Batch, Decision, ModelSpec, Network};
use crate::nn::{Adam, HasParams};

/// Examples per evaluation batch.
const EVAL_BATCH: usize = 64;

/// Stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Epochs without improvement before stopping.
    pub patience: usize,
    /// Smallest validation accuracy gain that counts as an improvement.
    pub min_delta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_epochs: 500,
            patience: 80,
            min_delta: 1e-7,
        }
    }
}

impl TrainConfig {
    /// Laptop-scale cap of 200 epochs.
    pub fn desk() -> Self {
        TrainConfig {
            max_epochs: 200,
            ..Self::default()
        }
    }
}

/// Result of [`fit`]: the network restored to its best validation epoch.
pub struct FitOutcome {
    pub network: Network<f32>,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    /// Validation accuracy after each epoch.
    pub history: Vec<f64>,
    /// Mean training loss per epoch.
    pub train_loss: Vec<f64>,
}

/// One (config, seed, fold) unit as stored in the results log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub system: String,
    pub config: HyperConfig,
    pub seed: u64,
    pub fold: usize,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    /// Per class (or per label) counts on the test set; empty for search runs.
    pub test_counts: Vec<ConfusionCounts>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_test: usize,
    pub wall_clock_ms: u64,
}

/// A finished run with its test predictions, in test-set order.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub predictions: Vec<Decision>,
    pub test_rows: Vec<usize>,
}

/// Per-run seed shared by every system, so all systems start from the same
/// text tower and see the same batch order.
pub fn run_seed(seed: u64, fold: usize) -> u64 {
    derive_seed(seed, &format!("run/fold{fold}"))
}

/// Fraction of examples whose decision equals the target (subset accuracy for label sets).
pub fn accuracy(pred: &[Decision], truth: &[Decision]) -> f64 {
    if pred.is_empty() {
        return 0.0;
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / pred.len() as f64
}

/// Builds the network for a spec, installing any frozen pretrained table.
pub fn build_network(spec: &ModelSpec, data: &Dataset, seed: u64) -> Result<Network<f32>> {
    let mut net = Network::new(spec, seed)?;
    if let TextSource::Vocab { table: Some(t), .. } = &data.text {
        net.set_embedding_table(t.clone(), false)?;
    }
    Ok(net)
}

fn eval_batches(features: &FoldFeatures, data: &Dataset, rows: &[usize], seed: u64) -> Vec<Batch<f32>> {
    rows.chunks(EVAL_BATCH)
        .enumerate()
        .map(|(k, chunk)| features.batch(data, chunk, (derive_seed(seed, &format!("eval/{k}")), 0)))
        .collect()
}

fn predict_all(net: &mut Network<f32>, batches: &[Batch<f32>]) -> Result<Vec<Decision>> {
    let mut out = Vec::new();
    for b in batches {
        out.extend(net.predict(b)?);
    }
    Ok(out)
}

fn snapshot(net: &Network<f32>) -> Vec<Array2<f32>> {
    net.params().iter().map(|p| p.value.clone()).collect()
}

fn restore(net: &mut Network<f32>, snap: &[Array2<f32>]) {
    for (p, v) in net.params_mut().into_iter().zip(snap) {
        p.value.assign(v);
    }
}

/// Trains on the fit rows with early stopping on validation accuracy.
pub fn fit(
    spec: &ModelSpec,
    data: &Dataset,
    fold: &mut GuardedFold,
    features: &FoldFeatures,
    hyper: &HyperConfig,
    train: &TrainConfig,
    seed: u64,
) -> Result<FitOutcome> {
    if train.max_epochs == 0 || hyper.batch_size == 0 {
        return Err(Error::invalid("max_epochs and batch_size must be positive"));
    }
    let mut net = build_network(spec, data, seed)?;
    let mut opt = Adam::new(hyper.lr);
    let fit_rows = fold.read(Phase::Fit, data)?;
    let val_rows = fold.read(Phase::Validation, data)?;
    let val_truth: Vec<Decision> = val_rows.iter().map(|&i| data.targets[i].clone()).collect();
    let val_batches = eval_batches(features, data, &val_rows, derive_seed(seed, "validation"));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "dropout"));

    let mut best = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut best_params = snapshot(&net);
    let mut wait = 0;
    let mut history = Vec::new();
    let mut train_loss = Vec::new();
    for epoch in 1..=train.max_epochs {
        let mut order = fit_rows.clone();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, &format!("order/epoch{epoch}"))));
        let mut loss_sum = 0.0;
        for (k, chunk) in order.chunks(hyper.batch_size).enumerate() {
            let noise = derive_seed(seed, &format!("noise/batch{k}"));
            let batch = features.batch(data, chunk, (noise, epoch));
            let loss = net.loss_and_grad(&batch, true, &mut dropout_rng)?;
            if !loss.is_finite() {
                log::warn!("non-finite training loss at epoch {epoch}");
            }
            loss_sum += f64::from(loss) * chunk.len() as f64;
            opt.step(&mut net.params_mut());
        }
        train_loss.push(loss_sum / order.len() as f64);
        let acc = accuracy(&predict_all(&mut net, &val_batches)?, &val_truth);
        history.push(acc);
        if acc - best >= train.min_delta {
            best = acc;
            best_epoch = epoch;
            best_params = snapshot(&net);
            wait = 0;
        } else {
            wait += 1;
            if wait >= train.patience {
                break;
            }
        }
    }
    restore(&mut net, &best_params);
    Ok(FitOutcome {
        network: net,
        epochs: history.len(),
        best_epoch,
        best_val_accuracy: best,
        history,
        train_loss,
    })
}

/// Trains one fold, then (and only then) reads the test rows and scores them.
#[allow(clippy::too_many_arguments)]
pub fn train_one(
    system: &str,
    spec: &ModelSpec,
    data: &Dataset,
    mut fold: GuardedFold,
    hyper: &HyperConfig,
    train: &TrainConfig,
    seed: u64,
    fold_index: usize,
) -> Result<RunOutcome> {
    let start = Instant::now();
    let fit_rows = fold.read(Phase::Fit, data)?;
    let modalities: Vec<_> = spec.towers[1..].iter().map(|t| t.modality).collect();
    let features = FoldFeatures::prepare(data, &modalities, &fit_rows)?;
    let rs = run_seed(seed, fold_index);
    let mut out = fit(spec, data, &mut fold, &features, hyper, train, rs)?;
    fold.seal();
    let test_rows = fold.read(Phase::Test, data)?;
    let truth: Vec<Decision> = test_rows.iter().map(|&i| data.targets[i].clone()).collect();
    let batches = eval_batches(&features, data, &test_rows, derive_seed(rs, "test"));
    let predictions = predict_all(&mut out.network, &batches)?;
    let counts = confusion(&predictions, &truth, data.head.outputs())?;
    let prf = MacroPrf::from_counts(&counts);
    Ok(RunOutcome {
        record: RunRecord {
            system: system.to_string(),
            config: hyper.clone(),
            seed,
            fold: fold_index,
            epochs: out.epochs,
            best_epoch: out.best_epoch,
            best_val_accuracy: out.best_val_accuracy,
            test_counts: counts,
            precision: prf.macro_avg.precision,
            recall: prf.macro_avg.recall,
            f1: prf.macro_avg.f1,
            n_test: test_rows.len(),
            wall_clock_ms: start.elapsed().as_millis() as u64,
        },
        predictions,
        test_rows,
    })
}
