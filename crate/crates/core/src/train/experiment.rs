use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{Dataset, GuardedFold, Phase};
use super::grid::{HyperConfig, HyperGrid};
use super::trainer::{fit, run_seed, train_one, RunOutcome, RunRecord, TrainConfig};
use crate::corpus::{derive_seed, SplitPlan};
use crate::error::{Error, Result};
use crate::eval::{nested_subsample, population_std, CurvePoint, Prf};
use crate::model::{Decision, Decoder, Fusion, ModelSpec, Modality, TowerSpec};

use super::data::FoldFeatures;

/// A system: the text tower plus zero, one or four second-modality towers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub name: String,
    pub second: Vec<Modality>,
    pub decoder: Decoder,
    pub fusion: Fusion,
}

impl SystemSpec {
    pub fn text() -> Self {
        SystemSpec {
            name: "text".into(),
            second: Vec::new(),
            decoder: Decoder::Recurrent,
            fusion: Fusion::Concat,
        }
    }

    /// Text plus one second-modality tower, named `text+<modality>`.
    pub fn with(modality: Modality, decoder: Decoder) -> Self {
        SystemSpec {
            name: format!("text+{modality}"),
            second: vec![modality],
            decoder,
            fusion: Fusion::Concat,
        }
    }

    pub fn model_spec(&self, data: &Dataset, hyper: &HyperConfig) -> Result<ModelSpec> {
        let tower = |modality: Modality, decoder: Decoder, input_dim: usize| TowerSpec {
            modality,
            decoder,
            input_dim,
            vocab_size: None,
            lstm_dim: hyper.lstm_dim,
            lstm_layers: hyper.lstm_layers,
            cnn_filters: hyper.cnn_filters,
            kernels: hyper.kernels.clone(),
            pool: hyper.pool,
            dense: hyper.dense,
            dropout: hyper.dropout,
        };
        let mut text = tower(Modality::Text, Decoder::Recurrent, data.text_dim());
        text.vocab_size = data.vocab_size();
        let mut towers = vec![text];
        for &m in &self.second {
            towers.push(tower(m, self.decoder, data.feature_dim(m)?));
        }
        let spec = ModelSpec {
            towers,
            fusion: self.fusion,
            head: data.head,
            threshold: hyper.threshold,
            max_len: data.max_len,
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Seeds, stopping rule and worker count shared by all runs of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub seeds: Vec<u64>,
    pub train: TrainConfig,
    /// Worker threads; results do not depend on this.
    pub threads: usize,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            seeds: super::grid::SEEDS.to_vec(),
            train: TrainConfig::default(),
            threads: 1,
        }
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))
}

/// Fold `k` as a guarded fold, with the fit ids optionally subsampled.
fn guarded_fold(data: &Dataset, split: &SplitPlan, k: usize, fraction: f64, seed: u64) -> Result<GuardedFold> {
    let (fit_ids, val_ids) = split
        .folds
        .get(k)
        .ok_or_else(|| Error::invalid(format!("split has no fold {k}")))?;
    let fit_ids = if fraction < 1.0 {
        let idx = data.indices_of(fit_ids)?;
        let strata: Vec<usize> = idx.iter().map(|&i| data.strata[i]).collect();
        nested_subsample(fit_ids, &strata, fraction, seed)?
    } else {
        fit_ids.clone()
    };
    GuardedFold::new(
        data.indices_of(&fit_ids)?,
        data.indices_of(val_ids)?,
        data.indices_of(&split.test_ids)?,
    )
}

/// Candidate of a grid search with its mean validation accuracy over folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub config: HyperConfig,
    pub mean_val_accuracy: f64,
    pub parameters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best: HyperConfig,
    pub candidates: Vec<Candidate>,
    /// Validation-only runs; test fields are empty.
    pub records: Vec<RunRecord>,
}

/// Picks the highest mean validation accuracy; ties go to fewer parameters, then lower lr.
pub fn select_best(candidates: &[Candidate]) -> Option<&Candidate> {
    candidates.iter().reduce(|best, c| {
        let better = c.mean_val_accuracy > best.mean_val_accuracy
            || (c.mean_val_accuracy == best.mean_val_accuracy
                && (c.parameters < best.parameters
                    || (c.parameters == best.parameters && c.config.lr < best.config.lr)));
        if better {
            c
        } else {
            best
        }
    })
}

/// Budgeted random search over `grid`, scored by validation accuracy over all
/// folds with a single seed. Test examples are never read. With budget 1 the
/// sampled configuration is returned untrained.
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    data: &Dataset,
    split: &SplitPlan,
    system: &SystemSpec,
    grid: &HyperGrid,
    budget: usize,
    seed: u64,
    opts: &ExperimentOptions,
) -> Result<GridResult> {
    let configs = grid.sample(budget, derive_seed(seed, "grid"))?;
    if configs.len() == 1 {
        return Ok(GridResult {
            best: configs[0].clone(),
            candidates: Vec::new(),
            records: Vec::new(),
        });
    }
    let units: Vec<(usize, usize)> = (0..configs.len())
        .flat_map(|c| (0..split.folds.len()).map(move |k| (c, k)))
        .collect();
    let records = pool(opts.threads)?.install(|| {
        units
            .par_iter()
            .map(|&(c, k)| {
                let hyper = &configs[c];
                let spec = system.model_spec(data, hyper)?;
                let start = std::time::Instant::now();
                let mut fold = guarded_fold(data, split, k, 1.0, seed)?;
                let fit_rows = fold.read(Phase::Fit, data)?;
                let features = FoldFeatures::prepare(data, &system.second, &fit_rows)?;
                let out = fit(&spec, data, &mut fold, &features, hyper, &opts.train, run_seed(seed, k))?;
                Ok(RunRecord {
                    system: system.name.clone(),
                    config: hyper.clone(),
                    seed,
                    fold: k,
                    epochs: out.epochs,
                    best_epoch: out.best_epoch,
                    best_val_accuracy: out.best_val_accuracy,
                    test_counts: Vec::new(),
                    precision: 0.0,
                    recall: 0.0,
                    f1: 0.0,
                    n_test: 0,
                    wall_clock_ms: start.elapsed().as_millis() as u64,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let folds = split.folds.len();
    let candidates: Vec<Candidate> = configs
        .iter()
        .enumerate()
        .map(|(c, config)| {
            let accs = &records[c * folds..(c + 1) * folds];
            Ok(Candidate {
                config: config.clone(),
                mean_val_accuracy: accs.iter().map(|r| r.best_val_accuracy).sum::<f64>() / folds as f64,
                parameters: system.model_spec(data, config)?.parameter_count(),
            })
        })
        .collect::<Result<_>>()?;
    let best = select_best(&candidates).expect("at least two candidates").config.clone();
    Ok(GridResult {
        best,
        candidates,
        records,
    })
}

/// Aggregated test results of one system over seeds and folds.
#[derive(Debug, Clone)]
pub struct SystemResult {
    pub system: String,
    pub config: HyperConfig,
    /// Seed-major, fold-minor.
    pub records: Vec<RunRecord>,
    /// Macro scores per seed, averaged over folds.
    pub per_seed: Vec<Prf>,
    pub mean: Prf,
    /// Population standard deviation over seeds.
    pub std: Prf,
    /// Test predictions of every run, concatenated in record order.
    pub predictions: Vec<Decision>,
    /// Targets aligned with `predictions`.
    pub truths: Vec<Decision>,
}

impl SystemResult {
    fn from_runs(system: &str, config: &HyperConfig, data: &Dataset, seeds: usize, runs: Vec<RunOutcome>) -> Self {
        let folds = runs.len() / seeds.max(1);
        let per_seed: Vec<Prf> = runs
            .chunks(folds.max(1))
            .map(|chunk| {
                let n = chunk.len() as f64;
                Prf {
                    precision: chunk.iter().map(|r| r.record.precision).sum::<f64>() / n,
                    recall: chunk.iter().map(|r| r.record.recall).sum::<f64>() / n,
                    f1: chunk.iter().map(|r| r.record.f1).sum::<f64>() / n,
                }
            })
            .collect();
        let field = |f: fn(&Prf) -> f64| per_seed.iter().map(f).collect::<Vec<f64>>();
        let mean_of = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        let (p, r, f) = (field(|x| x.precision), field(|x| x.recall), field(|x| x.f1));
        let mut predictions = Vec::new();
        let mut truths = Vec::new();
        let mut records = Vec::new();
        for run in runs {
            truths.extend(run.test_rows.iter().map(|&i| data.targets[i].clone()));
            predictions.extend(run.predictions);
            records.push(run.record);
        }
        SystemResult {
            system: system.to_string(),
            config: config.clone(),
            records,
            mean: Prf {
                precision: mean_of(&p),
                recall: mean_of(&r),
                f1: mean_of(&f),
            },
            std: Prf {
                precision: population_std(&p),
                recall: population_std(&r),
                f1: population_std(&f),
            },
            per_seed,
            predictions,
            truths,
        }
    }
}

/// Trains `system` with `hyper` for every seed and fold on the given
/// fraction of each fold's fit examples, and scores each run on the test set.
pub fn run_experiment_at(
    data: &Dataset,
    split: &SplitPlan,
    system: &SystemSpec,
    hyper: &HyperConfig,
    fraction: f64,
    opts: &ExperimentOptions,
) -> Result<SystemResult> {
    if opts.seeds.is_empty() {
        return Err(Error::invalid("no seeds given"));
    }
    let spec = system.model_spec(data, hyper)?;
    let units: Vec<(u64, usize)> = opts
        .seeds
        .iter()
        .flat_map(|&s| (0..split.folds.len()).map(move |k| (s, k)))
        .collect();
    let runs = pool(opts.threads)?.install(|| {
        units
            .par_iter()
            .map(|&(seed, k)| {
                let fold = guarded_fold(data, split, k, fraction, seed)?;
                train_one(&system.name, &spec, data, fold, hyper, &opts.train, seed, k)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(SystemResult::from_runs(&system.name, hyper, data, opts.seeds.len(), runs))
}

pub fn run_experiment(
    data: &Dataset,
    split: &SplitPlan,
    system: &SystemSpec,
    hyper: &HyperConfig,
    opts: &ExperimentOptions,
) -> Result<SystemResult> {
    run_experiment_at(data, split, system, hyper, 1.0, opts)
}

/// Data ablation: one curve point per (system, fraction).
pub fn run_ablation(
    data: &Dataset,
    split: &SplitPlan,
    systems: &[(SystemSpec, HyperConfig)],
    fractions: &[f64],
    opts: &ExperimentOptions,
) -> Result<(Vec<CurvePoint>, Vec<SystemResult>)> {
    let mut points = Vec::new();
    let mut results = Vec::new();
    for (system, hyper) in systems {
        for &fraction in fractions {
            let r = run_experiment_at(data, split, system, hyper, fraction, opts)?;
            points.push(CurvePoint {
                system: system.name.clone(),
                fraction,
                mean_f1: r.mean.f1,
                std: r.std.f1,
            });
            results.push(r);
        }
    }
    Ok((points, results))
}

/// Appends one JSON object per record.
pub fn append_records(path: &Path, records: &[RunRecord]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
