//! The pipeline steps behind the command-line tool. Each command reads a
//! resolved [`Config`], writes its outputs plus the effective configuration,
//! and returns a short human-readable summary.

mod config;
mod results;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub use config::{Config, OUT_ENV};
pub use results::{decision_from_labels, decision_to_labels, file_stem, SystemSummary};

use crate::corpus::{
    generate_synthetic, load_corpus, load_embeddings, make_split, EmbeddingKind, SplitPlan,
    SynthConfig, SynthTask,
};
use crate::error::{Error, Result};
use crate::eval::{
    binary_relation_task, bonferroni, bootstrap_compare, most_frequent_relations, significance_mark, write_curve_csv, write_table_csv,
    TableRow, ALPHA,
};
use crate::model::{Decoder, Modality};
use crate::signal::{extract_corpus, read_feature_csv, write_feature_csv, Band, ExtractOptions, FeatureSet, MissingEeg};
use crate::train::{
    append_records, grid_search, run_ablation, run_experiment, Dataset, ExperimentOptions, HyperConfig, HyperGrid,
    SystemSpec, TaskKind, TrainConfig,
};

pub const TABLE_FILE: &str = "table.csv";
pub const CURVE_FILE: &str = "curve.csv";
pub const COMPLEXITY_FILE: &str = "complexity.csv";
pub const REPORT_FILE: &str = "report.md";

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes a synthetic corpus.
pub fn cmd_gen(cfg: &Config) -> Result<String> {
    let task: SynthTask = cfg.get("gen.task")?;
    let synth = SynthConfig {
        task,
        n_sentences: cfg.get("gen.n")?,
        vocab_size: cfg.get("gen.vocab")?,
        n_subjects: cfg.get("gen.subjects")?,
        band: cfg.get("gen.band")?,
        gain: cfg.get("gen.gain")?,
        noise_rms_uv: cfg.get("gen.noise_rms")?,
        ..SynthConfig::default()
    };
    let dir = cfg.corpus_dir();
    mkdir(&dir)?;
    let corpus = generate_synthetic(synth, cfg.get("gen.seed")?, &dir)?;
    cfg.effective()?.write(&dir.join("gen.config.toml"))?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for s in &corpus.sentences {
        let l = &s.sentence.labels;
        if let Some(c) = l.sentiment {
            *counts.entry(format!("{c:?}").to_lowercase()).or_default() += 1;
        }
        for r in l.relations.iter().flatten() {
            *counts.entry(r.name().to_string()).or_default() += 1;
        }
    }
    let mut out = format!(
        "{} sentences, {} subjects, task {task}, written to {}\n",
        corpus.sentences.len(),
        corpus.config.n_subjects,
        dir.display()
    );
    for (k, v) in counts {
        let _ = writeln!(out, "  {k}: {v}");
    }
    Ok(out)
}

fn feature_path(dir: &Path, set: FeatureSet) -> PathBuf {
    dir.join(format!("{}.csv", set.name()))
}

/// Writes one feature CSV per band plus gaze.
pub fn cmd_extract(cfg: &Config) -> Result<String> {
    let corpus = load_corpus(cfg.corpus_dir())?;
    let opts = ExtractOptions {
        alignment: cfg.enum_value("extract.alignment")?,
        pooling: cfg.enum_value("extract.pooling")?,
        ..ExtractOptions::default()
    };
    let missing: MissingEeg = cfg.enum_value("extract.missing_eeg")?;
    let table = extract_corpus(&corpus, &Band::ALL, &opts, missing, cfg.threads()?)?;
    let dir = cfg.features_dir();
    mkdir(&dir)?;
    for (set, matrices) in &table.sets {
        write_feature_csv(&feature_path(&dir, *set), matrices)?;
    }
    let stats = serde_json::json!({
        "stats": table.stats,
        "missing_eeg": table.missing_eeg,
        "fixations_dropped_short": corpus.report.fixations_dropped_short,
    });
    let path = dir.join("extract.json");
    fs::write(&path, serde_json::to_string_pretty(&stats)? + "\n").map_err(|e| Error::io(&path, e))?;
    cfg.effective()?.write(&dir.join("extract.config.toml"))?;
    Ok(format!(
        "{} sentences: {} fixations, {} windows rejected as artifacts, {} missing recordings; features in {}\n",
        corpus.sentences.len(),
        table.stats.fixations,
        table.stats.rejected_artifact,
        table.missing_eeg.len(),
        dir.display()
    ))
}

/// Systems named by `model.modality`: `text`, `gaze`, `noise`, `eeg:<band>` or `eeg:all`.
pub fn systems(cfg: &Config) -> Result<Vec<SystemSpec>> {
    let decoder: Decoder = cfg.get("model.decoder")?;
    let fusion = cfg.get("model.fusion")?;
    let names: Vec<String> = cfg.list("model.modality")?;
    if names.is_empty() {
        return Err(Error::Config("model.modality lists no systems".into()));
    }
    names
        .iter()
        .map(|name| {
            let name = name.trim_start_matches('+');
            let mut sys = match name {
                "text" => SystemSpec::text(),
                "eeg:all" => SystemSpec {
                    name: "text+eeg:all".into(),
                    second: Band::FREQUENCY.iter().map(|&b| Modality::Eeg(b)).collect(),
                    decoder,
                    fusion,
                },
                other => SystemSpec::with(other.parse()?, decoder),
            };
            if sys.second.len() == 1 {
                sys.fusion = fusion;
            }
            Ok(sys)
        })
        .collect()
}

fn task_kind(cfg: &Config) -> Result<TaskKind> {
    cfg.get("task")
}

/// Corpus sentences for the task, with embeddings and the feature sets `needed` attached.
fn load_dataset(cfg: &Config, needed: &BTreeSet<FeatureSet>, labels: Option<&[(String, usize)]>) -> Result<Dataset> {
    let corpus = load_corpus(cfg.corpus_dir())?;
    let kind: EmbeddingKind = cfg.get("embedding.kind")?;
    let dim = match cfg.raw("embedding.dim") {
        "" => kind.default_dim(),
        _ => cfg.get("embedding.dim")?,
    };
    let mut data = match labels {
        Some(l) => Dataset::from_labelled(&corpus.sentences, l, 2, dim)?,
        None => Dataset::from_sentences(&corpus.sentences, task_kind(cfg)?, dim)?,
    };
    if kind != EmbeddingKind::Random {
        let path = cfg.raw("embedding.path");
        if path.is_empty() {
            return Err(Error::Config(format!("embedding.kind = {kind:?} needs embedding.path")));
        }
        let table = load_embeddings(Path::new(path), kind, dim)?;
        let oov = data.use_embeddings(&table, &corpus.sentences)?;
        if oov > 0 {
            log::warn!("{oov} word types have no pretrained vector; their rows are zero");
        }
    }
    let dir = cfg.features_dir();
    for &set in needed {
        let path = feature_path(&dir, set);
        if !path.exists() {
            return Err(Error::Missing(vec![path]));
        }
        data.add_features(Modality::from(set), read_feature_csv(&path, set)?)?;
    }
    Ok(data)
}

fn needed_sets(systems: &[SystemSpec]) -> BTreeSet<FeatureSet> {
    systems
        .iter()
        .flat_map(|s| s.second.iter())
        .filter_map(|m| match m {
            Modality::Eeg(b) => Some(FeatureSet::Eeg(*b)),
            Modality::Gaze => Some(FeatureSet::Gaze),
            _ => None,
        })
        .collect()
}

fn options(cfg: &Config) -> Result<ExperimentOptions> {
    Ok(ExperimentOptions {
        seeds: cfg.list("seeds")?,
        train: TrainConfig {
            max_epochs: cfg.get("train.max_epochs")?,
            patience: cfg.get("train.patience")?,
            min_delta: cfg.get("train.min_delta")?,
        },
        threads: cfg.threads()?,
    })
}

fn split_for(cfg: &Config, data: &Dataset) -> Result<SplitPlan> {
    make_split(&data.ids, Some(&data.strata), cfg.get("split.seed")?)
}

fn select_config(cfg: &Config, data: &Dataset, split: &SplitPlan, sys: &SystemSpec, opts: &ExperimentOptions) -> Result<(HyperConfig, Vec<crate::train::RunRecord>)> {
    let grid = HyperGrid::capped(cfg.get("grid.cap")?);
    let r = grid_search(data, split, sys, &grid, cfg.get("grid.budget")?, cfg.get("grid.seed")?, opts)?;
    Ok((r.best, r.records))
}

/// Grid search plus the seeds × folds runs for every configured system.
pub fn cmd_train(cfg: &Config) -> Result<String> {
    let systems = systems(cfg)?;
    let data = load_dataset(cfg, &needed_sets(&systems), None)?;
    let split = split_for(cfg, &data)?;
    let opts = options(cfg)?;
    let dir = cfg.results_dir();
    mkdir(&dir.join("runs"))?;
    mkdir(&dir.join("systems"))?;
    let mut out = String::new();
    for sys in &systems {
        let (hyper, search) = select_config(cfg, &data, &split, sys, &opts)?;
        let result = run_experiment(&data, &split, sys, &hyper, &opts)?;
        let runs = dir.join("runs").join(format!("{}.jsonl", file_stem(&sys.name)));
        if runs.exists() {
            fs::remove_file(&runs).map_err(|e| Error::io(&runs, e))?;
        }
        append_records(&runs, &search)?;
        append_records(&runs, &result.records)?;
        let summary = SystemSummary::new(task_kind(cfg)?, &data, &result, sys.model_spec(&data, &hyper)?.parameter_count());
        summary.write(&dir.join("systems"))?;
        let _ = writeln!(
            out,
            "{}: F1 {:.4} ({:.4}) over {} seeds",
            sys.name,
            result.mean.f1,
            result.std.f1,
            result.per_seed.len()
        );
    }
    cfg.effective()?.write(&dir.join("train.config.toml"))?;
    Ok(out)
}

/// Results table with significance marks against the baseline system.
pub fn cmd_eval(cfg: &Config) -> Result<String> {
    let dir = cfg.results_dir();
    let summaries = SystemSummary::read_all(&dir.join("systems"))?;
    let baseline_name = cfg.raw("eval.baseline");
    let base = summaries
        .iter()
        .find(|s| s.system == baseline_name)
        .ok_or_else(|| Error::invalid(format!("no results for baseline system {baseline_name:?}; run train first")))?;
    let resamples: usize = cfg.get("eval.resamples")?;
    let seed: u64 = cfg.get("eval.seed")?;
    let n: usize = cfg.get("eval.hypotheses")?;
    let mut rows = Vec::new();
    let mut tests = Vec::new();
    let ordered = std::iter::once(base).chain(summaries.iter().filter(|s| s.system != baseline_name));
    for s in ordered {
        let sig = if s.system == baseline_name {
            String::new()
        } else {
            if s.truths != base.truths {
                return Err(Error::invalid(format!(
                    "{} and {} were not evaluated on the same runs and test examples",
                    s.system, base.system
                )));
            }
            let truth = s.truth_decisions();
            let r = bootstrap_compare(&s.prediction_decisions(), &base.prediction_decisions(), &truth, s.classes, resamples, seed)?;
            let r = bonferroni(r.p_value, ALPHA, n);
            tests.push(serde_json::json!({"system": s.system, "baseline": base.system, "result": r}));
            significance_mark(&r).to_string()
        };
        rows.push(TableRow {
            system: s.system.clone(),
            precision: s.mean.precision,
            recall: s.mean.recall,
            f1: s.mean.f1,
            std: s.std.f1,
            sig,
        });
    }
    write_table_csv(&dir.join(TABLE_FILE), &rows)?;
    let path = dir.join("significance.json");
    fs::write(&path, serde_json::to_string_pretty(&tests)? + "\n").map_err(|e| Error::io(&path, e))?;
    cfg.effective()?.write(&dir.join("eval.config.toml"))?;
    Ok(render_table(&rows))
}

fn render_table(rows: &[TableRow]) -> String {
    let mut s = String::from("| system | P | R | F1 (std) | sig |\n|---|---|---|---|---|\n");
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {:.4} | {:.4} | {:.4} ({:.4}) | {} |",
            r.system, r.precision, r.recall, r.f1, r.std, r.sig
        );
    }
    s
}

/// Data ablation curves, or the binary relation (complexity) ablation.
pub fn cmd_ablate(cfg: &Config) -> Result<String> {
    match cfg.raw("ablate.kind") {
        "data" => data_ablation(cfg),
        "complexity" => complexity_ablation(cfg),
        other => Err(Error::Config(format!("ablate.kind must be data or complexity, got {other:?}"))),
    }
}

fn data_ablation(cfg: &Config) -> Result<String> {
    let systems = systems(cfg)?;
    let data = load_dataset(cfg, &needed_sets(&systems), None)?;
    let split = split_for(cfg, &data)?;
    let opts = options(cfg)?;
    let dir = cfg.results_dir();
    let fractions: Vec<f64> = cfg.list("ablate.fractions")?;
    let mut with_config = Vec::new();
    for sys in &systems {
        // reuse the configuration selected by `train` when there is one
        let stored = dir.join("systems").join(format!("{}.json", file_stem(&sys.name)));
        let hyper = if stored.exists() {
            SystemSummary::read(&stored)?.config
        } else {
            select_config(cfg, &data, &split, sys, &opts)?.0
        };
        with_config.push((sys.clone(), hyper));
    }
    let (points, _) = run_ablation(&data, &split, &with_config, &fractions, &opts)?;
    mkdir(&dir)?;
    write_curve_csv(&dir.join(CURVE_FILE), &points)?;
    cfg.effective()?.write(&dir.join("ablate.config.toml"))?;
    let mut out = String::new();
    for p in &points {
        let _ = writeln!(out, "{} @ {:.2}: F1 {:.4} ({:.4})", p.system, p.fraction, p.mean_f1, p.std);
    }
    Ok(out)
}

fn complexity_ablation(cfg: &Config) -> Result<String> {
    let systems = systems(cfg)?;
    let corpus = load_corpus(cfg.corpus_dir())?;
    let top: Vec<_> = most_frequent_relations(&corpus.sentences).into_iter().take(2).map(|(r, _)| r).collect();
    if top.is_empty() {
        return Err(Error::invalid("corpus has no relation labels"));
    }
    let opts = options(cfg)?;
    let dir = cfg.results_dir();
    mkdir(&dir)?;
    let path = dir.join(COMPLEXITY_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let csv_err = |e: csv::Error| Error::Config(format!("{}: {e}", path.display()));
    w.write_record(["relation", "positives", "negatives", "system", "P", "R", "F1", "std"]).map_err(csv_err)?;
    let mut out = String::new();
    for relation in top {
        let task = binary_relation_task(&corpus.sentences, relation)?;
        let labels = task.labelled(&corpus.sentences);
        let data = load_dataset(cfg, &needed_sets(&systems), Some(&labels))?;
        let split = split_for(cfg, &data)?;
        let _ = writeln!(
            out,
            "{}: {} positive, {} none",
            relation.name(),
            task.positives.len(),
            task.negatives.len()
        );
        for sys in &systems {
            let (hyper, _) = select_config(cfg, &data, &split, sys, &opts)?;
            let r = run_experiment(&data, &split, sys, &hyper, &opts)?;
            w.write_record([
                relation.name().to_string(),
                task.positives.len().to_string(),
                task.negatives.len().to_string(),
                sys.name.clone(),
                format!("{:.4}", r.mean.precision),
                format!("{:.4}", r.mean.recall),
                format!("{:.4}", r.mean.f1),
                format!("{:.4}", r.std.f1),
            ])
            .map_err(csv_err)?;
            let _ = writeln!(out, "  {}: F1 {:.4} ({:.4})", sys.name, r.mean.f1, r.std.f1);
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    cfg.effective()?.write(&dir.join("ablate.config.toml"))?;
    Ok(out)
}

/// Markdown report from whatever result CSVs exist.
pub fn cmd_report(cfg: &Config) -> Result<String> {
    let dir = cfg.results_dir();
    let mut s = String::from("# Results\n\n");
    let mut found = false;
    for (file, title) in [
        (TABLE_FILE, "Macro scores (mean over seeds, population std)"),
        (CURVE_FILE, "Data ablation"),
        (COMPLEXITY_FILE, "Binary relation detection"),
    ] {
        let path = dir.join(file);
        if !path.exists() {
            continue;
        }
        found = true;
        let mut r = csv::Reader::from_path(&path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let header: Vec<String> = r
            .headers()
            .map_err(|e| Error::Config(e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        let _ = writeln!(s, "## {title}\n\n| {} |\n|{}", header.join(" | "), "---|".repeat(header.len()));
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Config(e.to_string()))?;
            let _ = writeln!(s, "| {} |", rec.iter().collect::<Vec<_>>().join(" | "));
        }
        s.push('\n');
    }
    if !found {
        return Err(Error::invalid(format!("no result CSVs in {}; run eval or ablate first", dir.display())));
    }
    s.push_str(
        "## Notes\n\n\
         - Significance: paired bootstrap over the pooled per-example test predictions of all seed and fold runs, \
         against the baseline; `*` p < 0.05, `+` also below the Bonferroni-corrected threshold.\n\
         - Contextual embeddings are fixed precomputed inputs; the text tower's dense layers adapt them.\n\
         - Hyper-parameters come from a budgeted random search over the grid, scored by mean validation accuracy over folds.\n",
    );
    let path = dir.join(REPORT_FILE);
    fs::write(&path, &s).map_err(|e| Error::io(&path, e))?;
    Ok(s)
}
