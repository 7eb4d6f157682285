use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use neurotext::commands::{self, Config};

/// Text + EEG/gaze late-fusion sequence classification.
#[derive(Parser, Debug)]
#[command(name = "neurotext", version)]
struct Cli {
    /// Config file with flat dotted keys (`train.max_epochs = 50`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set grid.budget=4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output root; also settable through NEUROTEXT_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic corpus.
    Gen(GenArgs),
    /// Extract word-level band and gaze features.
    Extract(ExtractArgs),
    /// Grid search and cross-validated training.
    Train(ModelArgs),
    /// Results table with bootstrap significance against the baseline.
    Eval(EvalArgs),
    /// Data or task-complexity ablation.
    Ablate(AblateArgs),
    /// Markdown report from the result CSVs.
    Report,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    subjects: Option<usize>,
    /// Band carrying the injected signal.
    #[arg(long)]
    band: Option<String>,
    /// Injection amplitude in multiples of the noise RMS.
    #[arg(long)]
    gain: Option<f64>,
}

#[derive(Args, Debug)]
struct ExtractArgs {
    /// `warn` (mask the subject) or `error`.
    #[arg(long)]
    missing_eeg: Option<String>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    #[arg(long)]
    task: Option<String>,
    /// Comma-separated systems: text, gaze, noise, eeg:<band>, eeg:all.
    #[arg(long)]
    modality: Option<String>,
    /// random, static or contextual.
    #[arg(long)]
    embedding: Option<String>,
    #[arg(long)]
    embedding_path: Option<PathBuf>,
    /// recurrent or convolutional.
    #[arg(long)]
    decoder: Option<String>,
    /// concat, add, subtract or max.
    #[arg(long)]
    fusion: Option<String>,
    /// Configurations sampled from the grid.
    #[arg(long)]
    budget: Option<usize>,
    /// Comma-separated run seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    max_epochs: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    baseline: Option<String>,
    #[arg(long)]
    resamples: Option<usize>,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Comma-separated training-set fractions.
    #[arg(long)]
    fractions: Option<String>,
    /// `data` or `complexity`.
    #[arg(long)]
    kind: Option<String>,
}

fn push<T: ToString>(out: &mut Vec<(String, String)>, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        out.push((key.to_string(), v.to_string()));
    }
}

impl ModelArgs {
    fn overrides(&self, out: &mut Vec<(String, String)>) {
        push(out, "task", &self.task);
        push(out, "model.modality", &self.modality);
        push(out, "embedding.kind", &self.embedding);
        push(out, "embedding.path", &self.embedding_path.as_ref().map(|p| p.display().to_string()));
        push(out, "model.decoder", &self.decoder);
        push(out, "model.fusion", &self.fusion);
        push(out, "grid.budget", &self.budget);
        push(out, "seeds", &self.seeds);
        push(out, "train.max_epochs", &self.max_epochs);
    }
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got {kv:?}"))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    push(&mut out, "threads", &cli.threads);
    push(&mut out, "paths.out", &cli.out.as_ref().map(|p| p.display().to_string()));
    match &cli.command {
        Command::Gen(a) => {
            push(&mut out, "gen.task", &a.task);
            push(&mut out, "gen.n", &a.n);
            push(&mut out, "gen.seed", &a.seed);
            push(&mut out, "gen.subjects", &a.subjects);
            push(&mut out, "gen.band", &a.band);
            push(&mut out, "gen.gain", &a.gain);
        }
        Command::Extract(a) => push(&mut out, "extract.missing_eeg", &a.missing_eeg),
        Command::Train(a) => a.overrides(&mut out),
        Command::Eval(a) => {
            push(&mut out, "eval.baseline", &a.baseline);
            push(&mut out, "eval.resamples", &a.resamples);
        }
        Command::Ablate(a) => {
            a.model.overrides(&mut out);
            push(&mut out, "ablate.fractions", &a.fractions);
            push(&mut out, "ablate.kind", &a.kind);
        }
        Command::Report => {}
    }
    Ok(out)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = Config::resolve(cli.config.as_deref(), &overrides(&cli)?)?;
    let summary = match cli.command {
        Command::Gen(_) => commands::cmd_gen(&cfg)?,
        Command::Extract(_) => commands::cmd_extract(&cfg)?,
        Command::Train(_) => commands::cmd_train(&cfg)?,
        Command::Eval(_) => commands::cmd_eval(&cfg)?,
        Command::Ablate(_) => commands::cmd_ablate(&cfg)?,
        Command::Report => commands::cmd_report(&cfg)?,
    };
    print!("{summary}");
    Ok(())
}
