//! Acceptance suite: one pass/fail line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines are always shown.
//! Exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;
use std::time::{Duration, Instant};

use common::grad::{conv_case, dense_case, inception_case, loss_cases, lstm_case, model_case, pool_case, worst, TOL};
use neurotext::commands::{cmd_ablate, cmd_eval, cmd_extract, cmd_gen, cmd_train, Config};
use neurotext::corpus::{load_corpus, make_split, Relation, SynthConfig, SynthTask, SyntheticCorpus};
use neurotext::eval::{
    bonferroni, bootstrap_compare, macro_prf, significance_mark, BONFERRONI_N, ALPHA,
};
use neurotext::model::{Decision, Decoder, Fusion, Head, Modality};
use neurotext::nn::{Activation, PoolMode};
use neurotext::signal::{band_pass, extract_synthetic, hilbert_envelope, Band, ExtractOptions};
use neurotext::train::{
    run_ablation, run_experiment, Dataset, ExperimentOptions, HyperConfig, SystemResult, SystemSpec, TaskKind,
    TrainConfig, SEEDS,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: u64, what: &str) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s as f64, || {
        format!("{what} took {:.1}s, limit {limit_s}s", elapsed.as_secs_f64())
    })
}

fn c1_gradients() -> Outcome {
    let start = Instant::now();
    let mut w: f64 = 0.0;
    for act in [Activation::Relu, Activation::None, Activation::Elu, Activation::Sigmoid, Activation::Softmax] {
        w = w.max(worst(&format!("dense {act:?}"), TOL, |s| dense_case(act, s))?);
    }
    for k in [1, 4, 7] {
        w = w.max(worst(&format!("conv1d k={k}"), TOL, |s| conv_case(k, s))?);
    }
    for mode in [PoolMode::NonOverlapping, PoolMode::Same] {
        w = w.max(worst(&format!("maxpool {mode:?}"), TOL, |s| pool_case(mode, s))?);
    }
    w = w.max(worst("inception", TOL, inception_case)?);
    w = w.max(worst("bilstm 1 layer", TOL, |s| lstm_case(1, s))?);
    w = w.max(worst("bilstm 2 layers", TOL, |s| lstm_case(2, s))?);
    for r in loss_cases() {
        ensure(r.passed(TOL), || format!("loss: {r:?}"))?;
        w = w.max(r.max_rel_error);
    }
    w = w.max(worst("model recurrent", TOL, |s| {
        model_case(Decoder::Recurrent, Fusion::Concat, Head::Softmax { classes: 3 }, s)
    })?);
    w = w.max(worst("model convolutional", TOL, |s| {
        model_case(Decoder::Convolutional, Fusion::Concat, Head::Softmax { classes: 2 }, s)
    })?);
    within(start.elapsed(), 60, "gradient checks")?;
    Ok(format!("max relative error {w:.2e} < {TOL:.0e} in {:.1}s", start.elapsed().as_secs_f64()))
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn c2_dsp() -> Outcome {
    let start = Instant::now();
    let fs = 500.0;
    let n = 1000;
    let tone = |f: f64, a: f64| -> Vec<f64> { (0..n).map(|i| a * (2.0 * PI * f * i as f64 / fs).sin()).collect() };
    let home = [(6.0, Band::Theta), (10.0, Band::Alpha), (20.0, Band::Beta), (40.0, Band::Gamma)];
    let (mut min_pass, mut max_leak): (f64, f64) = (f64::INFINITY, 0.0);
    for (f, own) in home {
        let x = tone(f, 1.0);
        let r0 = rms(&x);
        for band in Band::ALL {
            let ratio = rms(&band_pass(&x, &band.spec(), fs).map_err(|e| e.to_string())?) / r0;
            if band == own || band == Band::Broadband {
                min_pass = min_pass.min(ratio);
                ensure(ratio >= 0.99, || format!("{f} Hz through {}: {ratio:.4}", band.name()))?;
            } else {
                max_leak = max_leak.max(ratio);
                ensure(ratio <= 0.01, || format!("{f} Hz leaks into {}: {ratio:.4}", band.name()))?;
            }
        }
    }
    let a = 3.0;
    let env = hilbert_envelope(&tone(10.0, a)).map_err(|e| e.to_string())?;
    let cut = n / 20;
    let env_err = env[cut..n - cut].iter().map(|e| (e - a).abs() / a).fold(0.0, f64::max);
    ensure(env_err <= 0.01, || format!("envelope error {env_err:.4}"))?;
    within(start.elapsed(), 10, "DSP checks")?;
    Ok(format!(
        "own band >= {min_pass:.4}, other bands <= {max_leak:.2e}, envelope error {env_err:.2e}"
    ))
}

/// Brute-force macro P/R/F1: counts per class from scratch.
fn brute_macro(pred: &[Vec<usize>], truth: &[Vec<usize>], classes: usize) -> [f64; 3] {
    let mut acc = [0.0; 3];
    for c in 0..classes {
        let (mut tp, mut fp, mut fnn) = (0.0, 0.0, 0.0);
        for i in 0..pred.len() {
            let p = pred[i].contains(&c);
            let t = truth[i].contains(&c);
            if p && t {
                tp += 1.0;
            }
            if p && !t {
                fp += 1.0;
            }
            if !p && t {
                fnn += 1.0;
            }
        }
        let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let rec = if tp + fnn > 0.0 { tp / (tp + fnn) } else { 0.0 };
        let f1 = if prec + rec > 0.0 { 2.0 * prec * rec / (prec + rec) } else { 0.0 };
        acc[0] += prec;
        acc[1] += rec;
        acc[2] += f1;
    }
    acc.map(|v| v / classes as f64)
}

fn c3_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut max_diff: f64 = 0.0;
    for multi in [false, true] {
        for _ in 0..1000 {
            let n = rng.gen_range(1..60);
            let classes = rng.gen_range(2..12);
            let draw = |rng: &mut ChaCha8Rng| -> Vec<usize> {
                if multi {
                    (0..classes).filter(|_| rng.gen_bool(0.3)).collect()
                } else {
                    vec![rng.gen_range(0..classes)]
                }
            };
            let pred: Vec<Vec<usize>> = (0..n).map(|_| draw(&mut rng)).collect();
            let truth: Vec<Vec<usize>> = (0..n).map(|_| draw(&mut rng)).collect();
            let to_dec = |v: &Vec<usize>| {
                if multi {
                    Decision::Labels(v.iter().copied().collect())
                } else {
                    Decision::Class(v[0])
                }
            };
            let p: Vec<Decision> = pred.iter().map(to_dec).collect();
            let t: Vec<Decision> = truth.iter().map(to_dec).collect();
            let m = macro_prf(&p, &t, classes).map_err(|e| e.to_string())?.macro_avg;
            let b = brute_macro(&pred, &truth, classes);
            for (x, y) in [m.precision, m.recall, m.f1].iter().zip(b) {
                max_diff = max_diff.max((x - y).abs());
            }
        }
    }
    ensure(max_diff < 1e-12, || format!("max difference {max_diff:e}"))?;
    let truth: Vec<Decision> = (0..100).map(|i| Decision::Class(i % 2)).collect();
    let zeros = vec![Decision::Class(0); 100];
    let f1 = macro_prf(&zeros, &truth, 2).map_err(|e| e.to_string())?.macro_avg.f1;
    ensure(f1 == 1.0 / 3.0, || format!("all-zero predictor macro F1 {f1}"))?;
    Ok(format!("2000 instances, max difference {max_diff:.1e}; constant predictor F1 = 1/3"))
}

fn c4_significance() -> Outcome {
    let start = Instant::now();
    let threshold = ALPHA / BONFERRONI_N as f64;
    ensure((threshold - 0.002778).abs() < 5e-7, || format!("threshold {threshold}"))?;
    let marks = [(0.04, "*"), (0.0027, "+"), (0.003, "*"), (0.05, ""), (0.2, "")]
        .map(|(p, want)| (significance_mark(&bonferroni(p, ALPHA, BONFERRONI_N)), want));
    ensure(marks.iter().all(|(got, want)| got == want), || format!("marks {marks:?}"))?;

    let (pairs, n, resamples) = (200, 200, 2000);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut hits = 0;
    for k in 0..pairs {
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let noisy = |rng: &mut ChaCha8Rng| -> Vec<Decision> {
            truth
                .iter()
                .map(|&t| Decision::Class(if rng.gen_bool(0.7) { t } else { 1 - t }))
                .collect()
        };
        let a = noisy(&mut rng);
        let b = noisy(&mut rng);
        let t: Vec<Decision> = truth.iter().map(|&c| Decision::Class(c)).collect();
        let r = bootstrap_compare(&a, &b, &t, 2, resamples, k).map_err(|e| e.to_string())?;
        if r.p_value < 0.05 {
            hits += 1;
        }
    }
    let rate = hits as f64 / pairs as f64;
    ensure((0.01..=0.10).contains(&rate), || format!("null false-positive rate {rate}"))?;
    within(start.elapsed(), 300, "significance checks")?;
    Ok(format!(
        "threshold {threshold:.6}, marks ok, null false-positive rate {rate:.3} ({pairs} pairs, {:.1}s)",
        start.elapsed().as_secs_f64()
    ))
}

/// Everything criteria 5-7 share.
struct Experiments {
    text: SystemResult,
    eeg: SystemResult,
    noise: SystemResult,
    text_g0: SystemResult,
    eeg_g0: SystemResult,
    elapsed: Duration,
    data: Dataset,
    split: neurotext::corpus::SplitPlan,
    opts: ExperimentOptions,
}

fn corpus(gain: f64) -> SyntheticCorpus {
    let cfg = SynthConfig {
        task: SynthTask::BinarySentiment,
        n_sentences: 260,
        n_subjects: 6,
        band: Band::Gamma,
        gain,
        ..SynthConfig::default()
    };
    SyntheticCorpus::new(cfg, 42).expect("synthetic corpus")
}

fn dataset(c: &SyntheticCorpus, bands: &[Band], threads: usize) -> neurotext::Result<Dataset> {
    let table = extract_synthetic(c, bands, &ExtractOptions::default(), threads)?;
    let mut data = Dataset::from_sentences(&c.plain_sentences(), TaskKind::BinarySentiment, 32)?;
    data.add_feature_table(&table)?;
    Ok(data)
}

fn run_constructed(threads: usize) -> neurotext::Result<Experiments> {
    let start = Instant::now();
    let hyper = HyperConfig::default();
    let opts = ExperimentOptions {
        seeds: SEEDS.to_vec(),
        train: TrainConfig::desk(),
        threads,
    };
    let eeg_sys = SystemSpec::with(Modality::Eeg(Band::Gamma), Decoder::Convolutional);
    let noise_sys = SystemSpec::with(Modality::Noise, Decoder::Convolutional);

    let g2 = corpus(2.0);
    let data = dataset(&g2, &[Band::Gamma, Band::Broadband], threads)?;
    let split = make_split(&data.ids, Some(&data.strata), 42)?;
    let text = run_experiment(&data, &split, &SystemSpec::text(), &hyper, &opts)?;
    let eeg = run_experiment(&data, &split, &eeg_sys, &hyper, &opts)?;
    let noise = run_experiment(&data, &split, &noise_sys, &hyper, &opts)?;

    let g0 = corpus(0.0);
    let data0 = dataset(&g0, &[Band::Gamma], threads)?;
    let split0 = make_split(&data0.ids, Some(&data0.strata), 42)?;
    // the text-only model never sees EEG: identical sentences and split mean an identical run
    let text_g0 = if g0.plain_sentences() == g2.plain_sentences() && split0 == split {
        text.clone()
    } else {
        run_experiment(&data0, &split0, &SystemSpec::text(), &hyper, &opts)?
    };
    let eeg_g0 = run_experiment(&data0, &split0, &eeg_sys, &hyper, &opts)?;
    Ok(Experiments {
        text,
        eeg,
        noise,
        text_g0,
        eeg_g0,
        elapsed: start.elapsed(),
        data,
        split,
        opts,
    })
}

fn c5_end_to_end(x: &Experiments) -> Outcome {
    let d_eeg = x.eeg.mean.f1 - x.text.mean.f1;
    let d_noise = x.noise.mean.f1 - x.text.mean.f1;
    let d_g0 = x.eeg_g0.mean.f1 - x.text_g0.mean.f1;
    let detail = format!(
        "text {:.4}, +eeg:gamma {:.4} (delta {d_eeg:+.4}), +noise {:.4} (delta {d_noise:+.4}), g=0 delta {d_g0:+.4}, {:.0}s",
        x.text.mean.f1,
        x.eeg.mean.f1,
        x.noise.mean.f1,
        x.elapsed.as_secs_f64()
    );
    ensure(d_eeg >= 0.05, || format!("EEG gain too small: {detail}"))?;
    ensure(d_noise < 0.02, || format!("noise gain too large: {detail}"))?;
    ensure((-0.03..=0.03).contains(&d_g0), || format!("g=0 delta out of range: {detail}"))?;
    within(x.elapsed, 600, &detail)?;
    Ok(detail)
}

fn c6_band_selectivity(x: &Experiments) -> Outcome {
    let broad = SystemSpec::with(Modality::Eeg(Band::Broadband), Decoder::Convolutional);
    let r = run_experiment(&x.data, &x.split, &broad, &HyperConfig::default(), &x.opts).map_err(|e| e.to_string())?;
    let detail = format!("gamma {:.4} vs broadband {:.4}", x.eeg.mean.f1, r.mean.f1);
    ensure(x.eeg.mean.f1 >= r.mean.f1 - 0.01, || detail.clone())?;
    Ok(detail)
}

fn c7_ablation(x: &Experiments) -> Outcome {
    let systems = [(SystemSpec::text(), HyperConfig::default())];
    let (points, results) =
        run_ablation(&x.data, &x.split, &systems, &[0.25, 1.0], &x.opts).map_err(|e| e.to_string())?;
    let full = &results[1];
    let same = full.predictions == x.text.predictions
        && full.per_seed.iter().zip(&x.text.per_seed).all(|(a, b)| {
            a.precision.to_bits() == b.precision.to_bits()
                && a.recall.to_bits() == b.recall.to_bits()
                && a.f1.to_bits() == b.f1.to_bits()
        })
        && full.records.iter().zip(&x.text.records).all(|(a, b)| a.test_counts == b.test_counts && a.epochs == b.epochs);
    ensure(same, || "fraction 1.0 differs from the full run".into())?;
    let detail = format!("F1 {:.4} at 0.25, {:.4} at 1.0; fraction 1.0 bit-identical", points[0].mean_f1, points[1].mean_f1);
    ensure(points[1].mean_f1 >= points[0].mean_f1, || detail.clone())?;
    Ok(detail)
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).into_iter().flatten().flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else if p.extension().is_some_and(|x| x == "csv") {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn full_pipeline(out: &Path, threads: usize) -> neurotext::Result<BTreeMap<String, Vec<u8>>> {
    let set = |k: &str, v: &str| (k.to_string(), v.to_string());
    let overrides = vec![
        set("paths.out", &out.to_string_lossy()),
        set("threads", &threads.to_string()),
        set("gen.n", "60"),
        set("gen.subjects", "2"),
        set("model.modality", "text,eeg:gamma,noise"),
        set("model.decoder", "convolutional"),
        set("grid.budget", "2"),
        set("seeds", "13,22"),
        set("train.max_epochs", "12"),
        set("train.patience", "5"),
        set("eval.resamples", "500"),
        set("ablate.fractions", "0.5,1.0"),
    ];
    let cfg = Config::resolve(None, &overrides)?;
    cmd_gen(&cfg)?;
    cmd_extract(&cfg)?;
    cmd_train(&cfg)?;
    cmd_eval(&cfg)?;
    cmd_ablate(&cfg)?;
    Ok(csv_files(out))
}

fn c8_determinism() -> Outcome {
    let n = std::thread::available_parallelism().map_or(2, |n| n.get()).max(2);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runs = [("a1", 1), ("b1", 1), ("an", n), ("bn", n)]
        .iter()
        .map(|(name, t)| full_pipeline(&tmp.path().join(name), *t).map_err(|e| e.to_string()))
        .collect::<Result<Vec<_>, _>>()?;
    ensure(runs[0].len() >= 8, || format!("only {} CSVs written", runs[0].len()))?;
    for (i, r) in runs.iter().enumerate().skip(1) {
        for (name, bytes) in &runs[0] {
            ensure(r.get(name) == Some(bytes), || format!("run {i}: {name} differs"))?;
        }
        ensure(r.len() == runs[0].len(), || format!("run {i}: different file set"))?;
    }
    Ok(format!("{} CSVs byte-identical over 2 runs each at --threads 1 and --threads {n}", runs[0].len()))
}

fn c9_complexity() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let set = |k: &str, v: &str| (k.to_string(), v.to_string());
    let cfg = Config::resolve(
        None,
        &[
            set("paths.out", &tmp.path().to_string_lossy()),
            set("gen.task", "relation-detection"),
            set("gen.n", "200"),
            set("gen.subjects", "2"),
            set("task", "relation-detection"),
            set("ablate.kind", "complexity"),
            set("model.modality", "text,eeg:gamma"),
            set("model.decoder", "convolutional"),
            set("grid.budget", "1"),
            set("seeds", "13,22"),
            set("train.max_epochs", "30"),
            set("train.patience", "10"),
        ],
    )
    .map_err(|e| e.to_string())?;
    let run = || -> neurotext::Result<String> {
        cmd_gen(&cfg)?;
        cmd_extract(&cfg)?;
        cmd_ablate(&cfg)
    };
    run().map_err(|e| e.to_string())?;
    // independent recount from the corpus on disk
    let corpus = load_corpus(cfg.corpus_dir()).map_err(|e| e.to_string())?;
    let mut freq: BTreeMap<Relation, usize> = BTreeMap::new();
    for s in &corpus.sentences {
        for r in s.labels.relations.iter().flatten() {
            *freq.entry(*r).or_default() += 1;
        }
    }
    let mut ranked: Vec<(Relation, usize)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let none = corpus
        .sentences
        .iter()
        .filter(|s| s.labels.relations.as_ref().is_some_and(|r| r.is_empty()))
        .count();
    let path = cfg.results_dir().join("complexity.csv");
    let mut reader = csv::Reader::from_path(&path).map_err(|e| e.to_string())?;
    let rows: Vec<csv::StringRecord> = reader.records().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    ensure(rows.len() == 4, || format!("expected 4 rows, got {}", rows.len()))?;
    let mut detail = Vec::new();
    for (k, (rel, count)) in ranked.iter().take(2).enumerate() {
        for row in &rows[2 * k..2 * k + 2] {
            let want = [rel.name().to_string(), count.to_string(), none.to_string()];
            ensure(row.iter().take(3).eq(want.iter().map(String::as_str)), || {
                format!("row {row:?}, expected {want:?}")
            })?;
            let f1: f64 = row[6].parse().map_err(|_| format!("bad F1 in {row:?}"))?;
            ensure((0.0..=1.0).contains(&f1), || format!("F1 out of range in {row:?}"))?;
        }
        detail.push(format!("{} {count}/{none}", rel.name()));
    }
    Ok(format!("positive/none counts exact: {}", detail.join(", ")))
}

fn main() {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |n: usize, o: Outcome| {
        match &o {
            Ok(d) => println!("criterion {n}: PASS  {d}"),
            Err(d) => println!("criterion {n}: FAIL  {d}"),
        }
        results.push((n, o));
    };
    report(1, c1_gradients());
    report(2, c2_dsp());
    report(3, c3_metrics());
    report(4, c4_significance());
    match run_constructed(threads) {
        Ok(x) => {
            report(5, c5_end_to_end(&x));
            report(6, c6_band_selectivity(&x));
            report(7, c7_ablation(&x));
        }
        Err(e) => {
            for n in 5..=7 {
                report(n, Err(format!("experiment failed: {e}")));
            }
        }
    }
    report(8, c8_determinism());
    report(9, c9_complexity());
    let failed: Vec<usize> = results.iter().filter(|(_, o)| o.is_err()).map(|(n, _)| *n).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
