use std::path::Path;
use std::process::{Command, Output};

fn neurotext(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neurotext"))
        .arg("--out")
        .arg(out)
        .args(args)
        .env_remove("NEUROTEXT_OUT")
        .output()
        .expect("spawn neurotext")
}

fn ok(out: &Path, args: &[&str]) -> String {
    let o = neurotext(out, args);
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(out, &["--threads", "1", "gen", "--n", "40", "--subjects", "2"]);
    ok(out, &["--threads", "1", "extract"]);
    let model = [
        "--modality", "text,eeg:gamma", "--decoder", "convolutional", "--budget", "1", "--seeds", "13",
        "--max-epochs", "5",
    ];
    ok(out, &[&["--threads", "1", "train"][..], &model].concat());
    let table = ok(out, &["--threads", "1", "eval", "--resamples", "200"]);
    assert!(table.contains("text+eeg:gamma"), "{table}");
    ok(out, &[&["--threads", "1", "ablate", "--fractions", "0.5,1.0"][..], &model].concat());
    ok(out, &["report"]);

    for f in ["corpus/sentences.jsonl", "corpus/gen.config.toml"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    for band in ["theta", "alpha", "beta", "gamma", "broadband", "gaze"] {
        assert!(out.join("features").join(format!("{band}.csv")).is_file(), "{band}");
    }
    for f in ["table.csv", "curve.csv", "report.md", "train.config.toml", "eval.config.toml"] {
        assert!(out.join("results").join(f).is_file(), "{f}");
    }
}

#[test]
fn written_config_reproduces_itself() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(out, &["gen", "--n", "30", "--subjects", "1", "--gain", "1.5"]);
    let first = std::fs::read_to_string(out.join("corpus/gen.config.toml")).unwrap();
    assert!(first.contains("1.5"), "{first}");

    // the written config pins absolute paths; drop them to redirect the rerun
    let strip = |s: &str| s.lines().filter(|l| !l.starts_with("paths.")).collect::<Vec<_>>().join("\n");
    let cfg = dir.path().join("again.toml");
    std::fs::write(&cfg, strip(&first)).unwrap();
    let out2 = dir.path().join("second");
    let o = Command::new(env!("CARGO_BIN_EXE_neurotext"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out2)
        .arg("gen")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let second = std::fs::read_to_string(out2.join("corpus/gen.config.toml")).unwrap();
    assert_eq!(strip(&first), strip(&second));
    assert_eq!(
        std::fs::read(out.join("corpus/sentences.jsonl")).unwrap(),
        std::fs::read(out2.join("corpus/sentences.jsonl")).unwrap()
    );
}

#[test]
fn unknown_keys_and_bad_values_fail() {
    let dir = tempfile::tempdir().unwrap();
    let o = neurotext(dir.path(), &["--set", "train.epochs=5", "gen"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.epochs"));

    let o = neurotext(dir.path(), &["--set", "noequals", "gen"]);
    assert!(!o.status.success());

    let o = neurotext(dir.path(), &["train"]);
    assert!(!o.status.success(), "training without a corpus must fail");
}
