use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};

/// Environment variable overriding `paths.out`.
pub const OUT_ENV: &str = "NEUROTEXT_OUT";

const DEFAULTS: &[(&str, &str)] = &[
    ("ablate.fractions", "0.25,0.5,0.75,1.0"),
    ("ablate.kind", "data"),
    ("embedding.dim", "32"),
    ("embedding.kind", "random"),
    ("embedding.path", ""),
    ("eval.baseline", "text"),
    ("eval.hypotheses", "18"),
    ("eval.resamples", "10000"),
    ("eval.seed", "42"),
    ("extract.alignment", "total-reading-time"),
    ("extract.missing_eeg", "warn"),
    ("extract.pooling", "union-of-samples"),
    ("gen.band", "gamma"),
    ("gen.gain", "2"),
    ("gen.n", "260"),
    ("gen.noise_rms", "10"),
    ("gen.seed", "42"),
    ("gen.subjects", "6"),
    ("gen.task", "binary-sentiment"),
    ("gen.vocab", "200"),
    ("grid.budget", "8"),
    ("grid.cap", "128"),
    ("grid.seed", "42"),
    ("model.decoder", "recurrent"),
    ("model.fusion", "concat"),
    ("model.modality", "text"),
    ("paths.corpus", ""),
    ("paths.features", ""),
    ("paths.out", "out"),
    ("paths.results", ""),
    ("seeds", "13,22,42,66,78"),
    ("split.seed", "42"),
    ("task", "binary-sentiment"),
    ("threads", "0"),
    ("train.max_epochs", "200"),
    ("train.min_delta", "1e-7"),
    ("train.patience", "80"),
];

/// Flat dotted-key configuration. Every key has a default; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            values: DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, String)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            toml::Value::String(s) => out.push((key, s.clone())),
            toml::Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|i| match i {
                        toml::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                out.push((key, parts.join(",")));
            }
            other => out.push((key, other.to_string())),
        }
    }
}

impl Config {
    /// Defaults, then the file, then the output-directory variable, then `overrides`.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut c = Config::default();
        if let Some(path) = file {
            c.merge_file(path)?;
        }
        if let Ok(dir) = std::env::var(OUT_ENV) {
            if !dir.is_empty() {
                c.set("paths.out", &dir)?;
            }
        }
        for (k, v) in overrides {
            c.set(k, v)?;
        }
        Ok(c)
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.merge_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn merge_str(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut pairs = Vec::new();
        flatten("", &table, &mut pairs);
        for (k, v) in pairs {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown config key {key:?}"))),
        }
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map_or("", String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| Error::Config(format!("{key} = {raw:?}: {e}")))
    }

    /// Comma-separated list; empty value gives an empty list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| Error::Config(format!("{key}: {s:?}: {e}"))))
            .collect()
    }

    /// Parses a kebab/lowercase serde enum value.
    pub fn enum_value<T: serde::de::DeserializeOwned>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key);
        serde_json::from_value(serde_json::Value::String(raw.to_string()))
            .map_err(|e| Error::Config(format!("{key} = {raw:?}: {e}")))
    }

    fn dir(&self, key: &str, sub: &str) -> PathBuf {
        match self.raw(key) {
            "" => PathBuf::from(self.raw("paths.out")).join(sub),
            p => PathBuf::from(p),
        }
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.dir("paths.corpus", "corpus")
    }

    pub fn features_dir(&self) -> PathBuf {
        self.dir("paths.features", "features")
    }

    pub fn results_dir(&self) -> PathBuf {
        self.dir("paths.results", "results")
    }

    /// Worker count, with 0 meaning all available cores.
    pub fn threads(&self) -> Result<usize> {
        let n: usize = self.get("threads")?;
        Ok(if n == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            n
        })
    }

    /// Copy with empty paths and the thread count filled in.
    pub fn effective(&self) -> Result<Config> {
        let mut c = self.clone();
        c.set("paths.corpus", &self.corpus_dir().to_string_lossy())?;
        c.set("paths.features", &self.features_dir().to_string_lossy())?;
        c.set("paths.results", &self.results_dir().to_string_lossy())?;
        c.set("threads", &self.threads()?.to_string())?;
        Ok(c)
    }

    /// One `key = "value"` line per key, sorted; readable by [`Config::merge_str`].
    pub fn to_toml(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(s, "{k} = {}", toml::Value::String(v.clone()));
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }
}
