use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Prf;
use crate::model::{Decision, Head};
use crate::train::{Dataset, HyperConfig, SystemResult, TaskKind};

/// File-name form of a system name.
pub fn file_stem(system: &str) -> String {
    system
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '+' || c == '-' { c } else { '_' })
        .collect()
}

pub fn decision_to_labels(d: &Decision) -> Vec<usize> {
    match d {
        Decision::Class(c) => vec![*c],
        Decision::Labels(set) => set.iter().copied().collect(),
    }
}

pub fn decision_from_labels(labels: &[usize], multi_label: bool) -> Decision {
    if multi_label {
        Decision::Labels(labels.iter().copied().collect())
    } else {
        Decision::Class(labels.first().copied().unwrap_or(0))
    }
}

/// What `train` stores per system for `eval` and `ablate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSummary {
    pub system: String,
    pub task: TaskKind,
    pub classes: usize,
    pub multi_label: bool,
    pub config: HyperConfig,
    pub parameters: usize,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<Prf>,
    pub mean: Prf,
    pub std: Prf,
    /// Pooled test predictions over all runs, seed-major then fold then test order.
    pub predictions: Vec<Vec<usize>>,
    pub truths: Vec<Vec<usize>>,
}

impl SystemSummary {
    pub fn new(task: TaskKind, data: &Dataset, r: &SystemResult, parameters: usize) -> Self {
        let mut seeds: Vec<u64> = r.records.iter().map(|x| x.seed).collect();
        seeds.dedup();
        SystemSummary {
            system: r.system.clone(),
            task,
            classes: data.head.outputs(),
            multi_label: matches!(data.head, Head::Sigmoid { .. }),
            config: r.config.clone(),
            parameters,
            seeds,
            per_seed: r.per_seed.clone(),
            mean: r.mean,
            std: r.std,
            predictions: r.predictions.iter().map(decision_to_labels).collect(),
            truths: r.truths.iter().map(decision_to_labels).collect(),
        }
    }

    pub fn prediction_decisions(&self) -> Vec<Decision> {
        self.predictions.iter().map(|l| decision_from_labels(l, self.multi_label)).collect()
    }

    pub fn truth_decisions(&self) -> Vec<Decision> {
        self.truths.iter().map(|l| decision_from_labels(l, self.multi_label)).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(format!("{}.json", file_stem(&self.system)));
        std::fs::write(&path, serde_json::to_string(self)? + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// All summaries in `dir`, sorted by system name.
    pub fn read_all(dir: &Path) -> Result<Vec<Self>> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        let mut out = paths.iter().map(|p| Self::read(p)).collect::<Result<Vec<_>>>()?;
        out.sort_by(|a, b| a.system.cmp(&b.system));
        Ok(out)
    }
}
