use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixations shorter than this are dropped at load time.
pub const MIN_FIXATION_MS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sentiment {
    Negative,
    Neutral,
    Positive,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive];

    /// Class index for a task with `classes` sentiment classes (2 or 3).
    pub fn class_index(self, classes: usize) -> Option<usize> {
        match (classes, self) {
            (2, Sentiment::Negative) => Some(0),
            (2, Sentiment::Positive) => Some(1),
            (2, Sentiment::Neutral) => None,
            (_, s) => Some(s as usize),
        }
    }
}

/// The eleven relation types of the relation detection task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Relation {
    Award,
    BirthPlace,
    DeathPlace,
    Education,
    Employer,
    Founder,
    JobTitle,
    Nationality,
    PoliticalAffiliation,
    Visited,
    Wife,
}

impl Relation {
    pub const ALL: [Relation; 11] = [
        Relation::Award,
        Relation::BirthPlace,
        Relation::DeathPlace,
        Relation::Education,
        Relation::Employer,
        Relation::Founder,
        Relation::JobTitle,
        Relation::Nationality,
        Relation::PoliticalAffiliation,
        Relation::Visited,
        Relation::Wife,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Relation::Award => "Award",
            Relation::BirthPlace => "BirthPlace",
            Relation::DeathPlace => "DeathPlace",
            Relation::Education => "Education",
            Relation::Employer => "Employer",
            Relation::Founder => "Founder",
            Relation::JobTitle => "JobTitle",
            Relation::Nationality => "Nationality",
            Relation::PoliticalAffiliation => "PoliticalAffiliation",
            Relation::Visited => "Visited",
            Relation::Wife => "Wife",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Relation::ALL
            .iter()
            .copied()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown relation type {s:?}")))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskLabels {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentiment: Option<Sentiment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relations: Option<BTreeSet<Relation>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub id: String,
    pub tokens: Vec<String>,
    pub labels: TaskLabels,
}

impl Sentence {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::invalid("sentence id is empty"));
        }
        if self.tokens.is_empty() {
            return Err(Error::invalid(format!("sentence {} has no tokens", self.id)));
        }
        if let Some(i) = self.tokens.iter().position(|t| t.trim().is_empty()) {
            return Err(Error::invalid(format!(
                "sentence {} has an empty token at position {i}",
                self.id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixationEvent {
    pub sentence_id: String,
    pub subject_id: String,
    pub word_index: usize,
    pub onset_ms: f64,
    pub duration_ms: f64,
}

impl FixationEvent {
    pub fn end_ms(&self) -> f64 {
        self.onset_ms + self.duration_ms
    }
}

/// Continuous multi-channel EEG for one sentence read by one subject.
///
/// `samples` is channels × time, in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecording {
    pub sentence_id: String,
    pub subject_id: String,
    pub sample_rate_hz: u32,
    pub samples: Array2<f32>,
}

impl EegRecording {
    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_ms(&self) -> f64 {
        self.len() as f64 * 1000.0 / f64::from(self.sample_rate_hz)
    }
}
