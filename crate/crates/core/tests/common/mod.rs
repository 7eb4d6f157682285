#![allow(dead_code)]

pub mod grad;

use neurotext::corpus::{make_split, SplitPlan, SynthConfig, SynthTask, SyntheticCorpus};
use neurotext::signal::{extract_synthetic, Band, ExtractOptions};
use neurotext::train::{Dataset, HyperConfig, TaskKind};

/// Small gamma-injected binary corpus with 8 channels.
pub fn tiny_corpus(n: usize, gain: f64, seed: u64) -> SyntheticCorpus {
    let cfg = SynthConfig {
        task: SynthTask::BinarySentiment,
        n_sentences: n,
        vocab_size: 60,
        cue_words_per_class: 8,
        n_subjects: 2,
        channels: 8,
        gain,
        ..SynthConfig::default()
    };
    SyntheticCorpus::new(cfg, seed).unwrap()
}

pub fn tiny_data(n: usize, gain: f64, seed: u64) -> (Dataset, SplitPlan) {
    let corpus = tiny_corpus(n, gain, seed);
    let table = extract_synthetic(&corpus, &[Band::Gamma, Band::Broadband], &ExtractOptions::default(), 1).unwrap();
    let mut data = Dataset::from_sentences(&corpus.plain_sentences(), TaskKind::BinarySentiment, 8).unwrap();
    data.add_feature_table(&table).unwrap();
    let split = make_split(&data.ids, Some(&data.strata), 7).unwrap();
    (data, split)
}

pub fn tiny_hyper() -> HyperConfig {
    HyperConfig {
        lstm_dim: 8,
        lstm_layers: 1,
        cnn_filters: 4,
        kernels: vec![1, 4, 7],
        pool: 3,
        dense: 8,
        dropout: 0.1,
        batch_size: 20,
        lr: 1e-2,
        threshold: 0.5,
    }
}
