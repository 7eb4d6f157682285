//! Corpus data model, on-disk formats, embeddings, splitting and the seeded
//! synthetic corpus generator.

mod embeddings;
mod io;
pub(crate) mod split;
mod synth;
mod types;

pub use embeddings::{init_random_embeddings, load_embeddings, EmbeddingKind, EmbeddingTable, RANDOM_INIT_RANGE};
pub use io::{
    eeg_file_name, load_corpus, read_eeg, write_corpus_files, write_eeg, Corpus, LoadReport, Manifest,
    EEG_DIR, FIXATIONS_FILE, MANIFEST_FILE, SENTENCES_FILE,
};
pub use split::{make_split, stratum_of, SplitPlan, FOLDS, TEST_FRACTION};
pub use synth::{generate_synthetic, CueClass, SynthConfig, SynthTask, SyntheticCorpus, SyntheticSentence};
pub use types::{
    EegRecording, FixationEvent, Relation, Sentence, Sentiment, TaskLabels, MIN_FIXATION_MS,
};

/// Derives an independent 64-bit seed from a base seed and a label.
///
/// FNV-1a over the label bytes, mixed with the base seed through splitmix64.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(base ^ splitmix64(h))
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
