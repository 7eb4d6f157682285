//! Word-level EEG band features and gaze features.
//!
//! EEG channels are band-passed with an FFT brick-wall filter, turned into
//! amplitude envelopes through the analytic signal, and averaged over the
//! sample windows of each word's fixations. Windows containing raw samples
//! beyond ±90 µV are rejected before averaging.

mod bands;
mod export;
mod features;
mod gaze;
mod pipeline;
mod spectral;

pub use bands::{Band, BandSpec};
pub use export::{read_feature_csv, write_feature_csv};
pub use features::{
    average_subjects, extract_word_band_features, extract_word_features_multi, reject_artifact,
    Alignment, ExtractOptions, ExtractStats, FeatureSet, Pooling, WordFeatureMatrix,
    ARTIFACT_THRESHOLD_UV,
};
pub use gaze::{extract_gaze_features, gaze_measures, GazeMeasures, GAZE_DIM};
pub use pipeline::{extract_corpus, extract_synthetic, FeatureTable, MissingEeg, SubjectReading};
pub use spectral::{band_pass, hilbert_envelope, SpectralWorkspace, MIN_SIGNAL_LEN};
