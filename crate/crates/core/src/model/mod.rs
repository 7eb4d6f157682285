//! Late-fusion classifiers: one text tower plus optional second-modality
//! towers, a fusion step over their final hidden vectors and a dense head.

mod batch;
mod network;
mod spec;

pub use batch::{make_noise_features, Batch, Targets, TextInput, NOISE_DIM};
pub use network::{decide, Decision, Network};
pub use spec::{Decoder, Fusion, Head, Modality, ModelSpec, TowerSpec};
