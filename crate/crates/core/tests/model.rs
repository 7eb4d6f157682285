//! Model construction, fusion and checkpoint contracts.

mod common;

use common::{tiny_data, tiny_hyper};
use ndarray::s;
use neurotext::model::{Decoder, Fusion, Modality};
use neurotext::nn::{load_checkpoint, save_checkpoint, HasParams};
use neurotext::signal::Band;
use neurotext::train::{build_network, FoldFeatures, SystemSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn parameter_count_matches_built_network() {
    let (data, _) = tiny_data(30, 1.0, 11);
    let hyper = tiny_hyper();
    let five = SystemSpec {
        name: "all".into(),
        second: Band::FREQUENCY.iter().map(|&b| Modality::Eeg(b)).collect(),
        decoder: Decoder::Convolutional,
        fusion: Fusion::Concat,
    };
    let mut data5 = data.clone();
    // reuse gamma features for the other bands; only the shapes matter here
    for b in [Band::Theta, Band::Alpha, Band::Beta] {
        let m = data.features[&Modality::Eeg(Band::Gamma)].clone();
        data5.features.insert(Modality::Eeg(b), m);
    }
    for (sys, d) in [
        (SystemSpec::text(), &data),
        (SystemSpec::with(Modality::Eeg(Band::Gamma), Decoder::Recurrent), &data),
        (SystemSpec::with(Modality::Noise, Decoder::Convolutional), &data),
        (five, &data5),
    ] {
        let spec = sys.model_spec(d, &hyper).unwrap();
        let net = build_network(&spec, d, 1).unwrap();
        let counted: usize = net.params().iter().map(|p| p.len()).sum();
        assert_eq!(spec.parameter_count(), counted, "{}", sys.name);
    }
}

#[test]
fn same_seed_same_init_and_shared_text_tower() {
    let (data, _) = tiny_data(30, 1.0, 12);
    let hyper = tiny_hyper();
    let text = SystemSpec::text().model_spec(&data, &hyper).unwrap();
    let eeg = SystemSpec::with(Modality::Eeg(Band::Gamma), Decoder::Convolutional)
        .model_spec(&data, &hyper)
        .unwrap();
    let a = build_network(&text, &data, 3).unwrap();
    let b = build_network(&text, &data, 3).unwrap();
    for (x, y) in a.params().iter().zip(b.params()) {
        assert_eq!(x.value, y.value);
    }
    let c = build_network(&eeg, &data, 3).unwrap();
    let text_params = a.params().len() - 2;
    for (x, y) in a.params().iter().zip(c.params()).take(text_params) {
        assert_eq!(x.name, y.name);
        assert_eq!(x.value, y.value);
    }
}

/// With the second tower's head rows zeroed, the two-tower concat model
/// computes the text-only model's logits and text-tower gradients.
#[test]
fn degenerate_second_tower_reduces_to_text_model() {
    let (data, split) = tiny_data(30, 1.0, 13);
    let mut hyper = tiny_hyper();
    hyper.dropout = 0.0;
    let text_spec = SystemSpec::text().model_spec(&data, &hyper).unwrap();
    let sys = SystemSpec::with(Modality::Eeg(Band::Gamma), Decoder::Convolutional);
    let two_spec = sys.model_spec(&data, &hyper).unwrap();
    let mut one = build_network(&text_spec, &data, 4).unwrap();
    let mut two = build_network(&two_spec, &data, 4).unwrap();
    let d = hyper.dense;
    {
        let w1 = one.head_mut().weight.value.clone();
        let b1 = one.head_mut().bias.value.clone();
        let head = two.head_mut();
        head.weight.value.fill(0.0);
        head.weight.value.slice_mut(s![..d, ..]).assign(&w1);
        head.bias.value = b1;
    }
    let rows = data.indices_of(&split.test_ids).unwrap();
    let f1 = FoldFeatures::prepare(&data, &[], &rows).unwrap();
    let f2 = FoldFeatures::prepare(&data, &sys.second, &rows).unwrap();
    let b1 = f1.batch(&data, &rows, (0, 0));
    let b2 = f2.batch(&data, &rows, (0, 0));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let l1 = one.loss_and_grad(&b1, true, &mut rng).unwrap();
    let l2 = two.loss_and_grad(&b2, true, &mut rng).unwrap();
    assert!((l1 - l2).abs() <= 1e-6 * l1.abs().max(1.0), "{l1} vs {l2}");
    let n_text = one.params().len() - 2;
    for (p, q) in one.params().iter().zip(two.params()).take(n_text) {
        let diff = (&p.grad - &q.grad).mapv(f32::abs).fold(0.0f32, |a, &b| a.max(b));
        let scale = p.grad.mapv(f32::abs).fold(0.0f32, |a, &b| a.max(b)).max(1e-6);
        assert!(diff <= 1e-5 * scale.max(1.0), "{}: {diff}", p.name);
    }
}

#[test]
fn missing_modality_is_an_error() {
    let (data, split) = tiny_data(30, 1.0, 14);
    let sys = SystemSpec::with(Modality::Eeg(Band::Gamma), Decoder::Recurrent);
    let spec = sys.model_spec(&data, &tiny_hyper()).unwrap();
    let mut net = build_network(&spec, &data, 1).unwrap();
    let rows = data.indices_of(&split.test_ids).unwrap();
    let batch = FoldFeatures::prepare(&data, &[], &rows).unwrap().batch(&data, &rows, (0, 0));
    assert!(net.predict(&batch).is_err());
    let mut no_gaze = data.clone();
    no_gaze.features.remove(&Modality::Gaze);
    assert!(SystemSpec::with(Modality::Gaze, Decoder::Recurrent)
        .model_spec(&no_gaze, &tiny_hyper())
        .is_err());
}

#[test]
fn checkpoint_round_trip() {
    let (data, _) = tiny_data(30, 1.0, 15);
    let spec = SystemSpec::with(Modality::Eeg(Band::Gamma), Decoder::Recurrent)
        .model_spec(&data, &tiny_hyper())
        .unwrap();
    let a = build_network(&spec, &data, 1).unwrap();
    let mut b = build_network(&spec, &data, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ntck");
    save_checkpoint(&path, &a.params()).unwrap();
    load_checkpoint(&path, &mut b.params_mut()).unwrap();
    for (x, y) in a.params().iter().zip(b.params()) {
        assert_eq!(x.value, y.value);
    }
    let other = SystemSpec::text().model_spec(&data, &tiny_hyper()).unwrap();
    let mut c = build_network(&other, &data, 1).unwrap();
    assert!(load_checkpoint(&path, &mut c.params_mut()).is_err());
}
