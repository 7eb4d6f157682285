#![allow(dead_code)]
//! Gradient-check cases shared by the gradient tests and the acceptance suite.

use ndarray::{Array, Array2, Array3, Dimension, ShapeBuilder};
use neurotext::model::{Batch, Decoder, Fusion, Head, Modality, ModelSpec, Network, Targets, TextInput, TowerSpec};
use neurotext::nn::{
    flatten_grads, flatten_values, set_values, sigmoid_bce, softmax_cross_entropy, Activation, BiLstm, Conv1d,
    Dense, GradCheck, GradReport, HasParams, Inception, MaxPool1d, PoolMode,
};
use neurotext::signal::Band;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const TOL: f64 = 1e-4;

pub fn normal<D: Dimension, Sh: ShapeBuilder<Dim = D>>(shape: Sh, rng: &mut ChaCha8Rng) -> Array<f64, D> {
    Array::from_shape_simple_fn(shape, || rng.sample::<f64, _>(StandardNormal))
}

pub fn weighted_sum<D: Dimension>(y: &Array<f64, D>, r: &Array<f64, D>) -> f64 {
    y.iter().zip(r.iter()).map(|(a, b)| a * b).sum()
}

/// Runs `attempt(seed)` until an instance avoids every kink and returns its reports.
pub fn resample(mut attempt: impl FnMut(u64) -> Vec<GradReport>) -> Option<Vec<GradReport>> {
    (0..20).map(&mut attempt).find(|r| r.iter().all(|x| x.kink_hits == 0))
}

/// Worst relative error of a resampled case, or an error message.
pub fn worst(what: &str, tol: f64, attempt: impl FnMut(u64) -> Vec<GradReport>) -> Result<f64, String> {
    let reports = resample(attempt).ok_or_else(|| format!("{what}: every sampled instance hit a kink"))?;
    let mut w: f64 = 0.0;
    for r in &reports {
        if !r.passed(tol) || r.coords_checked == 0 {
            return Err(format!("{what}: {r:?}"));
        }
        w = w.max(r.max_rel_error);
    }
    Ok(w)
}

pub fn gc(seed: u64) -> GradCheck {
    GradCheck {
        seed,
        tolerance: TOL,
        ..Default::default()
    }
}

fn kink() -> Vec<GradReport> {
    vec![GradReport {
        kink_hits: 1,
        ..Default::default()
    }]
}

pub fn dense_case(act: Activation, seed: u64) -> Vec<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = Dense::<f64>::new("d", 3, 2, act, &mut rng);
    layer.bias.value = normal(layer.bias.value.raw_dim(), &mut rng);
    let x = normal((4, 3), &mut rng);
    let r = normal((4, 2), &mut rng);
    layer.zero_grad();
    layer.forward(x.view()).unwrap();
    let dx = layer.backward(r.view());
    let theta = flatten_values(&layer.params());
    let grads = flatten_grads(&layer.params());
    let p = gc(seed).check(&theta, &grads, |t| {
        set_values(&mut layer.params_mut(), t);
        weighted_sum(&layer.forward(x.view()).unwrap(), &r)
    });
    set_values(&mut layer.params_mut(), &theta);
    let xs: Vec<f64> = x.iter().copied().collect();
    let i = gc(seed).check(&xs, &dx.iter().copied().collect::<Vec<_>>(), |t| {
        let xv = Array2::from_shape_vec((4, 3), t.to_vec()).unwrap();
        weighted_sum(&layer.forward(xv.view()).unwrap(), &r)
    });
    vec![p, i]
}

pub fn conv_case(k: usize, seed: u64) -> Vec<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut conv = Conv1d::<f64>::new("c", 3, 2, k, Activation::Elu, &mut rng).unwrap();
    conv.bias.value = normal(conv.bias.value.raw_dim(), &mut rng);
    let x = normal((2, 5, 3), &mut rng);
    let r = normal((2, 5, 2), &mut rng);
    conv.zero_grad();
    conv.forward(x.view()).unwrap();
    let dx = conv.backward(r.view());
    let theta = flatten_values(&conv.params());
    let grads = flatten_grads(&conv.params());
    let p = gc(seed).check(&theta, &grads, |t| {
        set_values(&mut conv.params_mut(), t);
        weighted_sum(&conv.forward(x.view()).unwrap(), &r)
    });
    set_values(&mut conv.params_mut(), &theta);
    let i = gc(seed).check(&x.iter().copied().collect::<Vec<_>>(), &dx.iter().copied().collect::<Vec<_>>(), |t| {
        let xv = Array3::from_shape_vec((2, 5, 3), t.to_vec()).unwrap();
        weighted_sum(&conv.forward(xv.view()).unwrap(), &r)
    });
    vec![p, i]
}

pub fn pool_case(mode: PoolMode, seed: u64) -> Vec<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pool = MaxPool1d::new(3, mode).unwrap();
    let x = normal((2, 5, 3), &mut rng);
    if pool.tie_margin(x.view()) < 1e-3 {
        return kink();
    }
    let y = pool.forward(x.view());
    let r = normal(y.raw_dim(), &mut rng);
    let dx = pool.backward(r.view());
    vec![gc(seed).check(&x.iter().copied().collect::<Vec<_>>(), &dx.iter().copied().collect::<Vec<_>>(), |t| {
        let xv = Array3::from_shape_vec((2, 5, 3), t.to_vec()).unwrap();
        weighted_sum(&pool.forward(xv.view()), &r)
    })]
}

pub fn inception_case(seed: u64) -> Vec<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut block = Inception::<f64>::new("i", 3, &[1, 4, 7], 2, 3, &mut rng).unwrap();
    for p in block.params_mut() {
        if p.name.ends_with("bias") {
            p.value = normal(p.value.raw_dim(), &mut rng) * 0.1;
        }
    }
    let x = normal((2, 5, 3), &mut rng);
    if block.pool_tie_margin(x.view()) < 1e-3 {
        return kink();
    }
    let y = block.forward(x.view()).unwrap();
    let r = normal(y.raw_dim(), &mut rng);
    block.zero_grad();
    block.forward(x.view()).unwrap();
    let dx = block.backward_flat(&r);
    let theta = flatten_values(&block.params());
    let grads = flatten_grads(&block.params());
    let p = gc(seed).check(&theta, &grads, |t| {
        set_values(&mut block.params_mut(), t);
        weighted_sum(&block.forward(x.view()).unwrap(), &r)
    });
    set_values(&mut block.params_mut(), &theta);
    let i = gc(seed).check(&x.iter().copied().collect::<Vec<_>>(), &dx.iter().copied().collect::<Vec<_>>(), |t| {
        let xv = Array3::from_shape_vec((2, 5, 3), t.to_vec()).unwrap();
        weighted_sum(&block.forward(xv.view()).unwrap(), &r)
    });
    vec![p, i]
}

pub fn lstm_case(layers: usize, seed: u64) -> Vec<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (b, l, d, h) = (2, 3, 4, 5);
    let mut lstm = BiLstm::<f64>::new("l", d, h, layers, &mut rng).unwrap();
    let x = normal((b, l, d), &mut rng);
    let mut mask = Array2::from_elem((b, l), true);
    mask[[1, 2]] = false;
    let r_seq = normal((b, l, 2 * h), &mut rng);
    let r_fin = normal((b, 2 * h), &mut rng);
    let objective = |lstm: &mut BiLstm<f64>, x: &Array3<f64>| {
        let (seq, fin) = lstm.forward(x.view(), &mask).unwrap();
        weighted_sum(&seq, &r_seq) + weighted_sum(&fin, &r_fin)
    };
    lstm.zero_grad();
    lstm.forward(x.view(), &mask).unwrap();
    let dx = lstm.backward(Some(r_seq.view()), r_fin.view());
    let theta = flatten_values(&lstm.params());
    let grads = flatten_grads(&lstm.params());
    let p = gc(seed).check(&theta, &grads, |t| {
        set_values(&mut lstm.params_mut(), t);
        objective(&mut lstm, &x)
    });
    set_values(&mut lstm.params_mut(), &theta);
    let i = gc(seed).check(&x.iter().copied().collect::<Vec<_>>(), &dx.iter().copied().collect::<Vec<_>>(), |t| {
        let xv = Array3::from_shape_vec((b, l, d), t.to_vec()).unwrap();
        objective(&mut lstm, &xv)
    });
    // padded position receives no gradient
    assert!(dx.slice(ndarray::s![1, 2, ..]).iter().all(|&v| v == 0.0));
    vec![p, i]
}

/// Softmax cross-entropy and sigmoid BCE on standard-normal logits.
pub fn loss_cases() -> Vec<GradReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let logits = normal((3, 4), &mut rng);
    let classes = [2usize, 0, 3];
    let (_, g) = softmax_cross_entropy(logits.view(), &classes).unwrap();
    let theta: Vec<f64> = logits.iter().copied().collect();
    let r = gc(0).check(&theta, &g.iter().copied().collect::<Vec<_>>(), |t| {
        let z = Array2::from_shape_vec((3, 4), t.to_vec()).unwrap();
        softmax_cross_entropy(z.view(), &classes).unwrap().0
    });
    let ce = r;

    let targets = Array2::from_shape_fn((3, 4), |(i, j)| ((i + j) % 2) as f64);
    let (_, g) = sigmoid_bce(logits.view(), targets.view()).unwrap();
    let r = gc(0).check(&theta, &g.iter().copied().collect::<Vec<_>>(), |t| {
        let z = Array2::from_shape_vec((3, 4), t.to_vec()).unwrap();
        sigmoid_bce(z.view(), targets.view()).unwrap().0
    });
    vec![ce, r]
}

pub fn small_spec(decoder: Decoder, fusion: Fusion, head: Head) -> ModelSpec {
    let mut text = TowerSpec::new(Modality::Text, 4);
    text.vocab_size = Some(7);
    text.lstm_dim = 3;
    text.dense = 4;
    text.dropout = 0.0;
    let mut eeg = TowerSpec::new(Modality::Eeg(Band::Gamma), 3);
    eeg.decoder = decoder;
    eeg.lstm_dim = 3;
    eeg.cnn_filters = 2;
    eeg.pool = 3;
    eeg.dense = 4;
    eeg.dropout = 0.0;
    ModelSpec {
        towers: vec![text, eeg],
        fusion,
        head,
        threshold: 0.5,
        max_len: 5,
    }
}

pub fn small_batch(spec: &ModelSpec, rng: &mut ChaCha8Rng) -> Batch<f64> {
    let (b, l) = (3, spec.max_len);
    let mut mask = Array2::from_elem((b, l), true);
    mask[[0, 4]] = false;
    mask[[2, 3]] = false;
    mask[[2, 4]] = false;
    let ids = Array2::from_shape_fn((b, l), |_| rng.gen_range(0..7));
    let targets = match spec.head {
        Head::Softmax { classes } => Targets::Classes((0..b).map(|i| i % classes).collect()),
        Head::Sigmoid { labels } => Targets::Labels(Array2::from_shape_fn((b, labels), |(i, j)| ((i + j) % 2) as f64)),
    };
    Batch {
        text: TextInput::Ids(ids),
        mask,
        extra: vec![normal((b, l, 3), rng)],
        targets,
    }
}

pub fn model_case(decoder: Decoder, fusion: Fusion, head: Head, seed: u64) -> Vec<GradReport> {
    let spec = small_spec(decoder, fusion, head);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = Network::<f64>::new(&spec, seed).unwrap();
    // move biases off zero so ReLU units sit away from their kink
    for p in net.params_mut() {
        if p.name.contains("dense") && p.name.ends_with("bias") {
            p.value = normal(p.value.raw_dim(), &mut rng) * 0.5;
        }
    }
    let batch = small_batch(&spec, &mut rng);
    net.loss_and_grad(&batch, false, &mut rng).unwrap();
    if net.kink_margin() < 1e-4 {
        return kink();
    }
    let theta = flatten_values(&net.params());
    let grads = flatten_grads(&net.params());
    vec![GradCheck {
        seed,
        max_coords: 300,
        ..Default::default()
    }
    .check(&theta, &grads, |t| {
        set_values(&mut net.params_mut(), t);
        net.loss(&batch).unwrap()
    })]
}

