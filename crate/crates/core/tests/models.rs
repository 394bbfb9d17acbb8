use freqmask::diff::Tensor;
use freqmask::models::*;
use freqmask::synth::{generate_dataset, Epoch, SynthConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn epoch(id: usize, label: usize, channels: usize, data: Vec<f64>) -> Epoch {
    Epoch {
        id,
        subject_id: 0,
        label,
        sample_rate: 10.0,
        channels,
        samples: data.len() / channels,
        data,
    }
}

/// Each epoch is constant, at a level drawn from one of two Gaussian blobs.
fn blobs(n: usize, seed: u64) -> Vec<Epoch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.2).unwrap();
    (0..n)
        .map(|i| {
            let label = i % 2;
            let centre = if label == 0 { -1.0 } else { 1.0 };
            let level = centre + noise.sample(&mut rng);
            epoch(i, label, 2, vec![level; 2 * 20])
        })
        .collect()
}

#[test]
fn zero_epochs_leave_parameters_alone() {
    let data = blobs(10, 1);
    let refs: Vec<&Epoch> = data.iter().collect();
    let mut m = build_model(&ModelConfig::mini_cnn(2, 20, 4)).unwrap();
    let before = m.params.clone();
    train_model(&mut m, &refs, None, &TrainConfig { epochs: 0, learning_rate: 1e-3 }).unwrap();
    assert_eq!(m.params, before);
}

#[test]
fn separable_blobs_are_learned() {
    let train = blobs(60, 2);
    let test = blobs(40, 3);
    let tr: Vec<&Epoch> = train.iter().collect();
    let te: Vec<&Epoch> = test.iter().collect();
    for cfg in [ModelConfig::mini_cnn(2, 20, 5), ModelConfig::mlp(2, 20, 5)] {
        let mut m = build_model(&cfg).unwrap();
        train_model(&mut m, &tr, Some(&te), &TrainConfig { epochs: 200, learning_rate: 1e-2 }).unwrap();
        assert_eq!(m.meta.test_accuracy, Some(1.0), "{:?}", cfg.architecture);
    }
}

#[test]
fn single_class_training_is_refused() {
    let data: Vec<Epoch> = blobs(10, 1).into_iter().filter(|e| e.label == 0).collect();
    let refs: Vec<&Epoch> = data.iter().collect();
    let mut m = build_model(&ModelConfig::mlp(2, 20, 0)).unwrap();
    assert!(matches!(
        train_model(&mut m, &refs, None, &TrainConfig::default()),
        Err(freqmask::Error::Contract(_))
    ));
}

#[test]
fn shape_mismatch_is_refused() {
    let m = build_model(&ModelConfig::mlp(2, 20, 0)).unwrap();
    let bad = epoch(0, 0, 3, vec![0.0; 60]);
    assert!(predict(&m, &[&bad]).is_err());
}

#[test]
fn batch_prediction_equals_loop() {
    let data = blobs(150, 7);
    let refs: Vec<&Epoch> = data.iter().collect();
    let m = build_model(&ModelConfig::mini_cnn(2, 20, 8)).unwrap();
    let batch = predict(&m, &refs).unwrap();
    for (e, p) in refs.iter().zip(&batch) {
        let single = predict(&m, &[*e]).unwrap();
        assert_eq!(&single[0], p);
    }
}

#[test]
fn checkpoint_round_trip_is_bit_exact() {
    let data = blobs(30, 9);
    let refs: Vec<&Epoch> = data.iter().collect();
    let mut m = build_model(&ModelConfig::mini_cnn(2, 20, 10)).unwrap();
    train_model(&mut m, &refs, None, &TrainConfig { epochs: 5, learning_rate: 1e-2 }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_model(&path, &m).unwrap();
    let back = load_model(&path).unwrap();
    assert_eq!(back, m);
    assert_eq!(predict(&back, &refs).unwrap(), predict(&m, &refs).unwrap());
}

#[test]
fn corrupt_checkpoint_names_the_field() {
    let m = build_model(&ModelConfig::mlp(2, 20, 0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    save_model(&path, &m).unwrap();
    let text = std::fs::read_to_string(&path).unwrap().replace("\"hidden\":64", "\"hidden\":\"x\"");
    std::fs::write(&path, text).unwrap();
    match load_model(&path) {
        Err(freqmask::Error::Load { field, .. }) => assert_eq!(field, "config.hidden"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn constant_model_has_zero_input_gradient() {
    let mut m = build_model(&ModelConfig::mini_cnn(2, 20, 11)).unwrap();
    for name in ["out.weight", "out.bias"] {
        m.param_mut(name).unwrap().data.iter_mut().for_each(|v| *v = 0.0);
    }
    let e = &blobs(1, 1)[0];
    let target = Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap();
    let g = input_gradient(&m, e, |t, z| t.cross_entropy(z, &target)).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
}

#[test]
fn non_scalar_objective_is_refused() {
    let m = build_model(&ModelConfig::mlp(2, 20, 0)).unwrap();
    let e = &blobs(1, 1)[0];
    assert!(input_gradient(&m, e, |_, z| Ok(z)).is_err());
}

#[test]
fn linear_mlp_gradient_is_weight_composition() {
    let mut m = build_model(&ModelConfig::mlp(2, 5, 12)).unwrap();
    // A large hidden bias keeps every ReLU in its linear regime.
    m.param_mut("hidden.bias").unwrap().data.iter_mut().for_each(|v| *v = 100.0);
    let e = epoch(0, 0, 2, vec![0.1, -0.2, 0.3, 0.05, 0.0, 0.2, -0.1, 0.1, 0.0, 0.3]);
    let g = input_gradient(&m, &e, |t, z| {
        let pick = t.constant(Tensor::matrix(1, 2, vec![1.0, 0.0]).unwrap());
        let p = t.mul(z, pick)?;
        Ok(t.sum(p))
    })
    .unwrap();
    let w1 = &m.param("hidden.weight").unwrap().data;
    let w2 = &m.param("out.weight").unwrap().data;
    let h = m.config.hidden;
    for (i, gi) in g.iter().enumerate() {
        let expected: f64 = (0..h).map(|j| w1[i * h + j] * w2[j * 2]).sum();
        assert!((gi - expected).abs() < 1e-12);
    }
}

#[test]
fn mini_cnn_input_gradient_matches_finite_differences() {
    let m = build_model(&ModelConfig::mini_cnn(2, 24, 13)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let data: Vec<f64> = (0..48).map(|_| rng.random_range(-1.0..1.0)).collect();
    let e = epoch(0, 1, 2, data.clone());
    let objective = |logits: &[f64]| {
        let s = freqmask::diff::softmax(logits);
        -s[1].ln()
    };
    let g = input_gradient(&m, &e, |t, z| {
        t.cross_entropy(z, &Tensor::matrix(1, 2, vec![0.0, 1.0]).unwrap())
    })
    .unwrap();
    let h = 1e-6;
    for i in 0..data.len() {
        let mut plus = data.clone();
        plus[i] += h;
        let mut minus = data.clone();
        minus[i] -= h;
        let numeric = (objective(&m.logits(&plus).unwrap()) - objective(&m.logits(&minus).unwrap())) / (2.0 * h);
        let scale = g[i].abs().max(numeric.abs()).max(1e-4);
        assert!((g[i] - numeric).abs() <= 1e-3 * scale, "element {i}: {} vs {numeric}", g[i]);
    }
}

#[test]
fn training_order_barely_matters() {
    let cfg = SynthConfig {
        n_subjects: 2,
        epochs_per_subject_per_class: 20,
        ..SynthConfig::default()
    };
    let ds = generate_dataset(21, &cfg).unwrap();
    let mut accs = Vec::new();
    for shuffle in 0..3u64 {
        let mut refs: Vec<&Epoch> = ds.epochs.iter().collect();
        refs.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        let mut m = build_model(&ModelConfig::mini_cnn(8, 400, 1)).unwrap();
        train_model(&mut m, &refs, None, &TrainConfig { epochs: 30, learning_rate: 1e-2 }).unwrap();
        accs.push(m.meta.train_accuracy.unwrap());
    }
    let spread = accs.iter().cloned().fold(f64::MIN, f64::max) - accs.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread <= 0.02, "{accs:?}");
}
