use freqmask::diff::softmax;
use freqmask::explainer::*;
use freqmask::models::{build_model, train_model, Model, ModelConfig, TrainConfig};
use freqmask::spectral::{dft_forward, make_partition, Spectrum};
use freqmask::synth::{compute_clusters, generate_dataset, ClusterSet, Epoch, SynthConfig};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CH: usize = 2;
const T: usize = 32;
const BANDS: usize = 4;

fn random_epoch(id: usize, subject_id: usize, seed: u64) -> Epoch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Epoch {
        id,
        subject_id,
        label: id % 2,
        sample_rate: 32.0,
        channels: CH,
        samples: T,
        data: (0..CH * T).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

fn fixture() -> (Model, Vec<Epoch>, ClusterSet) {
    let epochs: Vec<Epoch> = (0..8).map(|i| random_epoch(i, i / 4, 100 + i as u64)).collect();
    let refs: Vec<&Epoch> = epochs.iter().collect();
    let clusters = compute_clusters(&refs).unwrap();
    let model = build_model(&ModelConfig::mlp(CH, T, 5)).unwrap();
    (model, epochs, clusters)
}

fn config() -> ExplainerConfig {
    ExplainerConfig {
        num_bands: BANDS,
        ..ExplainerConfig::default()
    }
}

fn random_spectrum(seed: u64) -> Spectrum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = CH * T;
    Spectrum::new(
        CH,
        T,
        (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
        (0..n).map(|_| rng.random_range(-2.0..2.0)).collect(),
    )
    .unwrap()
}

#[test]
fn generator_output_is_hermitian() {
    for one_branch in [false, true] {
        let gen = PerturbationGenerator::seeded(T, one_branch, 3);
        let out = generate_perturbation(&gen, &random_spectrum(4)).unwrap();
        assert!(out.hermitian_error() < 1e-12, "one_branch={one_branch}");
    }
}

#[test]
fn generator_rejects_other_lengths() {
    let gen = PerturbationGenerator::seeded(T + 1, false, 3);
    assert!(generate_perturbation(&gen, &random_spectrum(4)).is_err());
}

#[test]
fn extreme_masks_select_one_side_exactly() {
    let p = make_partition(T, BANDS).unwrap();
    let x = random_spectrum(1);
    let g = random_spectrum(2);
    let keep = blend(&x, &[1.0; CH * BANDS], CH, &p, &g).unwrap();
    assert_eq!(keep, x);
    let replace = blend(&x, &[0.0; CH * BANDS], CH, &p, &g).unwrap();
    assert_eq!(replace, g);
}

#[test]
fn blended_spectrum_of_real_signal_stays_hermitian() {
    let (_, epochs, _) = fixture();
    let p = make_partition(T, BANDS).unwrap();
    let mut mask = Mask::neutral(CH, BANDS);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    mask.logits.iter_mut().for_each(|l| *l = rng.random_range(-3.0..3.0));
    for one_branch in [false, true] {
        let gen = PerturbationGenerator::seeded(T, one_branch, 7);
        let spec = dft_forward(&epochs[0].data, CH).unwrap();
        let hat = apply_mask(&spec, &mask, &p, &gen).unwrap();
        assert!(hat.hermitian_error() < 1e-9);
    }
}

#[test]
fn alignment_matches_double_loop() {
    let g = random_spectrum(10);
    let targets: Vec<Spectrum> = (0..5).map(|i| random_spectrum(20 + i)).collect();
    let mut brute = 0.0;
    for t in &targets {
        let mut acc = 0.0;
        for c in 0..CH {
            for k in 0..T {
                let j = c * T + k;
                let dr = g.re[j] - t.re[j];
                let di = g.im[j] - t.im[j];
                acc += dr * dr + di * di;
            }
        }
        brute += acc / (CH * T) as f64;
    }
    brute /= targets.len() as f64;
    let fast = target_alignment_loss(&g, &targets).unwrap();
    assert!((fast - brute).abs() < 1e-10 * brute.max(1.0), "{fast} vs {brute}");
}

#[test]
fn alignment_to_self_is_zero() {
    let g = random_spectrum(10);
    assert!(target_alignment_loss(&g, std::slice::from_ref(&g)).unwrap().abs() < 1e-12);
    assert!(target_alignment_loss(&g, &[]).is_err());
}

#[test]
fn objective_recomposes_from_parts() {
    let (model, epochs, clusters) = fixture();
    let gen = PerturbationGenerator::seeded(T, false, 1);
    let mut mask = Mask::neutral(CH, BANDS);
    mask.logits[3] = 1.5;
    for regularizers_enabled in [true, false] {
        let cfg = ExplainerConfig {
            lambda: 0.3,
            regularizers_enabled,
            ..config()
        };
        let p = total_objective(&model, &epochs[0], &mask, &gen, &clusters, &cfg).unwrap();
        let mut expected = p.preservation + 0.3 * p.alignment;
        if regularizers_enabled {
            expected += p.mask_l1 + p.perturbation_l1;
        }
        assert!((p.total - expected).abs() < 1e-10);
        assert!((p.mask_l1 - mask.values().iter().sum::<f64>() / (CH * BANDS) as f64).abs() < 1e-12);
    }
}

#[test]
fn identity_mask_preserves_the_prediction() {
    let (model, epochs, clusters) = fixture();
    let gen = PerturbationGenerator::seeded(T, false, 1);
    let mask = Mask {
        channels: CH,
        bands: BANDS,
        logits: vec![60.0; CH * BANDS],
    };
    let p = total_objective(&model, &epochs[1], &mask, &gen, &clusters, &config()).unwrap();
    let probs = softmax(&model.logits(&epochs[1].data).unwrap());
    let entropy: f64 = -probs.iter().map(|q| q * q.ln()).sum::<f64>();
    assert!((p.preservation - entropy).abs() < 1e-10);
    assert_eq!(p.mask_l1, 1.0);
}

#[test]
fn zero_lambda_ignores_clusters() {
    let (model, epochs, clusters) = fixture();
    let other: Vec<Epoch> = (0..6).map(|i| random_epoch(50 + i, 7 + i / 3, 900 + i as u64)).collect();
    let other_refs: Vec<&Epoch> = other.iter().collect();
    let other_clusters = compute_clusters(&other_refs).unwrap();
    let cfg = ExplainerConfig {
        lambda: 0.0,
        ..config()
    };
    let gen = PerturbationGenerator::seeded(T, false, 2);
    let mask = Mask::neutral(CH, BANDS);
    let a = total_objective(&model, &epochs[2], &mask, &gen, &clusters, &cfg).unwrap();
    let b = total_objective(&model, &epochs[2], &mask, &gen, &other_clusters, &cfg).unwrap();
    assert_eq!(a.total, b.total);
    assert_ne!(a.alignment, b.alignment);
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let (model, epochs, clusters) = fixture();
    let epoch = &epochs[4];
    for one_branch in [false, true] {
        let cfg = ExplainerConfig {
            one_branch_mode: one_branch,
            lambda: 0.05,
            ..config()
        };
        let target = AlignmentTarget::for_epoch(epoch, &clusters).unwrap();
        let mut mask = Mask::neutral(CH, BANDS);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        mask.logits.iter_mut().for_each(|l| *l = rng.random_range(-1.0..1.0));
        let gen = PerturbationGenerator::seeded(T, one_branch, 18);
        let grad = objective_gradient(&model, epoch, &mask, &gen, target.clone(), &cfg).unwrap();
        let eval = |m: &Mask, g: &PerturbationGenerator| {
            objective_with_target(&model, epoch, m, g, target.clone(), &cfg).unwrap().total
        };
        let h = 1e-6;
        let close = |a: f64, n: f64| (a - n).abs() <= 1e-4 * a.abs().max(n.abs()).max(1e-4);
        for j in 0..mask.logits.len() {
            let (mut plus, mut minus) = (mask.clone(), mask.clone());
            plus.logits[j] += h;
            minus.logits[j] -= h;
            let numeric = (eval(&plus, &gen) - eval(&minus, &gen)) / (2.0 * h);
            assert!(close(grad.mask[j], numeric), "mask {j}: {} vs {numeric}", grad.mask[j]);
        }
        for block in 0..grad.generator.len() {
            let len = grad.generator[block].len();
            for j in (0..len).step_by(len / 13 + 1) {
                let (mut plus, mut minus) = (gen.clone(), gen.clone());
                plus.params_mut()[block][j] += h;
                minus.params_mut()[block][j] -= h;
                let numeric = (eval(&mask, &plus) - eval(&mask, &minus)) / (2.0 * h);
                let a = grad.generator[block][j];
                assert!(close(a, numeric), "block {block} param {j}: {a} vs {numeric}");
            }
        }
    }
}

#[test]
fn optimization_is_deterministic() {
    let (model, epochs, clusters) = fixture();
    let cfg = ExplainerConfig {
        max_epochs: 40,
        ..config()
    };
    let a = optimize_mask(&model, &epochs[3], &clusters, &cfg, 11).unwrap();
    let b = optimize_mask(&model, &epochs[3], &clusters, &cfg, 11).unwrap();
    assert_eq!(a, b);
    let c = optimize_mask(&model, &epochs[3], &clusters, &cfg, 12).unwrap();
    assert_ne!(a.generator, c.generator);
}

#[test]
fn trace_tracks_the_running_best() {
    let (model, epochs, clusters) = fixture();
    let cfg = config();
    let e = optimize_mask(&model, &epochs[5], &clusters, &cfg, 1).unwrap();
    assert!(!e.trace.is_empty() && e.trace.len() <= cfg.max_epochs);
    let mut best = f64::INFINITY;
    for (i, entry) in e.trace.iter().enumerate() {
        assert_eq!(entry.epoch, i);
        best = best.min(entry.parts.total);
        assert_eq!(entry.best_so_far, best);
    }
    if e.trace.len() < cfg.max_epochs {
        let tail = &e.trace[e.trace.len() - cfg.patience..];
        let before = e.trace[e.trace.len() - cfg.patience - 1].best_so_far;
        assert!(tail.iter().all(|t| t.parts.total >= before - cfg.min_relative_improvement * before.abs()));
    }
}

#[test]
fn constant_model_drives_the_mask_down() {
    let cfg = SynthConfig {
        n_subjects: 2,
        epochs_per_subject_per_class: 4,
        ..SynthConfig::default()
    };
    let ds = generate_dataset(8, &cfg).unwrap();
    let refs: Vec<&Epoch> = ds.epochs.iter().collect();
    let clusters = compute_clusters(&refs).unwrap();
    let mut model = build_model(&ModelConfig::mini_cnn(cfg.channels, cfg.samples(), 2)).unwrap();
    for name in ["out.weight", "out.bias"] {
        model.param_mut(name).unwrap().data.iter_mut().for_each(|v| *v = 0.0);
    }
    // The default early stop fires on generator jitter long before the
    // mask term alone would stall, so it is switched off here.
    let full = ExplainerConfig {
        patience: 300,
        ..ExplainerConfig::default()
    };
    for epoch in &refs[..3] {
        let e = optimize_mask(&model, epoch, &clusters, &full, 4).unwrap();
        let mean = e.map.values.iter().sum::<f64>() / e.map.values.len() as f64;
        assert!(mean < 0.1, "mean mask {mean} after {} steps", e.trace.len());
        let stopped = optimize_mask(&model, epoch, &clusters, &ExplainerConfig::default(), 4).unwrap();
        assert!(stopped.map.values.iter().all(|&v| v < 0.5));
    }
}

#[test]
fn trained_model_does_not_keep_everything() {
    let cfg = SynthConfig {
        n_subjects: 2,
        epochs_per_subject_per_class: 10,
        ..SynthConfig::default()
    };
    let ds = generate_dataset(31, &cfg).unwrap();
    let refs: Vec<&Epoch> = ds.epochs.iter().collect();
    let mut model = build_model(&ModelConfig::mini_cnn(cfg.channels, cfg.samples(), 2)).unwrap();
    train_model(&mut model, &refs, None, &TrainConfig { epochs: 40, learning_rate: 1e-2 }).unwrap();
    let clusters = compute_clusters(&refs).unwrap();
    let ex = ExplainerConfig::default();
    for epoch in refs.iter().step_by(9) {
        let e = optimize_mask(&model, epoch, &clusters, &ex, 0).unwrap();
        let mean = e.map.values.iter().sum::<f64>() / e.map.values.len() as f64;
        assert!(mean < 0.95, "epoch {}: {mean}", epoch.id);
    }
}

#[test]
fn invalid_state_is_refused() {
    let (model, epochs, clusters) = fixture();
    let gen = PerturbationGenerator::seeded(T, false, 1);
    let wrong = Mask::neutral(CH, BANDS + 1);
    assert!(total_objective(&model, &epochs[0], &wrong, &gen, &clusters, &config()).is_err());
    let one = PerturbationGenerator::seeded(T, true, 1);
    assert!(total_objective(&model, &epochs[0], &Mask::neutral(CH, BANDS), &one, &clusters, &config()).is_err());
    let bad = ExplainerConfig {
        patience: 0,
        ..config()
    };
    assert!(optimize_mask(&model, &epochs[0], &clusters, &bad, 0).is_err());
}

#[test]
fn maps_round_trip_and_reject_bad_values() {
    let (model, epochs, clusters) = fixture();
    let cfg = ExplainerConfig {
        max_epochs: 5,
        ..config()
    };
    let maps: Vec<SaliencyMap> = epochs[..3]
        .iter()
        .map(|e| optimize_mask(&model, e, &clusters, &cfg, 0).unwrap().map)
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("maps.jsonl");
    save_maps(&path, &maps).unwrap();
    assert_eq!(load_maps(&path).unwrap(), maps);

    let mut broken = maps.clone();
    broken[1].values[0] = 1.5;
    save_maps(&path, &broken).unwrap();
    match load_maps(&path) {
        Err(freqmask::Error::Load { field, .. }) => assert_eq!(field, "[1].values"),
        other => panic!("{other:?}"),
    }
}

fn map_strategy() -> impl Strategy<Value = Vec<SaliencyMap>> {
    (1usize..4, 1usize..5, 1usize..6).prop_flat_map(|(ch, bands, n)| {
        prop::collection::vec(prop::collection::vec(0.0f64..=1.0, ch * bands), n).prop_map(move |rows| {
            rows.into_iter()
                .enumerate()
                .map(|(i, values)| SaliencyMap {
                    level: Level::Instance,
                    channels: ch,
                    bands,
                    values,
                    epoch_ids: vec![i],
                    seed: 0,
                    config_hash: String::new(),
                })
                .collect()
        })
    })
}

proptest! {
    #[test]
    fn group_map_is_the_cellwise_mean(maps in map_strategy()) {
        let group = group_saliency(&maps).unwrap();
        prop_assert_eq!(group.level, Level::Group);
        prop_assert_eq!(group.epoch_ids.len(), maps.len());
        for c in 0..group.channels {
            for b in 0..group.bands {
                let mut sum = 0.0;
                for m in &maps {
                    sum += m.get(c, b);
                }
                prop_assert!((group.get(c, b) - sum / maps.len() as f64).abs() < 1e-12);
            }
        }
    }
}
