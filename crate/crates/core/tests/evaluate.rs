use freqmask::evaluate::*;
use freqmask::explainer::{ExplainerConfig, Level, SaliencyMap};
use freqmask::models::{build_model, predict, Model, ModelConfig, TrainConfig};
use freqmask::spectral::{make_partition, BandPartition, FourierPlan};
use freqmask::synth::{compute_clusters, loso_splits, Epoch};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CH: usize = 2;
const T: usize = 32;
const BANDS: usize = 4;

fn random_epochs(n: usize, subjects: usize, seed: u64) -> Vec<Epoch> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| Epoch {
            id: i,
            subject_id: i % subjects,
            label: (i / subjects) % 2,
            sample_rate: 32.0,
            channels: CH,
            samples: T,
            data: (0..CH * T).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect()
}

fn model(seed: u64) -> Model {
    build_model(&ModelConfig::mini_cnn(CH, T, seed)).unwrap()
}

fn partition() -> BandPartition {
    make_partition(T, BANDS).unwrap()
}

#[test]
fn empty_salient_set_keeps_accuracy() {
    let epochs = random_epochs(30, 2, 1);
    let refs: Vec<&Epoch> = epochs.iter().collect();
    let r = removal_feed_in(&model(2), &refs, &[false; CH * BANDS], &partition()).unwrap();
    assert_eq!(r.accuracy_remove_salient, r.accuracy_original);
}

#[test]
fn removing_everything_leaves_the_constant_prediction() {
    let epochs = random_epochs(30, 2, 3);
    let refs: Vec<&Epoch> = epochs.iter().collect();
    let m = model(4);
    let zero = Epoch {
        data: vec![0.0; CH * T],
        ..epochs[0].clone()
    };
    let constant = predict(&m, &[&zero]).unwrap()[0].label;
    let expected = epochs.iter().filter(|e| e.label == constant).count() as f64 / epochs.len() as f64;
    let r = removal_feed_in(&m, &refs, &[true; CH * BANDS], &partition()).unwrap();
    assert_eq!(r.accuracy_remove_salient, expected);
    assert_eq!(r.accuracy_remove_nonsalient, r.accuracy_original);
}

#[test]
fn removal_zeroes_exactly_the_chosen_cells() {
    let epochs = random_epochs(1, 1, 5);
    let p = partition();
    let plan = FourierPlan::new(T);
    let mut zero = vec![false; CH * BANDS];
    zero[1] = true;
    zero[BANDS + 3] = true;
    let out = remove_cells(&plan, &epochs[0].data, CH, &zero, &p).unwrap();
    let before = band_power_features(&plan, &epochs[0].data, CH, &p).unwrap();
    let after = band_power_features(&plan, &out, CH, &p).unwrap();
    for j in 0..CH * BANDS {
        if zero[j] {
            assert!(after[j] < 1e-20);
        } else {
            assert!((after[j] - before[j]).abs() < 1e-9 * before[j].max(1.0));
        }
    }
}

#[test]
fn instance_game_needs_one_map_per_epoch() {
    let epochs = random_epochs(4, 2, 6);
    let refs: Vec<&Epoch> = epochs.iter().collect();
    assert!(removal_feed_in_instances(&model(1), &refs, &[], &partition()).is_err());
}

#[test]
fn ignored_channel_has_no_baseline_saliency() {
    let epochs = random_epochs(40, 2, 7);
    let refs: Vec<&Epoch> = epochs.iter().collect();
    let mut m = model(8);
    let (filters, hidden) = (m.config.filters, m.config.hidden);
    let w = &mut m.param_mut("mix.weight").unwrap().data;
    for f in 0..filters {
        w[(f * CH + 1) * hidden..(f * CH + 2) * hidden].iter_mut().for_each(|v| *v = 0.0);
    }
    let drops = easy_peasi(&m, &refs, &partition(), 9).unwrap();
    assert_eq!(drops.len(), CH * BANDS);
    assert!(drops[BANDS..].iter().all(|&d| d == 0.0), "{drops:?}");
}

#[test]
fn zero_variance_band_makes_noise_equal_zeroing() {
    let p = partition();
    let plan = FourierPlan::new(T);
    let mut cell = vec![false; CH * BANDS];
    cell[2] = true;
    let mut epochs = random_epochs(40, 2, 10);
    for e in &mut epochs {
        e.data = remove_cells(&plan, &e.data, CH, &cell, &p).unwrap();
    }
    let refs: Vec<&Epoch> = epochs.iter().collect();
    let m = model(11);
    let drops = easy_peasi(&m, &refs, &p, 12).unwrap();
    let original = freqmask::models::accuracy(&m, &refs).unwrap();
    let removal = original - accuracy_after_removal(&m, &refs, &cell, &p).unwrap();
    assert_eq!(drops[2], removal);
}

#[test]
fn easy_peasi_is_seeded() {
    let epochs = random_epochs(20, 2, 13);
    let refs: Vec<&Epoch> = epochs.iter().collect();
    let m = model(14);
    assert_eq!(
        easy_peasi(&m, &refs, &partition(), 1).unwrap(),
        easy_peasi(&m, &refs, &partition(), 1).unwrap()
    );
}

fn brute_kde(points: &[Vec<f64>], h: &[f64], x: &[f64]) -> f64 {
    let mut density = 0.0;
    for p in points {
        let mut k = 1.0;
        for j in 0..h.len() {
            let z = (x[j] - p[j]) / h[j];
            k *= (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * h[j]);
        }
        density += k;
    }
    (density / points.len() as f64).ln()
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()
}

#[test]
fn kde_matches_sum_of_kernels() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for (n, d) in [(2, 1), (5, 3), (20, 4), (13, 6)] {
        let points = random_points(&mut rng, n, d);
        let kde = GaussianKde::scott(points.clone()).unwrap();
        let factor = (n as f64).powf(-1.0 / (d as f64 + 4.0));
        for j in 0..d {
            let col: Vec<f64> = points.iter().map(|p| p[j]).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
            assert!((kde.bandwidth()[j] - sd * factor).abs() < 1e-12);
        }
        let queries = random_points(&mut rng, 7, d);
        let mut total = 0.0;
        for q in &queries {
            let want = brute_kde(&points, kde.bandwidth(), q);
            assert!((kde.log_density(q).unwrap() - want).abs() < 1e-9);
            total += want;
        }
        let mean = kde.mean_log_likelihood(&queries).unwrap();
        assert!((mean - total / queries.len() as f64).abs() < 1e-9);
    }
}

#[test]
fn kde_at_its_only_center() {
    for (d, h) in [(1, 0.3), (4, 1.0), (10, 2.5)] {
        let kde = GaussianKde::with_bandwidth(vec![vec![0.5; d]], vec![h; d]).unwrap();
        let want = -(d as f64 / 2.0) * (2.0 * std::f64::consts::PI * h * h).ln();
        assert!((kde.log_density(&vec![0.5; d]).unwrap() - want).abs() < 1e-12);
    }
}

#[test]
fn kde_penalizes_distant_sets() {
    let epochs = random_epochs(20, 2, 16);
    let originals: Vec<&[f64]> = epochs.iter().map(|e| e.data.as_slice()).collect();
    let shifted: Vec<Vec<f64>> = epochs.iter().map(|e| e.data.iter().map(|v| v * 1000.0).collect()).collect();
    let shifted: Vec<&[f64]> = shifted.iter().map(Vec::as_slice).collect();
    let matched = kde_discrepancy(&originals, &originals, CH, &partition()).unwrap();
    let far = kde_discrepancy(&originals, &shifted, CH, &partition()).unwrap();
    assert!(far.mean_log_likelihood < matched.mean_log_likelihood);
    assert_eq!(matched.dimension, CH * BANDS);
    assert!(matched.warnings.is_empty());
}

#[test]
fn kde_drops_constant_dimensions_with_a_warning() {
    let mut epochs = random_epochs(15, 2, 17);
    for e in &mut epochs {
        e.data[T..].iter_mut().for_each(|v| *v = 0.0);
    }
    let originals: Vec<&[f64]> = epochs.iter().map(|e| e.data.as_slice()).collect();
    let r = kde_discrepancy(&originals, &originals, CH, &partition()).unwrap();
    assert_eq!(r.dropped_dimensions, (BANDS..2 * BANDS).collect::<Vec<_>>());
    assert_eq!(r.dimension, BANDS);
    assert_eq!(r.warnings.len(), 1);
    assert!(r.mean_log_likelihood.is_finite());
    assert!(kde_discrepancy(&[], &originals, CH, &partition()).is_err());
}

fn quick() -> ExplainerConfig {
    ExplainerConfig {
        num_bands: BANDS,
        max_epochs: 8,
        ..ExplainerConfig::default()
    }
}

#[test]
fn sweep_rows_follow_the_lambda_list() {
    let epochs = random_epochs(12, 2, 18);
    let refs: Vec<&Epoch> = epochs.iter().collect();
    let clusters = compute_clusters(&refs).unwrap();
    let m = model(19);
    let one = lambda_sweep(&m, &refs[..4], &refs, &clusters, &[0.05], &quick(), 3).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0].lambda, 0.05);
    let twice = lambda_sweep(&m, &refs[..4], &refs, &clusters, &[0.5, 0.5], &quick(), 3).unwrap();
    assert_eq!(twice[0], twice[1]);
    assert!(lambda_sweep(&m, &refs[..4], &refs, &clusters, &[], &quick(), 3).is_err());
}

#[test]
fn two_subject_loso_gives_two_folds() {
    let epochs = random_epochs(16, 2, 20);
    let cfg = LosoConfig {
        model: ModelConfig::mini_cnn(CH, T, 1),
        train: TrainConfig {
            epochs: 3,
            learning_rate: 1e-2,
        },
        explainer: quick(),
        max_explained: Some(3),
        seed: 0,
    };
    let study = loso_study(&epochs, &cfg).unwrap();
    assert_eq!(study.folds.len(), 2);
    for (fold, split) in study.folds.iter().zip(loso_splits(&epochs).unwrap()) {
        assert_eq!(fold.held_out_subject, split.held_out_subject);
        assert_eq!(fold.n_train, 8);
        assert_eq!(fold.report.n_epochs, 8);
        assert_eq!(fold.map.epoch_ids.len(), 3);
        assert!(fold.map.epoch_ids.iter().all(|&i| epochs[i].subject_id == fold.held_out_subject));
    }
    assert_eq!(study.unseen_map.level, Level::Group);
    let single: Vec<Epoch> = epochs.into_iter().filter(|e| e.subject_id == 0).collect();
    assert!(loso_study(&single, &cfg).is_err());
}

#[test]
fn generator_flops_scaling() {
    for ch in [1, 8, 62] {
        assert_eq!(generator_flops(ch, 1).two_branch, 4 * ch as u64);
        let a = generator_flops(ch, 64);
        let b = generator_flops(ch, 128);
        assert_eq!(b.two_branch, 4 * a.two_branch);
        assert_eq!(b.gru, 2 * a.gru);
    }
}

#[test]
fn report_csv_round_trips() {
    let report = RemovalReport {
        level: ReportLevel::Group,
        accuracy_original: 0.9125,
        accuracy_remove_nonsalient: 1.0 / 3.0,
        accuracy_remove_salient: 0.1,
        threshold: Some(0.42),
        n_epochs: 80,
    };
    let meta = ReportMetadata {
        report: report.clone(),
        seed: 7,
        config_hash: "abc123".into(),
        salient_cells: vec![true, false],
    };
    let dir = tempfile::tempdir().unwrap();
    let (csv, json) = (dir.path().join("r.csv"), dir.path().join("r.json"));
    save_report(&csv, &json, &meta).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some(REPORT_HEADER));
    assert!(text.lines().nth(1).unwrap().ends_with(",80,7,abc123"));
    let rows = parse_report_csv(&csv).unwrap();
    assert_eq!(
        rows,
        vec![
            ("Ori".to_string(), report.accuracy_original),
            ("RN".to_string(), report.accuracy_remove_nonsalient),
            ("RS".to_string(), report.accuracy_remove_salient),
        ]
    );
    let back: ReportMetadata = freqmask::textio::read_record(&json).unwrap();
    assert_eq!(back, meta);

    std::fs::write(&csv, "nope\n").unwrap();
    assert!(matches!(parse_report_csv(&csv), Err(freqmask::Error::Load { .. })));
}

fn map_of(values: Vec<f64>, channels: usize) -> SaliencyMap {
    SaliencyMap {
        level: Level::Group,
        channels,
        bands: values.len() / channels,
        values,
        epoch_ids: vec![],
        seed: 0,
        config_hash: String::new(),
    }
}

#[test]
fn uniform_map_marks_nothing_salient() {
    let epochs = random_epochs(10, 2, 21);
    let refs: Vec<&Epoch> = epochs.iter().collect();
    let r = removal_for_map(&model(22), &refs, &map_of(vec![0.5; CH * BANDS], CH), &partition()).unwrap();
    assert_eq!(r.threshold, Some(0.5));
    assert_eq!(r.accuracy_remove_salient, r.accuracy_original);
}

proptest! {
    #[test]
    fn median_split_takes_at_most_half(values in prop::collection::vec(0.0f64..1.0, 1..60)) {
        let (salient, m) = threshold_split(&values);
        let count = salient.iter().filter(|&&s| s).count();
        prop_assert!(count <= values.len() / 2);
        for (s, v) in salient.iter().zip(&values) {
            prop_assert_eq!(*s, *v > m);
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        if sorted.len() == values.len() && values.len() % 2 == 0 {
            prop_assert_eq!(count, values.len() / 2);
        }
    }
}
