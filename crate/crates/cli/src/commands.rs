use std::path::{Path, PathBuf};

use freqmask::evaluate::{
    easy_peasi, explain_all, lambda_sweep, loso_study, removal_feed_in, removal_feed_in_instances,
    removal_for_map, save_report, spaced, threshold_split, LosoConfig, ReportMetadata,
};
use freqmask::explainer::{group_saliency, load_maps, save_maps, save_trace, ExplainerConfig};
use freqmask::models::{build_model, load_model, save_model, train_model, Architecture, ModelConfig, TrainConfig};
use freqmask::spectral::make_partition;
use freqmask::synth::{compute_clusters, generate_dataset, read_dataset, write_dataset, Dataset, Epoch, SynthConfig};
use freqmask::textio;
use serde::Serialize;

use crate::args::*;
use crate::config::echo;
use crate::error::CliError;
use crate::pgm;

type Result<T> = std::result::Result<T, CliError>;

/// Writes the resolved config and returns its hash.
fn record_config<T: Serialize>(dir: &Path, command: &str, args: &T) -> Result<String> {
    let text = echo(command, args);
    textio::write_text(&dir.join("run_config.txt"), &text)?;
    Ok(textio::short_hash(&text))
}

fn explainer_config(m: &MaskFlags) -> Result<ExplainerConfig> {
    let cfg = ExplainerConfig {
        lambda: m.lambda,
        learning_rate: m.lr,
        max_epochs: m.epochs,
        patience: m.patience,
        num_bands: m.bands,
        regularizers_enabled: !m.no_regularizers,
        one_branch_mode: m.one_branch,
        ..ExplainerConfig::default()
    };
    cfg.validate()?;
    Ok(cfg)
}

fn selection(dataset: &Dataset, limit: Option<usize>) -> Result<Vec<&Epoch>> {
    if limit == Some(0) || dataset.epochs.is_empty() {
        return Err(CliError::Usage("nothing to explain: 0 epochs selected".into()));
    }
    let all: Vec<&Epoch> = dataset.epochs.iter().collect();
    Ok(spaced(&all, limit))
}

fn arch(name: &str) -> Result<Architecture> {
    name.parse().map_err(|e: freqmask::Error| CliError::Usage(e.to_string()))
}

pub fn generate(a: &GenerateArgs) -> Result<()> {
    if a.subjects < 2 {
        return Err(CliError::Usage(format!(
            "--subjects must be at least 2 for leave-one-subject-out, got {}",
            a.subjects
        )));
    }
    let config = SynthConfig {
        channels: a.channels,
        n_subjects: a.subjects,
        epochs_per_subject_per_class: a.per_class,
        num_bands: a.bands,
        informative_channels: (0..(a.channels / 2).max(1)).collect(),
        ..SynthConfig::default()
    };
    let ds = generate_dataset(a.common.seed, &config)?;
    let dir = &a.common.out_dir;
    record_config(dir, "generate", a)?;
    let path = dir.join("dataset.jsonl");
    write_dataset(&path, &ds)?;
    let class1 = ds.epochs.iter().filter(|e| e.label == 1).count();
    println!(
        "wrote {}: {} subjects, {} epochs ({} class 0, {} class 1), {} channels x {} samples",
        path.display(),
        config.n_subjects,
        ds.epochs.len(),
        ds.epochs.len() - class1,
        class1,
        config.channels,
        config.samples()
    );
    Ok(())
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let ds = read_dataset(&a.dataset)?;
    let first = ds.epochs.first().ok_or_else(|| CliError::Usage("dataset has no epochs".into()))?;
    let cfg = match arch(&a.arch)? {
        Architecture::MiniCnn => ModelConfig::mini_cnn(first.channels, first.samples, a.common.seed),
        Architecture::Mlp => ModelConfig::mlp(first.channels, first.samples, a.common.seed),
    };
    let mut model = build_model(&cfg)?;
    let epochs: Vec<&Epoch> = ds.epochs.iter().collect();
    train_model(
        &mut model,
        &epochs,
        None,
        &TrainConfig {
            epochs: a.epochs,
            learning_rate: a.lr,
        },
    )?;
    let dir = &a.common.out_dir;
    record_config(dir, "train", a)?;
    let path = dir.join("model.json");
    save_model(&path, &model)?;
    println!(
        "wrote {}: {} parameters, train accuracy {:.4}",
        path.display(),
        cfg.parameter_count(),
        model.meta.train_accuracy.unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn explain(a: &ExplainArgs) -> Result<()> {
    let cfg = explainer_config(&a.mask)?;
    let ds = read_dataset(&a.dataset)?;
    let model = load_model(&a.model)?;
    let chosen = selection(&ds, a.mask.limit)?;
    let all: Vec<&Epoch> = ds.epochs.iter().collect();
    let clusters = compute_clusters(&all)?;
    let dir = &a.common.out_dir;
    record_config(dir, "explain", a)?;

    let explanations = explain_all(&model, &chosen, &clusters, &cfg, a.common.seed)?;
    let maps: Vec<_> = explanations.iter().map(|e| e.map.clone()).collect();
    let group = group_saliency(&maps)?;
    save_maps(&dir.join("maps.jsonl"), &maps)?;
    save_maps(&dir.join("group_map.jsonl"), std::slice::from_ref(&group))?;
    save_trace(&dir.join("traces.jsonl"), &explanations)?;
    println!("explained {} epochs into {}", maps.len(), dir.display());
    Ok(())
}

fn write_report(dir: &Path, stem: &str, meta: &ReportMetadata) -> Result<PathBuf> {
    let csv = dir.join(format!("{stem}.csv"));
    save_report(&csv, &dir.join(format!("{stem}.json")), meta)?;
    Ok(csv)
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let ds = read_dataset(&a.dataset)?;
    let model = load_model(&a.model)?;
    let maps = load_maps(&a.map)?;
    let map = maps
        .first()
        .ok_or_else(|| CliError::Usage(format!("{} holds no saliency map", a.map.display())))?;
    let all: Vec<&Epoch> = ds.epochs.iter().collect();
    let partition = make_partition(all[0].samples, map.bands)?;
    let dir = &a.common.out_dir;
    let hash = record_config(dir, "evaluate", a)?;
    let report = removal_for_map(&model, &all, map, &partition)?;
    let (salient, _) = threshold_split(&map.values);
    let csv = write_report(
        dir,
        "report",
        &ReportMetadata {
            report: report.clone(),
            seed: a.common.seed,
            config_hash: hash.clone(),
            salient_cells: salient,
        },
    )?;
    println!(
        "Ori {:.4}  RN {:.4}  RS {:.4}  -> {}",
        report.accuracy_original,
        report.accuracy_remove_nonsalient,
        report.accuracy_remove_salient,
        csv.display()
    );
    if let Some(path) = &a.instance_maps {
        let maps = load_maps(path)?;
        let epochs = maps
            .iter()
            .map(|m| {
                let id = m.epoch_ids.first().copied().unwrap_or(usize::MAX);
                ds.epochs
                    .iter()
                    .find(|e| e.id == id)
                    .ok_or_else(|| CliError::Io(format!("{}: epoch {id} not in the dataset", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        if epochs.is_empty() {
            return Err(CliError::Usage(format!("{} holds no maps", path.display())));
        }
        let inst = removal_feed_in_instances(&model, &epochs, &maps, &partition)?;
        let csv = write_report(
            dir,
            "instance_report",
            &ReportMetadata {
                report: inst.clone(),
                seed: a.common.seed,
                config_hash: hash,
                salient_cells: Vec::new(),
            },
        )?;
        println!(
            "instance level: Ori {:.4}  RN {:.4}  RS {:.4}  -> {}",
            inst.accuracy_original,
            inst.accuracy_remove_nonsalient,
            inst.accuracy_remove_salient,
            csv.display()
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct BaselineRecord {
    channels: usize,
    bands: usize,
    drops: Vec<f64>,
    seed: u64,
    config_hash: String,
}

pub fn baseline(a: &BaselineArgs) -> Result<()> {
    let ds = read_dataset(&a.dataset)?;
    let model = load_model(&a.model)?;
    let all: Vec<&Epoch> = ds.epochs.iter().collect();
    let partition = make_partition(all[0].samples, a.bands)?;
    let dir = &a.common.out_dir;
    let hash = record_config(dir, "baseline", a)?;
    let drops = easy_peasi(&model, &all, &partition, a.common.seed)?;
    textio::write_record(
        &dir.join("baseline.jsonl"),
        &BaselineRecord {
            channels: all[0].channels,
            bands: a.bands,
            drops: drops.clone(),
            seed: a.common.seed,
            config_hash: hash.clone(),
        },
    )?;
    let (salient, _) = threshold_split(&drops);
    let report = removal_feed_in(&model, &all, &salient, &partition)?;
    write_report(
        dir,
        "baseline_report",
        &ReportMetadata {
            report: report.clone(),
            seed: a.common.seed,
            config_hash: hash,
            salient_cells: salient,
        },
    )?;
    println!(
        "baseline split: Ori {:.4}  RN {:.4}  RS {:.4}",
        report.accuracy_original, report.accuracy_remove_nonsalient, report.accuracy_remove_salient
    );
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    if a.lambdas.is_empty() {
        return Err(CliError::Usage("--lambdas needs at least one value".into()));
    }
    let cfg = explainer_config(&a.mask)?;
    let ds = read_dataset(&a.dataset)?;
    let model = load_model(&a.model)?;
    let chosen = selection(&ds, a.mask.limit)?;
    let all: Vec<&Epoch> = ds.epochs.iter().collect();
    let clusters = compute_clusters(&all)?;
    let dir = &a.common.out_dir;
    let hash = record_config(dir, "sweep", a)?;
    let rows = lambda_sweep(&model, &chosen, &all, &clusters, &a.lambdas, &cfg, a.common.seed)?;
    let mut csv = String::from("lambda,kde,rs_drop,rn_drop,accuracy_original,accuracy_remove_nonsalient,accuracy_remove_salient,n_epochs,seed,config_hash\n");
    for r in &rows {
        csv.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{}\n",
            r.lambda,
            r.kde,
            r.rs_drop,
            r.rn_drop,
            r.report.accuracy_original,
            r.report.accuracy_remove_nonsalient,
            r.report.accuracy_remove_salient,
            r.report.n_epochs,
            a.common.seed,
            hash
        ));
        println!("lambda {:<8} KDE {:>12.4}  RS drop {:.4}", r.lambda, r.kde, r.rs_drop);
    }
    textio::write_text(&dir.join("sweep.csv"), &csv)?;
    Ok(())
}

pub fn loso(a: &LosoArgs) -> Result<()> {
    if a.mask.limit == Some(0) {
        return Err(CliError::Usage("nothing to explain: 0 epochs selected".into()));
    }
    let explainer = explainer_config(&a.mask)?;
    let ds = read_dataset(&a.dataset)?;
    let first = ds.epochs.first().ok_or_else(|| CliError::Usage("dataset has no epochs".into()))?;
    let model = match arch(&a.arch)? {
        Architecture::MiniCnn => ModelConfig::mini_cnn(first.channels, first.samples, a.common.seed),
        Architecture::Mlp => ModelConfig::mlp(first.channels, first.samples, a.common.seed),
    };
    let dir = &a.common.out_dir;
    let hash = record_config(dir, "loso", a)?;
    let report = loso_study(
        &ds.epochs,
        &LosoConfig {
            model,
            train: TrainConfig {
                epochs: a.train_epochs,
                learning_rate: a.train_lr,
            },
            explainer,
            max_explained: a.mask.limit,
            seed: a.common.seed,
        },
    )?;
    let mut csv = String::from("held_out_subject,accuracy_original,accuracy_remove_nonsalient,accuracy_remove_salient,n_epochs,seed,config_hash\n");
    for f in &report.folds {
        let r = &f.report;
        csv.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{},{},{}\n",
            f.held_out_subject,
            r.accuracy_original,
            r.accuracy_remove_nonsalient,
            r.accuracy_remove_salient,
            r.n_epochs,
            a.common.seed,
            hash
        ));
        println!(
            "held out {}: Ori {:.4}  RN {:.4}  RS {:.4}",
            f.held_out_subject, r.accuracy_original, r.accuracy_remove_nonsalient, r.accuracy_remove_salient
        );
    }
    textio::write_text(&dir.join("loso.csv"), &csv)?;
    let maps: Vec<_> = report.folds.iter().map(|f| f.map.clone()).collect();
    save_maps(&dir.join("loso_maps.jsonl"), &maps)?;
    save_maps(&dir.join("unseen_map.jsonl"), std::slice::from_ref(&report.unseen_map))?;
    Ok(())
}

pub fn render(a: &RenderArgs) -> Result<()> {
    let maps = load_maps(&a.map)?;
    let map = maps.get(a.index).ok_or_else(|| {
        CliError::Usage(format!("{} holds {} maps, no index {}", a.map.display(), maps.len(), a.index))
    })?;
    let text = pgm::encode(map.channels, map.bands, &map.values);
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        record_config(dir, "render", a)?;
    }
    textio::write_text(&a.out, &text)?;
    println!("wrote {} ({} x {})", a.out.display(), map.bands, map.channels);
    Ok(())
}
