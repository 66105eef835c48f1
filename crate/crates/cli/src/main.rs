//! `recg` — operator surface for the ECG beat classification pipeline.
//!
//! Five subcommands cover the full workflow: `preprocess` turns WFDB records
//! into a dataset cache, `train` fits a classifier and writes a checkpoint,
//! `eval` scores the held-out split (optionally dumping embeddings and
//! saliency maps), `predict` classifies one beat of one record, and `budget`
//! audits the model's parameter and FLOP counts.
//!
//! Exit codes are a stable contract: 0 success, 2 input error, 3
//! configuration error, 4 artifact mismatch.

mod config;

use clap::{Args, Parser, Subcommand};
use config::Resolved;
use recg_core::eval::{self, EvalError};
use recg_core::model::{count_flops, Graph, Mode, ModelConfig, ModelError};
use recg_core::preprocess::{
    self, cache::MANIFEST_FILE, BeatImage, CacheManifest, PreprocessError, IMAGE_SIZE,
};
use recg_core::rng::Rng;
use recg_core::tensor::Tensor;
use recg_core::train::{self, Sample, TrainError};
use recg_core::wfdb;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "recg", version, about = "ECG beat classification pipeline")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

/// Flag-level overrides, applied on top of the `--config` file.
#[derive(Args, Clone, Debug)]
pub struct Overrides {
    /// JSON configuration file (defaults apply when omitted).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Directory of WFDB records.
    #[arg(long, global = true, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Labeling scheme: mitbih10 or aami.
    #[arg(long, global = true, value_name = "NAME")]
    pub scheme: Option<String>,
    /// Fusion layer: concat, cca, or sacc.
    #[arg(long, global = true, value_name = "NAME")]
    pub fusion: Option<String>,
    /// Training epochs.
    #[arg(long, global = true, value_name = "N")]
    pub epochs: Option<usize>,
    /// Seed for initialization, shuffling, dropout, and the split.
    #[arg(long, global = true, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Artifact directory for checkpoints, reports, and dumps.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse WFDB records into beat images and write the dataset cache.
    Preprocess,
    /// Train a classifier from the dataset cache; writes checkpoint + history.
    Train,
    /// Score a checkpoint on the held-out split; writes the report JSON.
    Eval {
        /// Also write 2-D PCA coordinates and fused vectors of the test set.
        #[arg(long)]
        dump_embeddings: bool,
        /// Also write saliency-map pairs for the first N test beats, plus the
        /// stem feature maps of the first beat.
        #[arg(long, value_name = "N")]
        saliency: Option<usize>,
    },
    /// Classify one beat of one record with a trained checkpoint.
    Predict {
        /// Record stem inside the data directory (e.g. `100`).
        #[arg(long, value_name = "STEM")]
        record: String,
        /// Which beat of the record, counting scheme-labeled beats from 0.
        #[arg(long, value_name = "K")]
        beat_index: usize,
    },
    /// Print the per-layer parameter/MAC/FLOP audit of the configured model.
    Budget {
        /// Emit the audit as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

/// Subcommand failures, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Exit 2: missing or unreadable inputs (records, caches, indices).
    #[error("{0}")]
    Input(String),
    /// Exit 3: the configuration itself is invalid.
    #[error("{0}")]
    Config(String),
    /// Exit 4: artifacts disagree (checkpoint vs. data, corrupt files).
    #[error("{0}")]
    Artifact(String),
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
            CliError::Artifact(_) => 4,
        }
    }
}

fn model_error(e: &ModelError, text: String) -> CliError {
    match e {
        ModelError::BadConfig(_) => CliError::Config(text),
        _ => CliError::Artifact(text),
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> CliError {
        let text = e.to_string();
        model_error(&e, text)
    }
}

impl From<PreprocessError> for CliError {
    fn from(e: PreprocessError) -> CliError {
        match &e {
            PreprocessError::BadCache(_) => CliError::Artifact(e.to_string()),
            PreprocessError::InvalidWindow(_) => CliError::Config(e.to_string()),
            PreprocessError::EmptyDataset | PreprocessError::Io(_) => {
                CliError::Input(e.to_string())
            }
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> CliError {
        let text = e.to_string();
        match &e {
            TrainError::BadConfig(_) => CliError::Config(text),
            TrainError::VersionMismatch(_)
            | TrainError::RegistryMismatch(_)
            | TrainError::Corrupt(_)
            | TrainError::Tensor(_) => CliError::Artifact(text),
            TrainError::Model(m) => model_error(m, text),
            TrainError::EmptyDataset
            | TrainError::IndexOutOfRange { .. }
            | TrainError::Io(_) => CliError::Input(text),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        let text = e.to_string();
        match &e {
            EvalError::BadInput(_) | EvalError::Io(_) => CliError::Input(text),
            EvalError::Model(m) => model_error(m, text),
            _ => CliError::Artifact(text),
        }
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let resolved = config::resolve(&cli.overrides)?;
    match &cli.command {
        Command::Preprocess => cmd_preprocess(&resolved),
        Command::Train => cmd_train(&resolved),
        Command::Eval { dump_embeddings, saliency } => {
            cmd_eval(&resolved, *dump_embeddings, *saliency)
        }
        Command::Predict { record, beat_index } => cmd_predict(&resolved, record, *beat_index),
        Command::Budget { json } => cmd_budget(&resolved, *json),
    }
}

fn ensure_output_dir(r: &Resolved) -> Result<(), CliError> {
    std::fs::create_dir_all(&r.output_dir).map_err(|e| {
        CliError::Input(format!("cannot create output dir {}: {e}", r.output_dir.display()))
    })
}

fn cmd_preprocess(r: &Resolved) -> Result<(), CliError> {
    let entries = std::fs::read_dir(&r.data_dir).map_err(|e| {
        CliError::Input(format!("cannot read data dir {}: {e}", r.data_dir.display()))
    })?;
    let mut stems: Vec<String> = entries
        .filter_map(|entry| {
            let path = entry.ok()?.path();
            if path.extension().and_then(|s| s.to_str()) != Some("hea") {
                return None;
            }
            Some(path.file_stem()?.to_str()?.to_string())
        })
        .collect();
    stems.sort();
    if stems.is_empty() {
        return Err(CliError::Input(format!(
            "no .hea records in {}",
            r.data_dir.display()
        )));
    }

    let mut items = Vec::new();
    for stem in &stems {
        let record = wfdb::load_record(&r.data_dir.join(stem))
            .map_err(|e| CliError::Input(format!("record {stem}: {e}")))?;
        let beats = preprocess::preprocess_record(&record, &r.preprocess)?;
        println!("record {stem}: {} beats", beats.len());
        items.extend(beats);
    }
    if items.is_empty() {
        return Err(CliError::Input(format!(
            "no beats retained under scheme {}",
            r.scheme.name()
        )));
    }

    let manifest = CacheManifest::new(&r.preprocess, r.train.seed, &items);
    preprocess::save_dataset(&r.cache_dir, &manifest, &items)?;

    println!();
    println!("{:<8} {:>8}", "class", "count");
    for c in &manifest.counts {
        println!("{:<8} {:>8}", c.name, c.count);
    }
    println!("{:<8} {:>8}", "total", manifest.total);
    println!("cached {} beats in {}", manifest.total, r.cache_dir.display());
    Ok(())
}

fn load_cache(r: &Resolved) -> Result<(CacheManifest, Vec<BeatImage>), CliError> {
    if !r.cache_dir.join(MANIFEST_FILE).exists() {
        return Err(CliError::Input(format!(
            "no dataset cache in {} (run `recg preprocess` first)",
            r.cache_dir.display()
        )));
    }
    Ok(preprocess::load_dataset(&r.cache_dir)?)
}

fn load_checkpoint_at(
    path: &Path,
) -> Result<(recg_core::model::ModelParams<f32>, train::TrainConfig), CliError> {
    if !path.exists() {
        return Err(CliError::Input(format!(
            "no checkpoint at {} (run `recg train` first)",
            path.display()
        )));
    }
    Ok(train::load_checkpoint(path)?)
}

fn cmd_train(r: &Resolved) -> Result<(), CliError> {
    r.train.validate()?;
    let (manifest, items) = load_cache(r)?;
    if manifest.scheme != r.scheme {
        return Err(CliError::Artifact(format!(
            "cache in {} was built for scheme {}, configuration wants {}",
            r.cache_dir.display(),
            manifest.scheme.name(),
            r.scheme.name()
        )));
    }

    let split = preprocess::split(items, r.train_fraction, r.train.seed)?;
    println!(
        "training on {} beats, holding out {} (fusion {}, seed {})",
        split.train.len(),
        split.test.len(),
        r.fusion.name(),
        r.train.seed
    );
    let started = Instant::now();
    let (params, history) = train::fit(&split, &r.train)?;
    for row in &history.rows {
        println!(
            "epoch {:>3}  lr {:.6}  train_loss {:.4}  eval_loss {:.4}  eval_acc {:.4}",
            row.epoch, row.lr, row.train_loss, row.eval_loss, row.eval_accuracy
        );
    }

    ensure_output_dir(r)?;
    train::save_checkpoint(&params, &r.train, &r.checkpoint_path())?;
    history.write_csv(&r.history_path())?;
    let last = history.rows.last().expect("at least one epoch");
    println!(
        "final: eval_loss {:.4}, eval_accuracy {:.4} ({:.1}s)",
        last.eval_loss,
        last.eval_accuracy,
        started.elapsed().as_secs_f64()
    );
    println!("wrote {} and {}", r.checkpoint_path().display(), r.history_path().display());
    Ok(())
}

fn cmd_eval(r: &Resolved, dump_embeddings: bool, saliency_n: Option<usize>) -> Result<(), CliError> {
    let (manifest, items) = load_cache(r)?;
    let (params, stored) = load_checkpoint_at(&r.checkpoint_path())?;
    train::ensure_scheme(&params, manifest.scheme)?;

    // The held-out split is rebuilt from the seed the checkpoint was trained
    // with, so evaluation never sees training beats.
    let split = preprocess::split(items, r.train_fraction, stored.seed)?;
    let samples: Vec<Sample> = split.test.iter().map(Sample::from_beat).collect();
    if samples.is_empty() {
        return Err(CliError::Input(
            "the held-out split is empty; lower train_fraction".into(),
        ));
    }

    let report = eval::evaluate_report(&params, &samples)?;
    ensure_output_dir(r)?;
    std::fs::write(r.report_path(), report.to_json())
        .map_err(|e| CliError::Input(format!("cannot write report: {e}")))?;

    println!(
        "evaluated {} held-out beats (scheme {}, fusion {})",
        samples.len(),
        stored.scheme.name(),
        stored.fusion.name()
    );
    println!(
        "accuracy {:.4}  macro-precision {:.4}  macro-recall {:.4}  macro-f1 {:.4}",
        report.accuracy, report.macro_precision, report.macro_recall, report.macro_f1
    );
    println!("{:<8} {:>8} {:>10} {:>8} {:>8} {:>8}", "class", "support", "precision", "recall", "f1", "auc");
    for c in &report.per_class {
        let auc = c.auc.map_or("-".to_string(), |a| format!("{a:.4}"));
        println!(
            "{:<8} {:>8} {:>10.4} {:>8.4} {:>8.4} {:>8}",
            c.name, c.support, c.precision, c.recall, c.f1, auc
        );
    }
    for flag in &report.flags {
        println!("note: {flag}");
    }
    println!("wrote {}", r.report_path().display());

    if dump_embeddings {
        let dump = eval::embed(&params, &samples)?;
        let names = stored.scheme.class_names();
        let labels: Vec<String> = dump.labels.iter().map(|&l| names[l].to_string()).collect();
        let csv_path = r.output_dir.join("embeddings.csv");
        let bin_path = r.output_dir.join("embeddings.bin");
        eval::write_embeddings_csv(&csv_path, &labels, &dump.coordinates)?;
        eval::write_vector_sidecar(&bin_path, &dump.post_fusion)?;
        println!(
            "wrote {} and {} ({} vectors)",
            csv_path.display(),
            bin_path.display(),
            dump.labels.len()
        );
    }

    if let Some(n) = saliency_n {
        let n = n.min(samples.len());
        let images: Vec<&Tensor<f32>> = samples.iter().map(|s| &s.image).collect();
        let labels: Vec<usize> = samples.iter().map(|s| s.label).collect();
        let probe = eval::fit_probe(&params, &images, &labels)?;

        let sal_dir = r.output_dir.join("saliency");
        std::fs::create_dir_all(&sal_dir)
            .map_err(|e| CliError::Input(format!("cannot create {}: {e}", sal_dir.display())))?;
        for (i, sample) in samples.iter().take(n).enumerate() {
            let maps = eval::saliency(&params, &probe, &sample.image, &sample.meta, sample.label)?;
            let before = sal_dir.join(format!("beat{i:03}_class{}_before.pgm", sample.label));
            let after = sal_dir.join(format!("beat{i:03}_class{}_after.pgm", sample.label));
            eval::write_pgm(&before, &maps.before_fusion)?;
            eval::write_pgm(&after, &maps.after_fusion)?;
        }

        let fm_dir = r.output_dir.join("featuremaps");
        std::fs::create_dir_all(&fm_dir)
            .map_err(|e| CliError::Input(format!("cannot create {}: {e}", fm_dir.display())))?;
        let maps = eval::feature_map_dump(&params, &samples[0].image)?;
        let mut written = 0;
        for (branch, channel_maps) in [("k3", &maps.kernel3), ("k5", &maps.kernel5)] {
            for (c, map) in channel_maps.iter().enumerate() {
                let scaled = max_normalize(map);
                eval::write_pgm(&fm_dir.join(format!("{branch}_{c:02}.pgm")), &scaled)?;
                written += 1;
            }
        }
        println!(
            "wrote {n} saliency pairs to {} and {written} feature maps to {}",
            sal_dir.display(),
            fm_dir.display()
        );
    }
    Ok(())
}

/// Scales a map so its maximum is 1 (identity for all-zero maps); PGM output
/// quantizes [0, 1].
fn max_normalize(map: &Tensor<f32>) -> Tensor<f32> {
    let max = map.data().iter().cloned().fold(0.0f32, f32::max);
    if max <= 0.0 {
        return map.clone();
    }
    Tensor::new(map.shape().to_vec(), map.data().iter().map(|&v| v / max).collect())
        .expect("same shape, same length")
}

fn cmd_predict(r: &Resolved, record_stem: &str, beat_index: usize) -> Result<(), CliError> {
    let (params, stored) = load_checkpoint_at(&r.checkpoint_path())?;
    let record = wfdb::load_record(&r.data_dir.join(record_stem))
        .map_err(|e| CliError::Input(format!("record {record_stem}: {e}")))?;

    // The checkpoint defines the classes, so its scheme drives segmentation.
    let mut pp = r.preprocess;
    pp.scheme = stored.scheme;
    let beats = preprocess::preprocess_beats(&record, &pp)?;
    let beat = beats.get(beat_index).ok_or_else(|| {
        CliError::Input(format!(
            "beat index {beat_index} out of range: record {record_stem} has {} beats under scheme {}",
            beats.len(),
            stored.scheme.name()
        ))
    })?;

    let image = Tensor::new(
        vec![IMAGE_SIZE, IMAGE_SIZE, 1],
        preprocess::rasterize_pixels(&beat.samples),
    )
    .expect("raster is IMAGE_SIZE squared");
    let meta = Tensor::new(vec![2], preprocess::encode_meta(&beat.meta).to_vec()).expect("meta pair");

    let mut rng = Rng::new(0); // inference consumes no randomness
    let mut g = Graph::new(&params, Mode::Infer);
    let img = g.input(image);
    let m = g.input(meta);
    let out = g.forward(img, m, &mut rng)?;
    let probs = g.value(out.probabilities).data();
    let class = train::argmax(probs);
    let names = stored.scheme.class_names();

    let line = serde_json::json!({
        "record": record_stem,
        "beat_index": beat_index,
        "annotated_symbol": beat.symbol.to_string(),
        "class": names[class],
        "probabilities": probs.iter().map(|&p| p as f64).collect::<Vec<f64>>(),
    });
    println!("{line}");
    Ok(())
}

fn cmd_budget(r: &Resolved, json: bool) -> Result<(), CliError> {
    let config = ModelConfig::small(r.scheme, r.fusion);
    let report = count_flops(&config)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("budget serializes"));
        return Ok(());
    }
    println!("model: scheme {}, fusion {}", r.scheme.name(), r.fusion.name());
    println!("{:<22} {:>10} {:>14} {:>14}", "layer", "params", "macs", "flops");
    for l in &report.layers {
        println!("{:<22} {:>10} {:>14} {:>14}", l.name, l.params, l.macs, 2 * l.macs);
    }
    println!(
        "{:<22} {:>10} {:>14} {:>14}",
        "total", report.total_params, report.total_macs, report.total_flops
    );
    Ok(())
}
