//! Training: cross-entropy loss, the cosine-warmup schedule, the Adam loop
//! over mini-batches, per-epoch evaluation, and history logging.
//!
//! Determinism contract: one root [`Rng`] seeded from the config drives
//! parameter initialization, epoch shuffles, and per-sample dropout sub-seeds
//! (drawn sequentially before the batch loop), and every reduction runs in a
//! fixed order — so a seed fixes the entire trajectory bitwise, whether or
//! not the data-parallel kernels are enabled.

pub mod adam;
pub mod checkpoint;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{ensure_scheme, load_checkpoint, save_checkpoint};

use crate::model::{cca, FusionKind, Graph, Mode, ModelConfig, ModelError, ModelParams};
use crate::preprocess::{BeatImage, ClassScheme, DatasetSplit, IMAGE_SIZE};
use crate::rng::Rng;
use crate::tensor::{Real, Tensor, TensorError};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Ridge used when refitting the CCA fusion between epochs.
const CCA_RIDGE: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error("class index {index} out of range for {classes} classes")]
    IndexOutOfRange { index: usize, classes: usize },
    #[error("the training split is empty")]
    EmptyDataset,
    #[error("checkpoint version mismatch: {0}")]
    VersionMismatch(String),
    #[error("checkpoint registry mismatch: {0}")]
    RegistryMismatch(String),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub scheme: ClassScheme,
    pub fusion: FusionKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub base_lr: f64,
    pub warmup_steps: usize,
    pub num_cycles: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub trunk_dropout: f64,
    pub head_dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            scheme: ClassScheme::Mitbih10,
            fusion: FusionKind::Sacc,
            batch_size: 32,
            epochs: 40,
            base_lr: 0.01,
            warmup_steps: 5,
            num_cycles: 0.5,
            seed: 257,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            trunk_dropout: 0.25,
            head_dropout: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::BadConfig("batch_size must be at least 1".into()));
        }
        if !(self.base_lr > 0.0) {
            return Err(TrainError::BadConfig(format!("base_lr {} must be positive", self.base_lr)));
        }
        if self.epochs == 0 {
            return Err(TrainError::BadConfig("epochs must be at least 1".into()));
        }
        if self.warmup_steps >= self.epochs {
            return Err(TrainError::BadConfig(format!(
                "warmup_steps {} must be below epochs {}",
                self.warmup_steps, self.epochs
            )));
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(TrainError::BadConfig(format!("{name} {v} outside [0, 1)")));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(TrainError::BadConfig("epsilon must be positive".into()));
        }
        for (name, v) in [("trunk_dropout", self.trunk_dropout), ("head_dropout", self.head_dropout)]
        {
            if !(0.0..1.0).contains(&v) {
                return Err(TrainError::BadConfig(format!("{name} {v} outside [0, 1)")));
            }
        }
        Ok(())
    }

    /// The network this configuration trains.
    pub fn model_config(&self) -> ModelConfig {
        let mut mc = ModelConfig::small(self.scheme, self.fusion);
        mc.trunk_dropout = self.trunk_dropout;
        mc.head_dropout = self.head_dropout;
        mc
    }
}

/// `-log(max(p_target, 1e-12))`: finite even for a dead softmax output.
pub fn cross_entropy<F: Real>(probabilities: &Tensor<F>, target: usize) -> Result<f64, TrainError> {
    let p = probabilities.data();
    if target >= p.len() {
        return Err(TrainError::IndexOutOfRange { index: target, classes: p.len() });
    }
    Ok(-p[target].as_f64().max(1e-12).ln())
}

/// Learning rate at epoch `t`: linear warmup over `warmup_steps` epochs
/// (relative to at least 5), then a cosine arc over the remaining epochs.
pub fn lr_at(t: usize, config: &TrainConfig) -> f64 {
    let warmup = config.warmup_steps;
    if t < warmup {
        return config.base_lr * t as f64 / warmup.max(5) as f64;
    }
    let span = (config.epochs - warmup) as f64;
    let progress = (t - warmup) as f64 / span;
    let arc = (std::f64::consts::PI * config.num_cycles * 2.0 * progress).cos();
    config.base_lr * 0.5 * (1.0 + arc)
}

/// One training example in tensor form.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub image: Tensor<f32>,
    pub meta: Tensor<f32>,
    pub label: usize,
}

impl Sample {
    pub fn from_beat(beat: &BeatImage) -> Sample {
        Sample {
            image: Tensor::new(vec![IMAGE_SIZE, IMAGE_SIZE, 1], beat.pixels.clone())
                .expect("beat images are IMAGE_SIZE squared"),
            meta: Tensor::new(vec![2], beat.meta_vector.to_vec()).expect("meta pair"),
            label: beat.label as usize,
        }
    }
}

/// One row per epoch.
#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub eval_loss: f64,
    pub eval_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub rows: Vec<HistoryRow>,
}

impl History {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,lr,train_loss,eval_loss,eval_accuracy\n");
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.epoch, r.lr, r.train_loss, r.eval_loss, r.eval_accuracy)
                .unwrap();
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), TrainError> {
        Ok(std::fs::write(path, self.to_csv())?)
    }
}

/// Mean cross-entropy and argmax accuracy over `samples` (inference mode).
/// An empty slice reports zeros.
pub fn evaluate(params: &ModelParams<f32>, samples: &[Sample]) -> Result<(f64, f64), TrainError> {
    if samples.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut loss = 0.0;
    let mut correct = 0usize;
    let mut rng = Rng::new(0); // inference consumes no randomness
    for sample in samples {
        let mut g = Graph::new(params, Mode::Infer);
        let img = g.input(sample.image.clone());
        let meta = g.input(sample.meta.clone());
        let out = g.forward(img, meta, &mut rng)?;
        let probs = g.value(out.probabilities);
        loss += cross_entropy(probs, sample.label)?;
        if argmax(probs.data()) == sample.label {
            correct += 1;
        }
    }
    let n = samples.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Index of the largest value; ties resolve to the earliest index.
pub fn argmax<F: Real>(values: &[F]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Trains the default network for the config on a dataset split.
pub fn fit(
    split: &DatasetSplit,
    config: &TrainConfig,
) -> Result<(ModelParams<f32>, History), TrainError> {
    let train: Vec<Sample> = split.train.iter().map(Sample::from_beat).collect();
    let test: Vec<Sample> = split.test.iter().map(Sample::from_beat).collect();
    fit_samples(&config.model_config(), &train, &test, config)
}

/// Training loop over explicit samples and an explicit network shape.
pub fn fit_samples(
    model_config: &ModelConfig,
    train: &[Sample],
    test: &[Sample],
    config: &TrainConfig,
) -> Result<(ModelParams<f32>, History), TrainError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let classes = model_config.num_classes();
    for sample in train.iter().chain(test) {
        if sample.label >= classes {
            return Err(TrainError::IndexOutOfRange { index: sample.label, classes });
        }
    }

    let mut rng = Rng::new(config.seed);
    let mut params = ModelParams::<f32>::build(model_config, &mut rng)?;
    let trainable: Vec<usize> = params
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, e)| e.trainable)
        .map(|(i, _)| i)
        .collect();
    let mut state = AdamState::<f32>::new(
        trainable.iter().map(|&i| params.entries()[i].tensor.len()).collect(),
    );

    let mut history = History::default();
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..config.epochs {
        let lr = lr_at(epoch, config);
        if model_config.fusion == FusionKind::Cca {
            refit_cca(&mut params, train)?;
        }
        rng.shuffle(&mut order);
        let dropout_seeds: Vec<u64> = (0..train.len()).map(|_| rng.next_u64()).collect();

        let mut epoch_loss = 0.0;
        let mut flat_pos = 0;
        for batch in order.chunks(config.batch_size) {
            let mut grads: Vec<Vec<f32>> =
                trainable.iter().map(|&i| vec![0.0; params.entries()[i].tensor.len()]).collect();
            for &sample_ix in batch {
                let sample = &train[sample_ix];
                let mut dropout_rng = Rng::new(dropout_seeds[flat_pos]);
                flat_pos += 1;
                let mut g = Graph::new(&params, Mode::Train);
                let img = g.input(sample.image.clone());
                let meta = g.input(sample.meta.clone());
                let out = g.forward(img, meta, &mut dropout_rng)?;
                let loss = g.nll_loss(out.probabilities, sample.label)?;
                epoch_loss += g.value(loss).data()[0] as f64;
                let mut sample_grads = g.backward(loss)?;
                for (slot, &entry_ix) in trainable.iter().enumerate() {
                    let id = g.param_ids()[entry_ix];
                    let gvec = sample_grads.take(id).expect("trainable gradient");
                    for (acc, gv) in grads[slot].iter_mut().zip(gvec) {
                        *acc += gv;
                    }
                }
            }
            let inv = 1.0 / batch.len() as f32;
            for arr in &mut grads {
                for v in arr.iter_mut() {
                    *v *= inv;
                }
            }
            let mut views: Vec<&mut [f32]> = params
                .entries_mut()
                .iter_mut()
                .filter(|e| e.trainable)
                .map(|e| e.tensor.data_mut())
                .collect();
            adam_step(&mut state, &mut views, &grads, lr, config)?;
        }

        let (eval_loss, eval_accuracy) = evaluate(&params, test)?;
        history.rows.push(HistoryRow {
            epoch,
            lr,
            train_loss: epoch_loss / train.len() as f64,
            eval_loss,
            eval_accuracy,
        });
    }
    Ok((params, history))
}

/// Refits the CCA fusion projections on the current trunk embeddings.
fn refit_cca(params: &mut ModelParams<f32>, train: &[Sample]) -> Result<(), TrainError> {
    let d1 = params.config().image_embedding_dim()?;
    let d2 = params.config().meta_embedding_dim();
    let n = train.len();
    let mut x = Vec::with_capacity(n * d1);
    let mut y = Vec::with_capacity(n * d2);
    let mut rng = Rng::new(0);
    for sample in train {
        let mut g = Graph::new(params, Mode::Infer);
        let img = g.input(sample.image.clone());
        let meta = g.input(sample.meta.clone());
        let f_img = g.trunk(img, &mut rng)?;
        let f_pat = g.meta(meta)?;
        x.extend(g.value(f_img).data().iter().map(|&v| v as f64));
        y.extend(g.value(f_pat).data().iter().map(|&v| v as f64));
    }
    let x = Tensor::new(vec![n, d1], x)?;
    let y = Tensor::new(vec![n, d2], y)?;
    let pairs = cca::cca_fit(&x, &y, CCA_RIDGE)?;
    cca::install_cca(params, &pairs)?;
    Ok(())
}
