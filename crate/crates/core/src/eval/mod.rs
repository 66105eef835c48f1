//! Evaluation: per-class metrics, ROC-AUC, PCA embedding exports, saliency
//! maps and stem feature-map dumps.
//!
//! Everything here is pure given the trained parameters: inference consumes
//! no randomness, so the same checkpoint and samples always produce the same
//! report, maps and coordinates.

pub mod artifacts;
pub mod metrics;
pub mod pca;
pub mod saliency;

pub use artifacts::{embed, write_embeddings_csv, write_pgm, write_vector_sidecar, EmbeddingDump};
pub use metrics::{precision_recall_f1, roc_auc_ovr, ClassMetrics, ClassScore, ConfusionMatrix};
pub use pca::{pca2, Pca2};
pub use saliency::{
    feature_map_dump, fit_logistic, fit_probe, logit_input_gradient, probe_input_gradient,
    saliency, FeatureMaps, Probe, SaliencyMaps,
};

use crate::model::ModelError;
use crate::model::{Graph, Mode};
use crate::rng::Rng;
use crate::tensor::TensorError;
use crate::train::{argmax, Sample};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("class index {index} out of range for {classes} classes")]
    IndexOutOfRange { index: usize, classes: usize },
    #[error("class {0} needs at least one positive and one negative sample")]
    DegenerateClass(usize),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One class's row in the report.
#[derive(Clone, Debug, Serialize)]
pub struct ClassReport {
    pub name: String,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// One-vs-rest ROC-AUC; `None` when the class is degenerate in the
    /// evaluated set (no positives or no negatives).
    pub auc: Option<f64>,
}

/// The full metrics report, serialized to JSON by the CLI.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassReport>,
    /// Count matrix, rows = true labels, columns = predictions.
    pub confusion: Vec<Vec<usize>>,
    /// Zero-division conventions and degenerate classes encountered.
    pub flags: Vec<String>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Runs the model over `samples` in inference mode and assembles the report:
/// confusion matrix, per-class precision/recall/F1 (+ macro averages and
/// accuracy) and per-class one-vs-rest ROC-AUC.
pub fn evaluate_report(
    params: &crate::model::ModelParams<f32>,
    samples: &[Sample],
) -> Result<Report, EvalError> {
    if samples.is_empty() {
        return Err(EvalError::BadInput("no samples to evaluate".into()));
    }
    let classes = params.config().scheme.class_names();
    let mut rng = Rng::new(0); // inference consumes no randomness
    let mut scores: Vec<Vec<f64>> = Vec::with_capacity(samples.len());
    let mut predictions = Vec::with_capacity(samples.len());
    let mut labels = Vec::with_capacity(samples.len());
    for sample in samples {
        let mut g = Graph::new(params, Mode::Infer);
        let img = g.input(sample.image.clone());
        let meta = g.input(sample.meta.clone());
        let out = g.forward(img, meta, &mut rng)?;
        let probs: Vec<f64> =
            g.value(out.probabilities).data().iter().map(|&p| p as f64).collect();
        predictions.push(argmax(&probs));
        labels.push(sample.label);
        scores.push(probs);
    }

    let cm = ConfusionMatrix::from_pairs(&predictions, &labels, classes)?;
    let m = precision_recall_f1(&cm);
    let mut flags = m.flags.clone();
    let mut per_class = Vec::with_capacity(classes.len());
    for (c, score) in m.per_class.iter().enumerate() {
        let auc = match roc_auc_ovr(&scores, &labels, c) {
            Ok(v) => Some(v),
            Err(EvalError::DegenerateClass(_)) => {
                flags.push(format!(
                    "class {}: ROC-AUC undefined (needs positives and negatives), omitted",
                    score.name
                ));
                None
            }
            Err(e) => return Err(e),
        };
        per_class.push(ClassReport {
            name: score.name.clone(),
            support: score.support,
            precision: score.precision,
            recall: score.recall,
            f1: score.f1,
            auc,
        });
    }
    Ok(Report {
        accuracy: m.accuracy,
        macro_precision: m.macro_precision,
        macro_recall: m.macro_recall,
        macro_f1: m.macro_f1,
        per_class,
        confusion: cm.counts().to_vec(),
        flags,
    })
}
