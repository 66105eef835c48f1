//! End-to-end ECG beat classification.
//!
//! The crate covers the full pipeline:
//!
//! * [`wfdb`] — readers (and writer utilities) for WFDB-style records:
//!   `.hea` headers, format-212 `.dat` signals, `.atr` annotations.
//! * [`preprocess`] — beat extraction: Hann smoothing, R-peak centred
//!   segmentation, 128×128 rasterization, patient-metadata encoding,
//!   class mapping and the train/test split, plus the on-disk beat cache.
//! * [`tensor`] — a small dense tensor type with a reverse-mode
//!   differentiation tape; just enough ops for the model here.
//! * [`model`] — the network: a dual-path convolution stem, a
//!   depthwise-separable trunk, a patient-metadata branch and one of three
//!   fusion strategies (feature concatenation, canonical correlation
//!   analysis, or a cross-modal attention block), followed by a dense
//!   classifier. Includes a parameter/FLOPs auditor.
//! * [`train`] — Adam, a warmup + cosine learning-rate schedule,
//!   cross-entropy, the training loop, checkpoints and history.
//! * [`eval`] — confusion matrix, precision/recall/F1, one-vs-rest ROC-AUC,
//!   a 2-component PCA for embedding plots, input-gradient saliency maps and
//!   feature-map dumps.
//!
//! Heavy loops run through [`exec`], which picks rayon when the `parallel`
//! feature is enabled (the default) and plain iteration otherwise. Both
//! strategies produce bitwise-identical results: parallel kernels are
//! gather-form (each output element is written by exactly one task, with the
//! same inner summation order as the sequential path) and reductions fold in
//! a fixed order. Random streams come from the seedable [`rng::Rng`], so a
//! given seed reproduces a run exactly, regardless of thread count.

pub mod eval;
pub mod exec;
pub mod model;
pub mod preprocess;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod wfdb;
