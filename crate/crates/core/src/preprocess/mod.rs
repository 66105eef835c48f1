//! From raw records to model-ready samples.
//!
//! The pipeline order is fixed: smooth the whole millivolt trace, cut one
//! window per annotated beat, zero-mean each window, then draw it as a
//! 128×128 binary image. Patient age/sex ride along as a two-value vector.
//!
//! [`preprocess_record`] runs that chain for one record; [`cache`] persists
//! the results so training never re-parses signal files.

pub mod cache;
pub mod filter;
pub mod labels;
pub mod raster;
pub mod segment;
pub mod split;

pub use cache::{load_dataset, save_dataset, CacheManifest, ClassCount};
pub use filter::{baseline_correct, hann_coefficients, smooth};
pub use labels::{encode_meta, ClassScheme};
pub use raster::{rasterize, rasterize_pixels};
pub use segment::segment;
pub use split::{split, DatasetSplit};

use crate::wfdb::{EcgRecord, PatientMeta};
use serde::{Deserialize, Serialize};

/// Side length of the rasterized beat image.
pub const IMAGE_SIZE: usize = 128;
/// Pixels per image.
pub const IMAGE_PIXELS: usize = IMAGE_SIZE * IMAGE_SIZE;

#[derive(Debug, thiserror::Error)]
pub enum PreprocessError {
    #[error("invalid smoothing window: {0}")]
    InvalidWindow(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("cache: {0}")]
    BadCache(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// One segmented heartbeat, still as a waveform.
#[derive(Clone, Debug)]
pub struct Beat {
    /// Millivolt samples, exactly `2 * delta_n` of them (edge-padded at
    /// record boundaries).
    pub samples: Vec<f64>,
    pub record_id: String,
    pub r_peak_index: usize,
    pub symbol: char,
    pub meta: PatientMeta,
}

/// A beat rendered for the model: binary image, class label, encoded
/// metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct BeatImage {
    /// `IMAGE_SIZE`² values in {0.0, 1.0}, row-major, row 0 at the beat's
    /// amplitude minimum.
    pub pixels: Vec<f32>,
    pub label: u16,
    /// Encoded (age, sex).
    pub meta_vector: [f32; 2],
}

/// Everything that parameterizes preprocessing; recorded in the dataset
/// cache manifest so downstream stages can verify what they consume.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub scheme: ClassScheme,
    /// Half-window, in samples: a beat covers `[R - delta_n, R + delta_n)`.
    pub delta_n: usize,
    /// Hann window length N (N+1 taps).
    pub smoothing_window: usize,
    /// Which signal of each record to read.
    pub channel: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            scheme: ClassScheme::Mitbih10,
            delta_n: 128,
            smoothing_window: 14,
            channel: 0,
        }
    }
}

/// Full per-record chain: smooth → segment → baseline-correct → rasterize.
pub fn preprocess_record(
    record: &EcgRecord,
    config: &PreprocessConfig,
) -> Result<Vec<BeatImage>, PreprocessError> {
    Ok(preprocess_beats(record, config)?
        .iter()
        .filter_map(|beat| rasterize(beat, config.scheme))
        .collect())
}

/// Like [`preprocess_record`] but stops before rasterization; used where the
/// waveform itself is wanted (single-beat prediction, inspection).
pub fn preprocess_beats(
    record: &EcgRecord,
    config: &PreprocessConfig,
) -> Result<Vec<Beat>, PreprocessError> {
    let millivolts = record.millivolts(config.channel);
    let smoothed = smooth(&millivolts, config.smoothing_window)?;
    let mut beats = segment(
        &smoothed,
        &record.annotations,
        config.scheme,
        config.delta_n,
        &record.header.record_name,
        record.meta,
    );
    for beat in &mut beats {
        beat.samples = baseline_correct(&beat.samples);
    }
    Ok(beats)
}
