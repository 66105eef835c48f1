//! Readers for PhysioNet-style WFDB records.
//!
//! A record is a filesystem stem with up to three companions: `stem.hea`
//! (ASCII header), `stem.dat` (format-212 signal binary) and `stem.atr`
//! (MIT annotation binary, optional). Only signal format 212 — two 12-bit
//! two's-complement samples packed per three bytes — is supported; that is
//! the format the public arrhythmia databases ship.
//!
//! Parsing is bit-exact and lossless: samples stay raw ADC integers
//! ([`EcgRecord::millivolts`] converts on demand), header comments are kept
//! verbatim. Encoder counterparts ([`signal::encode_format212`],
//! [`annotations::encode_annotations`], [`header::write_header`]) exist so
//! tests can round-trip synthetic records through real files.

pub mod annotations;
pub mod header;
pub mod signal;

pub use annotations::{encode_annotations, parse_annotations};
pub use header::{parse_header, parse_patient_meta, write_header};
pub use signal::{decode_format212, encode_format212};

use std::fmt;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum WfdbError {
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported signal format {0} (only 212)")]
    UnsupportedFormat(u32),
    #[error("truncated signal: needed {expected} bytes, got {got}")]
    TruncatedSignal { expected: usize, got: usize },
    #[error("malformed annotation stream: {0}")]
    MalformedAnnotation(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Parsed `.hea` contents.
#[derive(Clone, Debug, PartialEq)]
pub struct RecordHeader {
    pub record_name: String,
    pub num_signals: usize,
    pub sampling_frequency: f64,
    /// Declared sample count per signal; 0 means unknown (inferred from the
    /// data file on load).
    pub num_samples: usize,
    pub signals: Vec<SignalSpec>,
    /// Comment lines, verbatim including the leading `#`.
    pub comments: Vec<String>,
}

/// One signal line of the header.
#[derive(Clone, Debug, PartialEq)]
pub struct SignalSpec {
    pub file_name: String,
    pub format_code: u32,
    /// ADC units per millivolt.
    pub gain: f64,
    /// ADC value corresponding to 0 mV.
    pub baseline: i32,
    pub description: String,
}

/// One beat annotation with its absolute sample position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Annotation {
    pub sample_index: usize,
    pub symbol: char,
    pub channel: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sex {
    Male,
    Female,
    Unknown,
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::Male => "male",
            Sex::Female => "female",
            Sex::Unknown => "unknown",
        })
    }
}

/// Age and sex pulled from the header comments.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatientMeta {
    pub age: Option<u32>,
    pub sex: Sex,
}

impl PatientMeta {
    pub const UNKNOWN: PatientMeta = PatientMeta { age: None, sex: Sex::Unknown };
}

/// A fully loaded record.
#[derive(Clone, Debug)]
pub struct EcgRecord {
    pub header: RecordHeader,
    /// Channel-interleaved samples, row `i` holding one value per signal.
    /// Length `num_samples * num_signals`.
    pub samples: Vec<i16>,
    pub annotations: Vec<Annotation>,
    pub meta: PatientMeta,
}

impl EcgRecord {
    /// Rows in the sample matrix (samples per signal).
    pub fn num_samples(&self) -> usize {
        if self.header.num_signals == 0 {
            0
        } else {
            self.samples.len() / self.header.num_signals
        }
    }

    pub fn sample(&self, index: usize, channel: usize) -> i16 {
        self.samples[index * self.header.num_signals + channel]
    }

    /// One channel converted to millivolts: `(adc − baseline) / gain`.
    pub fn millivolts(&self, channel: usize) -> Vec<f64> {
        let spec = &self.header.signals[channel];
        // WFDB convention: a recorded gain of 0 means "assume 200".
        let gain = if spec.gain == 0.0 { 200.0 } else { spec.gain };
        let baseline = spec.baseline as f64;
        let ns = self.header.num_signals;
        (0..self.num_samples())
            .map(|i| (self.samples[i * ns + channel] as f64 - baseline) / gain)
            .collect()
    }
}

/// Loads `stem.hea` + `stem.dat` (+ `stem.atr` when present) into an
/// [`EcgRecord`], validating the record invariants.
pub fn load_record(path_base: &Path) -> Result<EcgRecord, WfdbError> {
    let hea = std::fs::read_to_string(path_base.with_extension("hea"))?;
    let header = parse_header(&hea)?;
    let dat = std::fs::read(path_base.with_extension("dat"))?;
    let num_samples = if header.num_samples > 0 {
        header.num_samples
    } else {
        // Unknown length: as many whole interleaved rows as the file holds.
        (dat.len() / 3) * 2 / header.num_signals
    };
    let samples = decode_format212(&dat, num_samples, header.num_signals)?;

    let atr_path = path_base.with_extension("atr");
    let annotations = if atr_path.exists() {
        let bytes = std::fs::read(&atr_path)?;
        let anns = parse_annotations(&bytes)?;
        for pair in anns.windows(2) {
            if pair[1].sample_index < pair[0].sample_index {
                return Err(WfdbError::MalformedAnnotation(format!(
                    "sample indices decrease: {} after {}",
                    pair[1].sample_index, pair[0].sample_index
                )));
            }
        }
        if let Some(last) = anns.last() {
            if last.sample_index >= num_samples {
                return Err(WfdbError::MalformedAnnotation(format!(
                    "annotation at {} beyond record length {}",
                    last.sample_index, num_samples
                )));
            }
        }
        anns
    } else {
        Vec::new()
    };

    let mut header = header;
    header.num_samples = num_samples;
    let meta = parse_patient_meta(&header.comments);
    Ok(EcgRecord { header, samples, annotations, meta })
}
