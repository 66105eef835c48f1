//! Synthetic ECG corpora for tests and benchmarks.
//!
//! Generates WFDB records (header, format-212 signal, annotations) whose
//! beats follow stylized per-class morphologies: distinct enough that a
//! classifier can separate them, jittered enough (amplitude, width, timing,
//! baseline wander, additive noise) that it has to generalize. Everything is
//! seeded, so a given [`CorpusConfig`] always produces byte-identical files.
//!
//! The waveforms are cartoons of the real beat classes — a sharp narrow R
//! wave for normal beats, broad notched complexes for the bundle-branch
//! blocks, a wide high-amplitude complex for ventricular ectopy, a pacing
//! spike followed by a deep deflection for paced beats — not physiological
//! simulations.

use recg_core::rng::Rng;
use recg_core::wfdb::{
    encode_annotations, encode_format212, write_header, Annotation, EcgRecord, PatientMeta,
    RecordHeader, Sex, SignalSpec,
};
use std::path::Path;

/// What to generate.
#[derive(Clone, Debug)]
pub struct CorpusConfig {
    pub records: usize,
    pub beats_per_record: usize,
    /// Beat symbols, assigned round-robin; counts are exactly balanced when
    /// `beats_per_record` is a multiple of the symbol count.
    pub symbols: Vec<char>,
    pub seed: u64,
    /// Samples between consecutive R peaks.
    pub beat_period: usize,
    pub sampling_frequency: f64,
    /// ADC units per millivolt.
    pub gain: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            records: 4,
            beats_per_record: 500,
            symbols: vec!['N', 'L', 'R', 'V', '/'],
            seed: 257,
            beat_period: 320,
            sampling_frequency: 360.0,
            gain: 200.0,
        }
    }
}

fn bump(t: f64, center: f64, width: f64) -> f64 {
    let z = (t - center) / width;
    (-0.5 * z * z).exp()
}

/// Noise-free waveform of one beat class, in millivolts, at offset `t`
/// samples from the R peak (360 Hz scale). Support is within |t| ≲ 140.
pub fn beat_template(symbol: char, t: f64) -> f64 {
    match symbol {
        // Normal sinus: P wave, sharp narrow R, small S, upright T.
        'N' => {
            0.15 * bump(t, -60.0, 12.0) - 0.10 * bump(t, -12.0, 4.0)
                + 1.20 * bump(t, 0.0, 5.0)
                - 0.25 * bump(t, 12.0, 4.0)
                + 0.35 * bump(t, 55.0, 18.0)
        }
        // Left bundle branch block: broad, notched complex, discordant T.
        'L' => {
            0.12 * bump(t, -70.0, 12.0) + 0.70 * bump(t, -10.0, 14.0)
                + 0.55 * bump(t, 14.0, 16.0)
                - 0.30 * bump(t, 70.0, 20.0)
        }
        // Right bundle branch block: R wave with a deep, wide S.
        'R' => {
            0.12 * bump(t, -65.0, 12.0) + 0.90 * bump(t, -5.0, 6.0)
                - 0.60 * bump(t, 18.0, 12.0)
                + 0.25 * bump(t, 65.0, 15.0)
        }
        // Premature ventricular: no P, very wide and tall, inverted T.
        'V' => 1.30 * bump(t, -8.0, 18.0) - 0.70 * bump(t, 30.0, 16.0),
        // Paced: narrow pacing spike, deep deflection, slow rebound.
        '/' => {
            0.80 * bump(t, -20.0, 1.5) - 0.90 * bump(t, 5.0, 15.0)
                + 0.40 * bump(t, 55.0, 20.0)
        }
        // Atrial premature: prominent early P, slightly smaller R.
        'A' => {
            0.25 * bump(t, -45.0, 8.0) + 1.00 * bump(t, 0.0, 5.0)
                - 0.20 * bump(t, 12.0, 4.0)
                + 0.30 * bump(t, 50.0, 16.0)
        }
        // Aberrated atrial premature: inverted P.
        'a' => {
            -0.20 * bump(t, -50.0, 10.0) + 1.00 * bump(t, 0.0, 6.0)
                + 0.30 * bump(t, 52.0, 16.0)
        }
        // Fusion of ventricular and normal.
        'F' => 0.5 * (beat_template('N', t) + beat_template('V', t)),
        // Fusion of paced and normal.
        'f' => 0.5 * (beat_template('/', t) + beat_template('N', t)),
        // Junctional escape: no P wave, modest normal-shaped complex.
        'j' => {
            0.90 * bump(t, 0.0, 5.0) - 0.15 * bump(t, 12.0, 4.0)
                + 0.25 * bump(t, 50.0, 15.0)
        }
        // Anything else: a nondescript low blob.
        _ => 0.30 * bump(t, 0.0, 10.0),
    }
}

/// Half-width, in samples, of the rendered beat support.
const RENDER_SPAN: i64 = 150;

/// Builds one record in memory: two channels (the second an attenuated,
/// inverted copy with its own noise), one annotation per beat.
pub fn synthesize_record(name: &str, config: &CorpusConfig, rng: &mut Rng) -> EcgRecord {
    let period = config.beat_period;
    let lead_in = period;
    let num_samples = lead_in + config.beats_per_record * period + period;

    // Clean per-channel traces, millivolts.
    let mut clean = vec![0.0f64; num_samples];
    let mut annotations = Vec::with_capacity(config.beats_per_record);
    for k in 0..config.beats_per_record {
        let symbol = config.symbols[k % config.symbols.len()];
        let jitter = rng.below(9) as i64 - 4;
        let r = (lead_in + k * period) as i64 + jitter;
        let amplitude = 0.9 + 0.2 * rng.next_f64();
        let width = 0.95 + 0.1 * rng.next_f64();
        for t in -RENDER_SPAN..=RENDER_SPAN {
            let i = r + t;
            if (0..num_samples as i64).contains(&i) {
                clean[i as usize] += amplitude * beat_template(symbol, t as f64 / width);
            }
        }
        annotations.push(Annotation { sample_index: r as usize, symbol, channel: 0 });
    }

    // Baseline wander (one slow sinusoid per record) plus white noise,
    // quantized to ADC counts; channel 1 is a scaled inversion.
    let wander_phase = rng.next_f64() * std::f64::consts::TAU;
    let wander_period = 3.0 * config.sampling_frequency;
    let mut samples = Vec::with_capacity(num_samples * 2);
    let adc = |mv: f64| -> i16 {
        (mv * config.gain).round().clamp(-2047.0, 2047.0) as i16
    };
    for (i, &mv) in clean.iter().enumerate() {
        let wander =
            0.04 * (std::f64::consts::TAU * i as f64 / wander_period + wander_phase).sin();
        samples.push(adc(mv + wander + 0.015 * rng.normal()));
        samples.push(adc(-0.5 * mv + wander + 0.015 * rng.normal()));
    }

    let age = 30 + rng.below(60) as u32;
    let (sex, sex_token) = match rng.below(3) {
        0 => (Sex::Male, "M"),
        1 => (Sex::Female, "F"),
        _ => (Sex::Unknown, "?"),
    };
    let signal = |desc: &str| SignalSpec {
        file_name: format!("{name}.dat"),
        format_code: 212,
        gain: config.gain,
        baseline: 0,
        description: desc.to_string(),
    };
    let header = RecordHeader {
        record_name: name.to_string(),
        num_signals: 2,
        sampling_frequency: config.sampling_frequency,
        num_samples,
        signals: vec![signal("MLII"), signal("V1")],
        comments: vec![format!("#{age} {sex_token}")],
    };
    EcgRecord { header, samples, annotations, meta: PatientMeta { age: Some(age), sex } }
}

/// Writes `config.records` records (`s000`, `s001`, …) under `dir` through
/// the real WFDB encoders and returns the record names.
pub fn write_corpus(dir: &Path, config: &CorpusConfig) -> std::io::Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut root = Rng::new(config.seed);
    let mut names = Vec::with_capacity(config.records);
    for r in 0..config.records {
        let name = format!("s{r:03}");
        let mut rng = root.split();
        let record = synthesize_record(&name, config, &mut rng);
        std::fs::write(dir.join(format!("{name}.hea")), write_header(&record.header))?;
        std::fs::write(dir.join(format!("{name}.dat")), encode_format212(&record.samples))?;
        std::fs::write(
            dir.join(format!("{name}.atr")),
            encode_annotations(&record.annotations),
        )?;
        names.push(name);
    }
    Ok(names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use recg_core::preprocess::{preprocess_record, ClassScheme, PreprocessConfig};
    use recg_core::wfdb::load_record;

    fn small() -> CorpusConfig {
        CorpusConfig { records: 2, beats_per_record: 25, ..CorpusConfig::default() }
    }

    #[test]
    fn corpus_round_trips_through_the_loader() {
        let dir = tempfile::tempdir().unwrap();
        let names = write_corpus(dir.path(), &small()).unwrap();
        assert_eq!(names, ["s000", "s001"]);
        for name in &names {
            let record = load_record(&dir.path().join(name)).unwrap();
            assert_eq!(record.header.num_signals, 2);
            assert_eq!(record.annotations.len(), 25);
            assert!(record.meta.age.is_some());
            // Annotated positions carry the big deflections: every beat
            // window has a larger amplitude range than the record's
            // noise-only lead-in.
            let mv = record.millivolts(0);
            let range = |s: &[f64]| {
                s.iter().cloned().fold(f64::MIN, f64::max)
                    - s.iter().cloned().fold(f64::MAX, f64::min)
            };
            let quiet = range(&mv[..120]);
            for ann in &record.annotations {
                let lo = ann.sample_index - 60;
                let beat = range(&mv[lo..ann.sample_index + 60]);
                assert!(
                    beat > 2.0 * quiet,
                    "{name}@{}: beat range {beat} vs quiet {quiet}",
                    ann.sample_index
                );
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        write_corpus(dir_a.path(), &small()).unwrap();
        write_corpus(dir_b.path(), &small()).unwrap();
        for name in ["s000", "s001"] {
            for ext in ["hea", "dat", "atr"] {
                let a = std::fs::read(dir_a.path().join(format!("{name}.{ext}"))).unwrap();
                let b = std::fs::read(dir_b.path().join(format!("{name}.{ext}"))).unwrap();
                assert_eq!(a, b, "{name}.{ext}");
            }
        }
    }

    #[test]
    fn classes_are_balanced_after_preprocessing() {
        let dir = tempfile::tempdir().unwrap();
        let names = write_corpus(dir.path(), &small()).unwrap();
        let config = PreprocessConfig::default();
        let mut counts = [0usize; 10];
        let mut total = 0;
        for name in &names {
            let record = load_record(&dir.path().join(name)).unwrap();
            for beat in preprocess_record(&record, &config).unwrap() {
                counts[beat.label as usize] += 1;
                total += 1;
            }
        }
        assert_eq!(total, 50);
        let names10 = ClassScheme::Mitbih10.class_names();
        for symbol in ['N', 'L', 'R', 'V', '/'] {
            let idx = names10.iter().position(|n| n.starts_with(symbol)).unwrap();
            assert_eq!(counts[idx], 10, "symbol {symbol}");
        }
    }

    #[test]
    fn templates_are_mutually_distinct() {
        let classes = ['N', 'L', 'R', 'V', '/', 'A', 'a', 'F', 'f', 'j'];
        let grid: Vec<f64> = (-140..=140).map(|t| t as f64).collect();
        let curves: Vec<Vec<f64>> = classes
            .iter()
            .map(|&c| grid.iter().map(|&t| beat_template(c, t)).collect())
            .collect();
        for i in 0..classes.len() {
            for j in (i + 1)..classes.len() {
                let dot: f64 = curves[i].iter().zip(&curves[j]).map(|(a, b)| a * b).sum();
                let ni: f64 = curves[i].iter().map(|a| a * a).sum::<f64>().sqrt();
                let nj: f64 = curves[j].iter().map(|a| a * a).sum::<f64>().sqrt();
                let correlation = dot / (ni * nj);
                assert!(
                    correlation < 0.98,
                    "{} vs {}: correlation {correlation}",
                    classes[i],
                    classes[j]
                );
            }
        }
    }

    #[test]
    fn adc_values_stay_in_the_12_bit_range() {
        let mut rng = Rng::new(3);
        let record = synthesize_record("x", &CorpusConfig::default(), &mut rng);
        assert!(record.samples.iter().all(|&s| (-2048..=2047).contains(&s)));
        // With gain 200 and ~1.5 mV peaks, values stay well inside.
        let max = record.samples.iter().map(|&s| s.abs()).max().unwrap();
        assert!(max > 100, "beats should be visible: max {max}");
        assert!(max < 600, "beats should not clip: max {max}");
    }
}
