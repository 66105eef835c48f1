//! R-peak centred beat extraction.

use super::{labels::ClassScheme, Beat};
use crate::wfdb::{Annotation, PatientMeta};

/// Cuts a half-open window `[R - delta_n, R + delta_n)` around every
/// annotation whose symbol the scheme retains. Windows that cross a record
/// boundary are padded with the boundary sample, so every beat has exactly
/// `2 * delta_n` samples.
pub fn segment(
    signal: &[f64],
    annotations: &[Annotation],
    scheme: ClassScheme,
    delta_n: usize,
    record_id: &str,
    meta: PatientMeta,
) -> Vec<Beat> {
    let last = signal.len() as isize - 1;
    annotations
        .iter()
        .filter(|ann| scheme.map_label(ann.symbol).is_some())
        .map(|ann| {
            let r = ann.sample_index as isize;
            let samples = (r - delta_n as isize..r + delta_n as isize)
                .map(|i| signal[i.clamp(0, last) as usize])
                .collect();
            Beat {
                samples,
                record_id: record_id.to_string(),
                r_peak_index: ann.sample_index,
                symbol: ann.symbol,
                meta,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ann(sample_index: usize, symbol: char) -> Annotation {
        Annotation { sample_index, symbol, channel: 0 }
    }

    #[test]
    fn interior_window_is_a_plain_slice() {
        let signal: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let beats = segment(
            &signal,
            &[ann(500, 'N')],
            ClassScheme::Mitbih10,
            128,
            "r",
            PatientMeta::UNKNOWN,
        );
        assert_eq!(beats.len(), 1);
        assert_eq!(beats[0].samples.len(), 256);
        assert_eq!(beats[0].samples[0], 372.0);
        assert_eq!(*beats[0].samples.last().unwrap(), 627.0);
    }

    #[test]
    fn left_boundary_pads_with_the_first_sample() {
        let signal: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let beats = segment(
            &signal,
            &[ann(50, 'N')],
            ClassScheme::Mitbih10,
            128,
            "r",
            PatientMeta::UNKNOWN,
        );
        let s = &beats[0].samples;
        assert_eq!(s.len(), 256);
        assert!(s[..78].iter().all(|&v| v == 0.0));
        assert_eq!(s[78], 0.0);
        assert_eq!(s[79], 1.0);
        assert_eq!(s[255], 177.0);
    }

    #[test]
    fn right_boundary_pads_with_the_last_sample() {
        let signal: Vec<f64> = (0..300).map(|i| i as f64).collect();
        let beats = segment(
            &signal,
            &[ann(290, 'V')],
            ClassScheme::Mitbih10,
            128,
            "r",
            PatientMeta::UNKNOWN,
        );
        let s = &beats[0].samples;
        assert_eq!(s.len(), 256);
        assert_eq!(s[0], 162.0);
        assert!(s[138..].iter().all(|&v| v == 299.0));
    }

    #[test]
    fn symbols_outside_the_scheme_are_dropped() {
        let signal = vec![0.0; 2000];
        let anns = [ann(400, 'N'), ann(700, 'Q'), ann(1000, 'N'), ann(1300, 'N')];
        let beats = segment(&signal, &anns, ClassScheme::Mitbih10, 128, "r", PatientMeta::UNKNOWN);
        assert_eq!(beats.len(), 3);
        assert!(beats.iter().all(|b| b.symbol == 'N'));

        // AAMI keeps N (Normal) and V (VEB) but drops '/'.
        let anns = [ann(400, 'N'), ann(700, '/'), ann(1000, 'V')];
        let beats = segment(&signal, &anns, ClassScheme::Aami, 128, "r", PatientMeta::UNKNOWN);
        assert_eq!(beats.len(), 2);
    }
}
