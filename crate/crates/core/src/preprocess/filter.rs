//! Hann-window smoothing and per-beat baseline correction.

use super::PreprocessError;

/// Hann window of length `n + 1`: `w[k] = 0.5 * (1 - cos(2πk/n))` for
/// `0 ≤ k ≤ n`. Zero at both ends, 1 at the center, symmetric.
pub fn hann_coefficients(n: usize) -> Result<Vec<f64>, PreprocessError> {
    if n < 2 || n % 2 != 0 {
        return Err(PreprocessError::InvalidWindow(format!(
            "window length {n} must be even and at least 2"
        )));
    }
    Ok((0..=n)
        .map(|k| 0.5 * (1.0 - (std::f64::consts::TAU * k as f64 / n as f64).cos()))
        .collect())
}

/// Same-length smoothing: convolve with a unit-sum Hann window of length
/// `window + 1`, reading past the ends as if the edge samples repeated.
pub fn smooth(signal: &[f64], window: usize) -> Result<Vec<f64>, PreprocessError> {
    let mut taps = hann_coefficients(window)?;
    if signal.len() < taps.len() {
        return Err(PreprocessError::InvalidWindow(format!(
            "signal of {} samples shorter than {}-tap window",
            signal.len(),
            taps.len()
        )));
    }
    let total: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= total;
    }
    let half = window / 2;
    let n = signal.len() as isize;
    let out = (0..signal.len())
        .map(|i| {
            taps.iter()
                .enumerate()
                .map(|(k, &t)| {
                    let idx = (i + k) as isize - half as isize;
                    signal[idx.clamp(0, n - 1) as usize] * t
                })
                .sum()
        })
        .collect();
    Ok(out)
}

/// Subtracts the mean, making the samples zero-centered.
pub fn baseline_correct(samples: &[f64]) -> Vec<f64> {
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    samples.iter().map(|&v| v - mean).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn hann_small_windows_match_direct_evaluation() {
        let w = hann_coefficients(4).unwrap();
        let expect = [0.0, 0.5, 1.0, 0.5, 0.0];
        for (a, e) in w.iter().zip(expect) {
            assert!((a - e).abs() < 1e-12, "{w:?}");
        }
        let w = hann_coefficients(2).unwrap();
        assert!((w[0]).abs() < 1e-12 && (w[1] - 1.0).abs() < 1e-12 && w[2].abs() < 1e-12);
    }

    #[test]
    fn hann_is_symmetric_for_any_even_length() {
        for n in [2usize, 6, 14, 40] {
            let w = hann_coefficients(n).unwrap();
            assert_eq!(w.len(), n + 1);
            for k in 0..=n {
                assert!((w[k] - w[n - k]).abs() < 1e-12);
            }
            assert!((w[n / 2] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn odd_or_tiny_windows_are_rejected() {
        assert!(hann_coefficients(3).is_err());
        assert!(hann_coefficients(0).is_err());
        assert!(hann_coefficients(1).is_err());
    }

    #[test]
    fn smoothing_preserves_constants_and_length() {
        for window in [2usize, 8, 14] {
            let signal = vec![3.25; 100];
            let out = smooth(&signal, window).unwrap();
            assert_eq!(out.len(), 100);
            for v in out {
                assert!((v - 3.25).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn impulse_response_is_the_normalized_window() {
        let mut signal = vec![0.0; 61];
        signal[30] = 1.0;
        let window = 14;
        let out = smooth(&signal, window).unwrap();
        let taps = hann_coefficients(window).unwrap();
        let total: f64 = taps.iter().sum();
        for k in 0..=window {
            let expect = taps[k] / total;
            // Output at 30 - 7 + k sees the impulse through tap k.
            let got = out[30 - window / 2 + k];
            assert!((got - expect).abs() < 1e-12, "tap {k}: {got} vs {expect}");
        }
        assert!(out[0].abs() < 1e-12 && out[60].abs() < 1e-12);
    }

    #[test]
    fn white_noise_variance_shrinks() {
        let mut rng = Rng::new(123);
        for trial in 0..10 {
            let signal: Vec<f64> = (0..2000).map(|_| rng.normal()).collect();
            let out = smooth(&signal, 14).unwrap();
            let var = |xs: &[f64]| {
                let m = xs.iter().sum::<f64>() / xs.len() as f64;
                xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
            };
            assert!(
                var(&out) < var(&signal),
                "trial {trial}: smoothing did not reduce variance"
            );
        }
    }

    #[test]
    fn too_short_signals_are_rejected() {
        assert!(smooth(&[1.0; 10], 14).is_err());
    }

    #[test]
    fn baseline_correction_zeroes_the_mean() {
        assert_eq!(baseline_correct(&[1.0, 1.0, 1.0, 1.0]), vec![0.0; 4]);
        assert_eq!(baseline_correct(&[0.0, 2.0]), vec![-1.0, 1.0]);
        let mut rng = Rng::new(4);
        let xs: Vec<f64> = (0..501).map(|_| rng.uniform(-5.0, 5.0)).collect();
        let out = baseline_correct(&xs);
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        assert!(mean.abs() < 1e-9);
    }
}
