//! Waveform → binary image rendering.

use super::{encode_meta, Beat, BeatImage, ClassScheme, IMAGE_SIZE};

/// Draws a beat as a connected polyline on a square binary raster.
///
/// Time is resampled to [`IMAGE_SIZE`] columns by linear interpolation;
/// amplitude is min-max scaled (over the resampled points) to rows
/// `0..IMAGE_SIZE`, row 0 at the minimum. Each column sets the pixel at its
/// own row plus every row between it and the previous column's row, so the
/// trace is never broken by steep slopes. Stroke pixels are 1.0 on a 0.0
/// background. A flat beat degenerates to a horizontal line at the middle
/// row.
///
/// Returns `None` when the scheme drops the beat's symbol.
pub fn rasterize(beat: &Beat, scheme: ClassScheme) -> Option<BeatImage> {
    let label = scheme.map_label(beat.symbol)?;
    Some(BeatImage {
        pixels: rasterize_pixels(&beat.samples),
        label,
        meta_vector: encode_meta(&beat.meta),
    })
}

/// The raster alone, independent of any labeling scheme (single-beat
/// prediction renders beats whose symbol may not map to a class).
pub fn rasterize_pixels(samples: &[f64]) -> Vec<f32> {
    let rows = column_rows(samples);
    let mut pixels = vec![0.0f32; IMAGE_SIZE * IMAGE_SIZE];
    let mut prev = rows[0];
    for (col, &row) in rows.iter().enumerate() {
        let (lo, hi) = (prev.min(row), prev.max(row));
        for r in lo..=hi {
            pixels[r * IMAGE_SIZE + col] = 1.0;
        }
        prev = row;
    }
    pixels
}

/// Row index (0 = amplitude minimum) for each of the `IMAGE_SIZE` columns.
fn column_rows(samples: &[f64]) -> Vec<usize> {
    debug_assert!(samples.len() >= 2);
    let resampled: Vec<f64> = (0..IMAGE_SIZE)
        .map(|c| {
            let t = c as f64 * (samples.len() - 1) as f64 / (IMAGE_SIZE - 1) as f64;
            let i = t.floor() as usize;
            let frac = t - i as f64;
            if i + 1 < samples.len() {
                samples[i] * (1.0 - frac) + samples[i + 1] * frac
            } else {
                samples[i]
            }
        })
        .collect();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &resampled {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let range = hi - lo;
    if range < 1e-12 {
        return vec![IMAGE_SIZE / 2; IMAGE_SIZE];
    }
    resampled
        .iter()
        .map(|&v| ((v - lo) / range * (IMAGE_SIZE - 1) as f64).round() as usize)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wfdb::PatientMeta;

    fn beat(samples: Vec<f64>, symbol: char) -> Beat {
        Beat {
            samples,
            record_id: "t".into(),
            r_peak_index: 0,
            symbol,
            meta: PatientMeta::UNKNOWN,
        }
    }

    #[test]
    fn flat_beat_is_a_single_middle_row() {
        let img = rasterize(&beat(vec![0.7; 256], 'N'), ClassScheme::Mitbih10).unwrap();
        for col in 0..IMAGE_SIZE {
            for row in 0..IMAGE_SIZE {
                let expect = if row == 64 { 1.0 } else { 0.0 };
                assert_eq!(img.pixels[row * IMAGE_SIZE + col], expect, "({row},{col})");
            }
        }
        assert_eq!(img.label, 4);
    }

    #[test]
    fn ramp_is_a_monotone_staircase_corner_to_corner() {
        let samples: Vec<f64> = (0..256).map(|i| i as f64).collect();
        let img = rasterize(&beat(samples, 'N'), ClassScheme::Mitbih10).unwrap();
        assert_eq!(img.pixels[0], 1.0, "(0,0) set");
        assert_eq!(img.pixels[127 * IMAGE_SIZE + 127], 1.0, "(127,127) set");
        // Rows must not decrease along columns.
        let mut prev_top = 0;
        for col in 0..IMAGE_SIZE {
            let top = (0..IMAGE_SIZE)
                .rev()
                .find(|&r| img.pixels[r * IMAGE_SIZE + col] == 1.0)
                .unwrap();
            assert!(top >= prev_top, "column {col} dips");
            prev_top = top;
        }
    }

    #[test]
    fn pixels_are_strictly_binary_and_every_column_stroked() {
        let samples: Vec<f64> = (0..256)
            .map(|i| (i as f64 * 0.37).sin() * ((i % 83) as f64))
            .collect();
        let img = rasterize(&beat(samples, 'V'), ClassScheme::Mitbih10).unwrap();
        assert!(img.pixels.iter().all(|&p| p == 0.0 || p == 1.0));
        for col in 0..IMAGE_SIZE {
            let strokes = (0..IMAGE_SIZE)
                .filter(|&r| img.pixels[r * IMAGE_SIZE + col] == 1.0)
                .count();
            assert!(strokes >= 1, "column {col} empty");
        }
    }

    #[test]
    fn steep_jumps_stay_connected() {
        // Square wave: alternating extremes produce full-height columns.
        let samples: Vec<f64> = (0..256).map(|i| if (i / 64) % 2 == 0 { 0.0 } else { 1.0 }).collect();
        let img = rasterize(&beat(samples, 'N'), ClassScheme::Mitbih10).unwrap();
        // Column where the jump happens must bridge every row in between.
        let jump_col = (0..IMAGE_SIZE)
            .find(|&c| {
                let set: Vec<usize> =
                    (0..IMAGE_SIZE).filter(|&r| img.pixels[r * IMAGE_SIZE + c] == 1.0).collect();
                set.len() > 64
            })
            .expect("some column must bridge the jump");
        let rows: Vec<usize> = (0..IMAGE_SIZE)
            .filter(|&r| img.pixels[r * IMAGE_SIZE + jump_col] == 1.0)
            .collect();
        for pair in rows.windows(2) {
            assert_eq!(pair[1], pair[0] + 1, "gap in the bridged column");
        }
    }

    #[test]
    fn dropped_symbols_return_none() {
        assert!(rasterize(&beat(vec![0.0; 256], '/'), ClassScheme::Aami).is_none());
        assert!(rasterize(&beat(vec![0.0; 256], '/'), ClassScheme::Mitbih10).is_some());
    }
}
