//! Format-212 signal codec.
//!
//! Three bytes carry two 12-bit two's-complement samples:
//!
//! ```text
//! s1 = b0 | (b1 & 0x0F) << 8        s2 = b2 | (b1 & 0xF0) << 4
//! ```
//!
//! Samples of all channels are interleaved: row 0 of every signal, then
//! row 1, and so on. An odd total count leaves the second half of the final
//! triplet unused.

use super::WfdbError;

fn sign_extend_12(v: u16) -> i16 {
    if v & 0x800 != 0 {
        (v | 0xF000) as i16
    } else {
        v as i16
    }
}

/// Decodes `num_samples` rows of `num_signals` interleaved samples.
pub fn decode_format212(
    bytes: &[u8],
    num_samples: usize,
    num_signals: usize,
) -> Result<Vec<i16>, WfdbError> {
    let total = num_samples * num_signals;
    let needed = total.div_ceil(2) * 3;
    if bytes.len() < needed {
        return Err(WfdbError::TruncatedSignal { expected: needed, got: bytes.len() });
    }
    let mut out = Vec::with_capacity(total);
    for triplet in bytes[..needed].chunks_exact(3) {
        let (b0, b1, b2) = (triplet[0] as u16, triplet[1] as u16, triplet[2] as u16);
        out.push(sign_extend_12(b0 | (b1 & 0x0F) << 8));
        if out.len() < total {
            out.push(sign_extend_12(b2 | (b1 & 0xF0) << 4));
        }
    }
    Ok(out)
}

/// Packs channel-interleaved samples (each in `[-2048, 2047]`) into format
/// 212. Odd counts pad the final half-triplet with zero bits. Test utility.
pub fn encode_format212(samples: &[i16]) -> Vec<u8> {
    let mut out = Vec::with_capacity(samples.len().div_ceil(2) * 3);
    for pair in samples.chunks(2) {
        debug_assert!((-2048..=2047).contains(&pair[0]));
        let a = (pair[0] as u16) & 0x0FFF;
        let b = if pair.len() == 2 {
            debug_assert!((-2048..=2047).contains(&pair[1]));
            (pair[1] as u16) & 0x0FFF
        } else {
            0
        };
        out.push((a & 0xFF) as u8);
        out.push(((a >> 8) as u8 & 0x0F) | ((b >> 8) as u8 & 0x0F) << 4);
        out.push((b & 0xFF) as u8);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn worked_triplets_decode_exactly() {
        assert_eq!(decode_format212(&[0x01, 0x00, 0x02], 2, 1).unwrap(), vec![1, 2]);
        assert_eq!(decode_format212(&[0xFF, 0x0F, 0x00], 2, 1).unwrap(), vec![-1, 0]);
        assert_eq!(decode_format212(&[0x00, 0x00, 0x00], 2, 1).unwrap(), vec![0, 0]);
    }

    #[test]
    fn twos_complement_extremes() {
        // 0x800 is the most negative 12-bit value, 0x7FF the most positive.
        assert_eq!(decode_format212(&[0x00, 0x78, 0xFF], 2, 1).unwrap(), vec![-2048, 2047]);
    }

    #[test]
    fn truncation_is_detected() {
        match decode_format212(&[0x01, 0x00], 2, 1) {
            Err(WfdbError::TruncatedSignal { expected: 3, got: 2 }) => {}
            other => panic!("wanted TruncatedSignal, got {other:?}"),
        }
        // Declared more samples than the stream holds.
        assert!(decode_format212(&[0x01, 0x00, 0x02], 4, 1).is_err());
    }

    #[test]
    fn odd_sample_counts_ignore_the_padding_half() {
        let decoded = decode_format212(&[0x01, 0xF0, 0xFF], 1, 1).unwrap();
        assert_eq!(decoded, vec![1]);
    }

    #[test]
    fn round_trip_random_samples() {
        let mut rng = Rng::new(99);
        for len in [1usize, 2, 7, 100, 1001] {
            let samples: Vec<i16> =
                (0..len).map(|_| (rng.below(4096) as i16) - 2048).collect();
            let encoded = encode_format212(&samples);
            assert_eq!(encoded.len(), len.div_ceil(2) * 3);
            let decoded = decode_format212(&encoded, len, 1).unwrap();
            assert_eq!(decoded, samples);
        }
    }

    #[test]
    fn round_trip_bytes_through_decoder_first() {
        let mut rng = Rng::new(3);
        let bytes: Vec<u8> = (0..300).map(|_| rng.below(256) as u8).collect();
        let decoded = decode_format212(&bytes, 200, 1).unwrap();
        assert_eq!(encode_format212(&decoded), bytes);
    }
}
