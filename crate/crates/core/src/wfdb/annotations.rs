//! MIT annotation (`.atr`) codec.
//!
//! The stream is a sequence of little-endian 16-bit words; the top 6 bits are
//! an annotation code, the low 10 a time delta in samples, accumulated over
//! the stream. A word of all zeros terminates. Special codes:
//!
//! * 59 (SKIP): the next two words hold a signed 32-bit interval (high word
//!   first) added to the running time — used when a delta exceeds 10 bits;
//! * 60 (NUM), 61 (SUB): attribute values, consumed and dropped here;
//! * 62 (CHN): sets the channel of subsequent annotations;
//! * 63 (AUX): delta is the byte length of an inline payload, padded to a
//!   word boundary, consumed and dropped.
//!
//! Every ordinary word advances the running time; only codes naming beats
//! become [`Annotation`]s, the rest (rhythm changes, noise flags, …) are
//! consumed silently.

use super::{Annotation, WfdbError};

const SKIP: u8 = 59;
const NUM: u8 = 60;
const SUB: u8 = 61;
const CHN: u8 = 62;
const AUX: u8 = 63;

/// Beat mnemonics, indexed by annotation code.
fn beat_symbol(code: u8) -> Option<char> {
    Some(match code {
        1 => 'N',
        2 => 'L',
        3 => 'R',
        4 => 'a',
        5 => 'V',
        6 => 'F',
        7 => 'J',
        8 => 'A',
        9 => 'S',
        10 => 'E',
        11 => 'j',
        12 => '/',
        13 => 'Q',
        25 => 'B',
        34 => 'e',
        35 => 'n',
        38 => 'f',
        41 => 'r',
        _ => return None,
    })
}

fn beat_code(symbol: char) -> Option<u8> {
    "NLRaVFJASEj/Q"
        .find(symbol)
        .map(|i| i as u8 + 1)
        .or(match symbol {
            'B' => Some(25),
            'e' => Some(34),
            'n' => Some(35),
            'f' => Some(38),
            'r' => Some(41),
            _ => None,
        })
}

fn mal(msg: impl Into<String>) -> WfdbError {
    WfdbError::MalformedAnnotation(msg.into())
}

pub fn parse_annotations(bytes: &[u8]) -> Result<Vec<Annotation>, WfdbError> {
    if bytes.len() % 2 != 0 {
        return Err(mal(format!("odd byte count {}", bytes.len())));
    }
    let mut words = bytes
        .chunks_exact(2)
        .map(|p| u16::from_le_bytes([p[0], p[1]]));
    let mut next = || words.next().ok_or_else(|| mal("missing terminator word"));

    let mut out = Vec::new();
    let mut time: i64 = 0;
    let mut channel: u8 = 0;
    loop {
        let word = next()?;
        let code = (word >> 10) as u8;
        let delta = (word & 0x3FF) as i64;
        match code {
            0 if delta == 0 => break,
            SKIP => {
                let hi = next()? as u32;
                let lo = next()? as u32;
                time += ((hi << 16) | lo) as i32 as i64;
            }
            NUM | SUB => {}
            CHN => channel = delta as u8,
            AUX => {
                let padded = (delta as usize).div_ceil(2);
                for _ in 0..padded {
                    next()?;
                }
            }
            _ => {
                time += delta;
                if let Some(symbol) = beat_symbol(code) {
                    if time < 0 {
                        return Err(mal(format!("negative sample time {time}")));
                    }
                    out.push(Annotation { sample_index: time as usize, symbol, channel });
                }
            }
        }
    }
    Ok(out)
}

/// Serializes beat annotations in the same dialect [`parse_annotations`]
/// reads, inserting SKIP words for deltas beyond 10 bits and CHN words on
/// channel changes. Test utility; annotations must be time-ordered.
pub fn encode_annotations(annotations: &[Annotation]) -> Vec<u8> {
    let mut out: Vec<u8> = Vec::new();
    let push_word = |out: &mut Vec<u8>, w: u16| out.extend_from_slice(&w.to_le_bytes());

    let mut time: i64 = 0;
    let mut channel: u8 = 0;
    for ann in annotations {
        debug_assert!(ann.sample_index as i64 >= time, "annotations must be ordered");
        if ann.channel != channel {
            channel = ann.channel;
            push_word(&mut out, (CHN as u16) << 10 | channel as u16);
        }
        let mut delta = ann.sample_index as i64 - time;
        if delta > 0x3FF {
            push_word(&mut out, (SKIP as u16) << 10);
            push_word(&mut out, (delta >> 16) as u16);
            push_word(&mut out, (delta & 0xFFFF) as u16);
            delta = 0;
        }
        let code = beat_code(ann.symbol)
            .unwrap_or_else(|| panic!("no annotation code for symbol {:?}", ann.symbol));
        push_word(&mut out, (code as u16) << 10 | delta as u16);
        time = ann.sample_index as i64;
    }
    push_word(&mut out, 0);
    out
}
