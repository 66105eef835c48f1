//! Class schemes and metadata encoding.

use crate::wfdb::{PatientMeta, Sex};
use serde::{Deserialize, Serialize};

/// How beat symbols map to class indices.
///
/// * `Mitbih10` — ten single-symbol classes in canonical order
///   `/ A F L N R V a f j`.
/// * `Aami` — three grouped classes: Normal {N,L,R,e,j}, supraventricular
///   ectopic {A,a,J,S}, ventricular ectopic {V,E}. Symbols outside the
///   groups are dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassScheme {
    Mitbih10,
    Aami,
}

const MITBIH10_SYMBOLS: [char; 10] = ['/', 'A', 'F', 'L', 'N', 'R', 'V', 'a', 'f', 'j'];
const MITBIH10_NAMES: [&str; 10] = ["/", "A", "F", "L", "N", "R", "V", "a", "f", "j"];
const AAMI_NAMES: [&str; 3] = ["Normal", "SEB", "VEB"];

impl ClassScheme {
    pub fn parse(name: &str) -> Option<ClassScheme> {
        match name {
            "mitbih10" => Some(ClassScheme::Mitbih10),
            "aami" => Some(ClassScheme::Aami),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassScheme::Mitbih10 => "mitbih10",
            ClassScheme::Aami => "aami",
        }
    }

    pub fn class_names(&self) -> &'static [&'static str] {
        match self {
            ClassScheme::Mitbih10 => &MITBIH10_NAMES,
            ClassScheme::Aami => &AAMI_NAMES,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.class_names().len()
    }

    /// Class index for a beat symbol; `None` means the beat is dropped.
    pub fn map_label(&self, symbol: char) -> Option<u16> {
        match self {
            ClassScheme::Mitbih10 => MITBIH10_SYMBOLS
                .iter()
                .position(|&s| s == symbol)
                .map(|i| i as u16),
            ClassScheme::Aami => match symbol {
                'N' | 'L' | 'R' | 'e' | 'j' => Some(0),
                'A' | 'a' | 'J' | 'S' => Some(1),
                'V' | 'E' => Some(2),
                _ => None,
            },
        }
    }
}

/// Encodes patient metadata as the model's two-value side input:
/// age in centuries clamped to `[0, 1.3]` (0.5 when unknown), and sex as
/// male → 1.0, female → 0.0, unknown → 0.5.
pub fn encode_meta(meta: &PatientMeta) -> [f32; 2] {
    let age = match meta.age {
        Some(a) => (a as f32 / 100.0).clamp(0.0, 1.3),
        None => 0.5,
    };
    let sex = match meta.sex {
        Sex::Male => 1.0,
        Sex::Female => 0.0,
        Sex::Unknown => 0.5,
    };
    [age, sex]
}
