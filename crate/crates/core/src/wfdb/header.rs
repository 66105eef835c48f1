//! `.hea` header parsing and writing.
//!
//! Grammar (the subset these databases use):
//!
//! ```text
//! record_name[/segments] num_signals sampling_frequency num_samples
//! file_name format gain[(baseline)][/units] [adc_res [adc_zero [init [chksum [blk]]]]] [description…]
//! # comment lines, anywhere after the line they follow
//! ```
//!
//! The baseline defaults to the `adc_zero` field when no parenthesised value
//! accompanies the gain, and to 0 when neither is present.

use super::{PatientMeta, RecordHeader, Sex, SignalSpec, WfdbError};

fn bad(msg: impl Into<String>) -> WfdbError {
    WfdbError::MalformedHeader(msg.into())
}

pub fn parse_header(text: &str) -> Result<RecordHeader, WfdbError> {
    let mut lines = text.lines();
    let record_line = loop {
        match lines.next() {
            Some(l) if l.trim().is_empty() || l.trim_start().starts_with('#') => continue,
            Some(l) => break l,
            None => return Err(bad("empty header")),
        }
    };

    let fields: Vec<&str> = record_line.split_whitespace().collect();
    if fields.len() < 4 {
        return Err(bad(format!("record line needs 4 fields, got {}", fields.len())));
    }
    let record_name = fields[0].split('/').next().unwrap_or("").to_string();
    if record_name.is_empty() {
        return Err(bad("empty record name"));
    }
    let num_signals: usize = fields[1]
        .parse()
        .map_err(|_| bad(format!("signal count `{}` not numeric", fields[1])))?;
    if num_signals == 0 {
        return Err(bad("record declares zero signals"));
    }
    // The frequency field may carry a counter rate: "360/360(0)".
    let freq_text = fields[2].split('/').next().unwrap_or(fields[2]);
    let sampling_frequency: f64 = freq_text
        .parse()
        .map_err(|_| bad(format!("sampling frequency `{}` not numeric", fields[2])))?;
    if !(sampling_frequency > 0.0) {
        return Err(bad(format!("sampling frequency {sampling_frequency} must be positive")));
    }
    let num_samples: usize = fields[3]
        .parse()
        .map_err(|_| bad(format!("sample count `{}` not numeric", fields[3])))?;

    let mut signals = Vec::with_capacity(num_signals);
    let mut comments = Vec::new();
    for line in lines {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('#') {
            comments.push(line.to_string());
        } else if signals.len() < num_signals {
            signals.push(parse_signal_line(trimmed)?);
        }
        // Anything past the declared signal lines that isn't a comment is
        // ignored (info strings, multi-segment extensions).
    }
    if signals.len() != num_signals {
        return Err(bad(format!(
            "expected {num_signals} signal lines, found {}",
            signals.len()
        )));
    }
    Ok(RecordHeader {
        record_name,
        num_signals,
        sampling_frequency,
        num_samples,
        signals,
        comments,
    })
}

fn parse_signal_line(line: &str) -> Result<SignalSpec, WfdbError> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 2 {
        return Err(bad(format!("signal line `{line}` needs file and format")));
    }
    let file_name = fields[0].to_string();
    let format_code: u32 = fields[1]
        .parse()
        .map_err(|_| bad(format!("signal format `{}` not numeric", fields[1])))?;
    if format_code != 212 {
        return Err(WfdbError::UnsupportedFormat(format_code));
    }

    // gain[(baseline)][/units]
    let (mut gain, mut explicit_baseline) = (0.0f64, None);
    if let Some(gfield) = fields.get(2) {
        let gfield = gfield.split('/').next().unwrap_or(gfield);
        let (gtext, btext) = match gfield.find('(') {
            Some(open) => {
                let close = gfield
                    .find(')')
                    .ok_or_else(|| bad(format!("unclosed baseline in `{gfield}`")))?;
                (&gfield[..open], Some(&gfield[open + 1..close]))
            }
            None => (gfield, None),
        };
        gain = gtext
            .parse()
            .map_err(|_| bad(format!("gain `{gtext}` not numeric")))?;
        if let Some(btext) = btext {
            let b: i32 = btext
                .parse()
                .map_err(|_| bad(format!("baseline `{btext}` not numeric")))?;
            explicit_baseline = Some(b);
        }
    }
    let adc_zero: i32 = fields
        .get(4)
        .map(|t| t.parse().map_err(|_| bad(format!("adc zero `{t}` not numeric"))))
        .transpose()?
        .unwrap_or(0);
    let baseline = explicit_baseline.unwrap_or(adc_zero);
    let description = if fields.len() > 8 { fields[8..].join(" ") } else { String::new() };
    Ok(SignalSpec { file_name, format_code, gain, baseline, description })
}

/// Extracts age and sex from the first comment line (`# age sex …`).
/// Total: unparsable or out-of-range tokens become unknown-sentinels.
pub fn parse_patient_meta(comments: &[String]) -> PatientMeta {
    let Some(first) = comments.first() else {
        return PatientMeta::UNKNOWN;
    };
    let stripped = first.trim_start().trim_start_matches('#');
    let mut tokens = stripped.split_whitespace();
    let age = tokens
        .next()
        .and_then(|t| t.parse::<u32>().ok())
        .filter(|&a| a <= 130);
    let sex = match tokens.next() {
        Some("M") | Some("m") => Sex::Male,
        Some("F") | Some("f") => Sex::Female,
        _ => Sex::Unknown,
    };
    PatientMeta { age, sex }
}

/// Writes a header in the same dialect [`parse_header`] reads. Test utility
/// for building synthetic records.
pub fn write_header(header: &RecordHeader) -> String {
    let mut out = format!(
        "{} {} {} {}\n",
        header.record_name, header.num_signals, header.sampling_frequency, header.num_samples
    );
    for s in &header.signals {
        out.push_str(&format!(
            "{} {} {}({}) 12 0 0 0 0 {}\n",
            s.file_name, s.format_code, s.gain, s.baseline, s.description
        ));
    }
    for c in &header.comments {
        out.push_str(c);
        out.push('\n');
    }
    out
}
