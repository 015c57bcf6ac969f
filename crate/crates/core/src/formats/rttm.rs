//! RTTM speaker-activity records.
//!
//! Only `SPEAKER` lines are interpreted:
//! `SPEAKER <session> <chan> <onset> <duration> <NA> <NA> <speaker> <NA> <NA>`.
//! Lines starting with `;` are comments; other record types are ignored.
//! Float fields are written with 2 decimals (10 ms resolution).

use std::io::BufRead;

use crate::model::{ActivityEntry, SpeakerActivity};

use super::{FormatError, Result};

const FIELD_COUNT: usize = 10;

/// Parse RTTM text into one activity per session (first-occurrence order).
pub fn parse_rttm<R: BufRead>(reader: R) -> Result<Vec<SpeakerActivity>> {
    let mut activities: Vec<SpeakerActivity> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with(';') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields[0] != "SPEAKER" {
            continue;
        }
        if fields.len() != FIELD_COUNT {
            return Err(FormatError::Malformed {
                line: lineno,
                message: format!("expected {FIELD_COUNT} fields, got {}", fields.len()),
            });
        }
        let session = fields[1];
        let onset: f64 = fields[3]
            .parse()
            .map_err(|_| FormatError::invalid("onset", lineno, format!("not a number: {}", fields[3])))?;
        let duration: f64 = fields[4]
            .parse()
            .map_err(|_| FormatError::invalid("duration", lineno, format!("not a number: {}", fields[4])))?;
        if duration.is_nan() || duration <= 0.0 {
            return Err(FormatError::invalid("duration", lineno, "must be > 0"));
        }
        let entry = ActivityEntry::new(fields[7], onset, duration);
        match activities.iter_mut().find(|a| a.session_id == session) {
            Some(a) => a.entries.push(entry),
            None => {
                let mut a = SpeakerActivity::new(session);
                a.entries.push(entry);
                activities.push(a);
            }
        }
    }
    Ok(activities)
}

/// Serialize activities as RTTM `SPEAKER` lines.
pub fn write_rttm(activities: &[SpeakerActivity]) -> String {
    let mut out = String::new();
    for a in activities {
        for e in &a.entries {
            out.push_str(&format!(
                "SPEAKER {} 1 {:.2} {:.2} <NA> <NA> {} <NA> <NA>\n",
                a.session_id, e.onset, e.duration, e.speaker_id
            ));
        }
    }
    out
}
