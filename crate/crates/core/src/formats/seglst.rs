//! Segment-list transcripts: one JSON object per line with keys
//! `session_id`, `speaker`, `start_time`, `end_time`, `words`.
//!
//! Word-level times are not part of the format. Parsed words carry their
//! segment bounds as placeholder intervals; scoring assigns proper
//! pseudo-timestamps before any time-constrained comparison.

use std::io::BufRead;

use serde_json::Value;

use crate::model::{Segment, TimedWord, Transcript};

use super::{FormatError, Result};

fn get_str(obj: &Value, key: &str, line: usize) -> Result<String> {
    match obj.get(key) {
        None => Err(FormatError::MissingKey { key: key.into(), line }),
        Some(Value::String(s)) => Ok(s.clone()),
        Some(other) => Err(FormatError::invalid(key, line, format!("expected string, got {other}"))),
    }
}

fn get_f64(obj: &Value, key: &str, line: usize) -> Result<f64> {
    match obj.get(key) {
        None => Err(FormatError::MissingKey { key: key.into(), line }),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| FormatError::invalid(key, line, format!("expected number, got {v}"))),
    }
}

/// Parse a segment-list stream into one transcript per session.
///
/// Sessions appear in first-occurrence order; segments keep input order.
pub fn parse_seglst<R: BufRead>(reader: R) -> Result<Vec<Transcript>> {
    let mut transcripts: Vec<Transcript> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let obj: Value = serde_json::from_str(&line)
            .map_err(|e| FormatError::Json { line: lineno, message: e.to_string() })?;
        let session_id = get_str(&obj, "session_id", lineno)?;
        let speaker = get_str(&obj, "speaker", lineno)?;
        let start = get_f64(&obj, "start_time", lineno)?;
        let end = get_f64(&obj, "end_time", lineno)?;
        let words_text = get_str(&obj, "words", lineno)?;
        if end < start {
            return Err(FormatError::invalid(
                "end_time",
                lineno,
                format!("must be >= start_time ({start})"),
            ));
        }
        let words = words_text
            .split_whitespace()
            .map(|w| TimedWord::new(w, start, end))
            .collect();
        let segment = Segment { session_id: session_id.clone(), speaker_id: speaker, start, end, words };
        match transcripts.iter_mut().find(|t| t.session_id == session_id) {
            Some(t) => t.segments.push(segment),
            None => {
                let mut t = Transcript::new(session_id);
                t.segments.push(segment);
                transcripts.push(t);
            }
        }
    }
    Ok(transcripts)
}

/// Serialize transcripts back to segment-list lines.
pub fn write_seglst(transcripts: &[Transcript]) -> String {
    let mut out = String::new();
    for t in transcripts {
        for seg in &t.segments {
            let words: Vec<&str> = seg.words.iter().map(|w| w.text.as_str()).collect();
            let line = serde_json::json!({
                "session_id": t.session_id,
                "speaker": seg.speaker_id,
                "start_time": seg.start,
                "end_time": seg.end,
                "words": words.join(" "),
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
    }
    out
}
