//! Trial lists (`enroll_id test_id target|nontarget`) and score files
//! (`enroll_id test_id score`), joined exactly on the id pair.

use std::collections::HashMap;
use std::io::BufRead;

use crate::model::{ScoredTrial, Trial, LABEL_NONTARGET, LABEL_TARGET};

use super::{FormatError, Result};

fn three_fields(line: &str, lineno: usize) -> Result<(String, String, String)> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(FormatError::Malformed {
            line: lineno,
            message: format!("expected 3 fields, got {}", fields.len()),
        });
    }
    Ok((fields[0].into(), fields[1].into(), fields[2].into()))
}

/// Parse a trial list. Duplicate (enroll, test) pairs are rejected because
/// the score join requires the pair to be a unique key.
pub fn parse_trials<R: BufRead>(reader: R) -> Result<Vec<Trial>> {
    let mut trials = Vec::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (enroll_id, test_id, label) = three_fields(&line, lineno)?;
        if label != LABEL_TARGET && label != LABEL_NONTARGET {
            return Err(FormatError::invalid(
                "label",
                lineno,
                format!("expected {LABEL_TARGET} or {LABEL_NONTARGET}, got {label}"),
            ));
        }
        if let Some(prev) = seen.insert((enroll_id.clone(), test_id.clone()), lineno) {
            return Err(FormatError::Malformed {
                line: lineno,
                message: format!("duplicate trial pair ({enroll_id}, {test_id}), first at line {prev}"),
            });
        }
        trials.push(Trial { enroll_id, test_id, label });
    }
    Ok(trials)
}

/// Serialize trials, one per line.
pub fn write_trials(trials: &[Trial]) -> String {
    let mut out = String::new();
    for t in trials {
        out.push_str(&format!("{} {} {}\n", t.enroll_id, t.test_id, t.label));
    }
    out
}

/// Parse scores and join them against a trial list.
///
/// Every trial must receive exactly one score; an unmatched or duplicate
/// score line is an error naming the offending pair. Output keeps trial
/// list order.
pub fn parse_scores<R: BufRead>(reader: R, trials: &[Trial]) -> Result<Vec<ScoredTrial>> {
    let mut scores: HashMap<(String, String), f64> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (enroll_id, test_id, score_text) = three_fields(&line, lineno)?;
        let score: f64 = score_text.parse().map_err(|_| {
            FormatError::invalid("score", lineno, format!("not a number: {score_text}"))
        })?;
        if scores.insert((enroll_id.clone(), test_id.clone()), score).is_some() {
            return Err(FormatError::ScoreJoin(format!(
                "duplicate score for pair ({enroll_id}, {test_id})"
            )));
        }
    }
    let mut out = Vec::with_capacity(trials.len());
    for t in trials {
        let key = (t.enroll_id.clone(), t.test_id.clone());
        match scores.remove(&key) {
            Some(score) => out.push(ScoredTrial { trial: t.clone(), score }),
            None => {
                return Err(FormatError::ScoreJoin(format!(
                    "missing score for trial ({}, {})",
                    t.enroll_id, t.test_id
                )))
            }
        }
    }
    if let Some(((e, t), _)) = scores.into_iter().next() {
        return Err(FormatError::ScoreJoin(format!(
            "score for unknown trial ({e}, {t})"
        )));
    }
    Ok(out)
}

/// Serialize scored trials as score lines.
pub fn write_scores(scored: &[ScoredTrial]) -> String {
    let mut out = String::new();
    for s in scored {
        out.push_str(&format!("{} {} {}\n", s.trial.enroll_id, s.trial.test_id, s.score));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIALS: &str = "spk1 mix_a target\nspk2 mix_a nontarget\n";

    #[test]
    fn parse_and_round_trip() {
        let trials = parse_trials(TRIALS.as_bytes()).unwrap();
        assert_eq!(trials.len(), 2);
        assert!(trials[0].is_target());
        assert!(!trials[1].is_target());
        assert_eq!(write_trials(&trials), TRIALS);
    }

    #[test]
    fn bad_label_is_rejected() {
        let err = parse_trials("a b maybe\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("label"), "{err}");
    }

    #[test]
    fn duplicate_trial_pair_is_rejected() {
        let err = parse_trials("a b target\na b nontarget\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("duplicate trial pair"), "{err}");
    }

    #[test]
    fn exact_join_in_trial_order() {
        let trials = parse_trials(TRIALS.as_bytes()).unwrap();
        // scores listed in reverse order still join by pair
        let scored =
            parse_scores("spk2 mix_a -0.25\nspk1 mix_a 0.75\n".as_bytes(), &trials).unwrap();
        assert_eq!(scored[0].trial.enroll_id, "spk1");
        assert_eq!(scored[0].score, 0.75);
        assert_eq!(scored[1].score, -0.25);
    }

    #[test]
    fn missing_score_names_pair() {
        let trials = parse_trials(TRIALS.as_bytes()).unwrap();
        let err = parse_scores("spk1 mix_a 0.5\n".as_bytes(), &trials).unwrap_err();
        assert!(err.to_string().contains("(spk2, mix_a)"), "{err}");
    }

    #[test]
    fn unknown_score_names_pair() {
        let trials = parse_trials(TRIALS.as_bytes()).unwrap();
        let err = parse_scores(
            "spk1 mix_a 0.5\nspk2 mix_a 0.1\nspk9 mix_b 0.2\n".as_bytes(),
            &trials,
        )
        .unwrap_err();
        assert!(err.to_string().contains("(spk9, mix_b)"), "{err}");
    }

    #[test]
    fn duplicate_score_names_pair() {
        let trials = parse_trials(TRIALS.as_bytes()).unwrap();
        let err =
            parse_scores("spk1 mix_a 0.5\nspk1 mix_a 0.6\n".as_bytes(), &trials).unwrap_err();
        assert!(err.to_string().contains("duplicate score"), "{err}");
    }

    #[test]
    fn scores_round_trip_shortest_repr() {
        let trials = parse_trials("a b target\n".as_bytes()).unwrap();
        let scored = vec![ScoredTrial { trial: trials[0].clone(), score: 0.1 }];
        let text = write_scores(&scored);
        assert_eq!(text, "a b 0.1\n");
        let back = parse_scores(text.as_bytes(), &trials).unwrap();
        assert_eq!(back[0].score, 0.1);
    }
}
