//! Speaker-verification scoring: cosine scores over embeddings and the
//! equal error rate.
//!
//! EER convention: a trial is accepted when its score is >= the threshold.
//! Sweeping thresholds over the unique scores (descending) traces FAR up
//! from 0 and FRR down to 0; the reported EER is the value where the two
//! step functions cross, linearly interpolated between the adjacent
//! operating points when no point attains FAR = FRR exactly.

use std::collections::HashMap;

use crate::model::{Embedding, ScoredTrial, Trial};

pub type Result<T> = std::result::Result<T, AsvError>;

#[derive(Debug, thiserror::Error)]
pub enum AsvError {
    #[error("eer needs both trial classes, got {targets} target and {nontargets} nontarget")]
    MissingClass { targets: usize, nontargets: usize },
    #[error("embedding dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("cannot average zero embeddings")]
    EmptyAverage,
    #[error("zero-norm embedding")]
    ZeroNorm,
    #[error("missing {side} embedding for {id}")]
    MissingEmbedding { side: &'static str, id: String },
    #[error("non-finite score for trial ({0}, {1})")]
    NonFiniteScore(String, String),
}

/// Equal error rate and the threshold attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct EerResult {
    pub eer: f64,
    pub threshold: f64,
}

/// Compute the interpolated EER of a scored trial set.
pub fn eer(scored: &[ScoredTrial]) -> Result<EerResult> {
    let mut targets: Vec<f64> = Vec::new();
    let mut nontargets: Vec<f64> = Vec::new();
    for s in scored {
        if !s.score.is_finite() {
            return Err(AsvError::NonFiniteScore(
                s.trial.enroll_id.clone(),
                s.trial.test_id.clone(),
            ));
        }
        if s.trial.is_target() {
            targets.push(s.score);
        } else {
            nontargets.push(s.score);
        }
    }
    if targets.is_empty() || nontargets.is_empty() {
        return Err(AsvError::MissingClass {
            targets: targets.len(),
            nontargets: nontargets.len(),
        });
    }
    targets.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nontargets.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut thresholds: Vec<f64> = targets.iter().chain(nontargets.iter()).copied().collect();
    thresholds.sort_by(|a, b| b.partial_cmp(a).unwrap());
    thresholds.dedup();

    let nt = targets.len() as f64;
    let nn = nontargets.len() as f64;
    // operating point at threshold t under the ">= accepts" convention
    let point = |t: f64| -> (f64, f64) {
        let accepted_nontargets = nontargets.len() - nontargets.partition_point(|&x| x < t);
        let rejected_targets = targets.partition_point(|&x| x < t);
        (accepted_nontargets as f64 / nn, rejected_targets as f64 / nt)
    };

    // Above the top score nothing is accepted: FAR 0, FRR 1.
    let mut prev_t = thresholds[0];
    let mut prev = (0.0f64, 1.0f64);
    for &t in &thresholds {
        let (far, frr) = point(t);
        if far >= frr {
            if far == frr {
                return Ok(EerResult { eer: far, threshold: t });
            }
            let (far0, frr0) = prev;
            // lambda where the interpolated FAR and FRR meet
            let denom = (far - far0) + (frr0 - frr);
            let lambda = (frr0 - far0) / denom;
            let eer = far0 + lambda * (far - far0);
            let threshold = prev_t + lambda * (t - prev_t);
            return Ok(EerResult { eer, threshold });
        }
        prev = (far, frr);
        prev_t = t;
    }
    unreachable!("FAR reaches 1 and FRR reaches 0 at the minimum score");
}

/// Mean of a non-empty set of same-dimension embeddings.
pub fn average_embedding(embeddings: &[Embedding]) -> Result<Embedding> {
    let first = embeddings.first().ok_or(AsvError::EmptyAverage)?;
    let dim = first.values.len();
    let mut sum = vec![0.0f64; dim];
    for e in embeddings {
        if e.values.len() != dim {
            return Err(AsvError::DimMismatch(dim, e.values.len()));
        }
        for (s, v) in sum.iter_mut().zip(&e.values) {
            *s += v;
        }
    }
    let n = embeddings.len() as f64;
    Ok(Embedding::new(sum.into_iter().map(|s| s / n).collect()))
}

/// Cosine similarity between two embeddings.
pub fn cosine_score(a: &Embedding, b: &Embedding) -> Result<f64> {
    if a.values.len() != b.values.len() {
        return Err(AsvError::DimMismatch(a.values.len(), b.values.len()));
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    let na: f64 = a.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.values.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(AsvError::ZeroNorm);
    }
    Ok(dot / (na * nb))
}

/// Score every trial by cosine similarity between its enrollment and test
/// embeddings. Output keeps trial order.
pub fn score_trials(
    trials: &[Trial],
    enroll: &HashMap<String, Embedding>,
    test: &HashMap<String, Embedding>,
) -> Result<Vec<ScoredTrial>> {
    let mut out = Vec::with_capacity(trials.len());
    for t in trials {
        let e = enroll.get(&t.enroll_id).ok_or_else(|| AsvError::MissingEmbedding {
            side: "enrollment",
            id: t.enroll_id.clone(),
        })?;
        let x = test.get(&t.test_id).ok_or_else(|| AsvError::MissingEmbedding {
            side: "test",
            id: t.test_id.clone(),
        })?;
        out.push(ScoredTrial { trial: t.clone(), score: cosine_score(e, x)? });
    }
    Ok(out)
}
