//! From-scratch evaluation: corpus BLEU, ROUGE-L and NIST with
//! multi-reference support, the copy-input baseline, and the
//! approximate-randomization significance test.

mod bleu;
mod ngram;
mod nist;
mod rouge;
mod significance;

pub use bleu::{bleu, sentence_bleu, BleuAudit};
pub use nist::{nist, NistAudit};
pub use rouge::{lcs_length, rouge_l, rouge_l_instance};
pub use significance::approximate_randomization;

use serde::Serialize;
use thiserror::Error;

use crate::corruption::{linearize_mr, CorruptionError};
use crate::data::{MeaningRepresentation, TokenSequence};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("instance needs at least one reference")]
    NoReferences,
    #[error("no instances to score")]
    Empty,
    #[error("paired score lists differ in length: {a} vs {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error(transparent)]
    Linearize(#[from] CorruptionError),
}

/// One hypothesis with its reference set. Exact-duplicate references are
/// collapsed at construction: a duplicate carries no information, and
/// keeping it would let reference-set statistics (NIST information
/// weights) drift on repeated entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalInstance {
    pub hypothesis: TokenSequence,
    pub references: Vec<TokenSequence>,
}

impl EvalInstance {
    pub fn new(
        hypothesis: TokenSequence,
        references: Vec<TokenSequence>,
    ) -> Result<Self, EvalError> {
        let mut deduped: Vec<TokenSequence> = Vec::with_capacity(references.len());
        for reference in references {
            if !deduped.contains(&reference) {
                deduped.push(reference);
            }
        }
        if deduped.is_empty() {
            return Err(EvalError::NoReferences);
        }
        Ok(EvalInstance { hypothesis: hypothesis.clone(), references: deduped })
    }
}

/// Corpus scores plus the statistics behind them.
#[derive(Debug, Clone, Serialize)]
pub struct ScoreReport {
    /// Corpus BLEU in [0, 1].
    pub bleu: f64,
    /// Mean ROUGE-L F1 in [0, 1].
    pub rouge_l: f64,
    /// NIST score (non-negative, unbounded).
    pub nist: f64,
    pub audit: EvalAudit,
}

/// The n-gram bookkeeping behind a [`ScoreReport`].
#[derive(Debug, Clone, Serialize)]
pub struct EvalAudit {
    pub instances: usize,
    pub bleu: BleuAudit,
    pub nist: NistAudit,
}

/// Scores a corpus with all three metrics.
pub fn score_corpus(instances: &[EvalInstance]) -> Result<ScoreReport, EvalError> {
    if instances.is_empty() {
        return Err(EvalError::Empty);
    }
    let bleu_audit = bleu(instances, 4);
    let nist_audit = nist(instances, 5);
    Ok(ScoreReport {
        bleu: bleu_audit.score,
        rouge_l: rouge_l(instances),
        nist: nist_audit.score,
        audit: EvalAudit {
            instances: instances.len(),
            bleu: bleu_audit,
            nist: nist_audit,
        },
    })
}

/// Renders each meaning representation through the linearization rule,
/// producing the texts of the copy-input baseline (the evaluation lower
/// bound).
pub fn copy_input_baseline(
    mrs: &[MeaningRepresentation],
) -> Result<Vec<String>, EvalError> {
    mrs.iter()
        .map(|mr| Ok(linearize_mr(mr)?.joined()))
        .collect()
}

/// Per-instance scores for the significance test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairedMetric {
    /// Smoothed sentence BLEU (add-one on the higher orders); a different
    /// statistic from corpus BLEU, suitable for per-item pairing.
    Bleu,
    RougeL,
}

pub fn per_instance_scores(instances: &[EvalInstance], metric: PairedMetric) -> Vec<f64> {
    instances
        .iter()
        .map(|instance| match metric {
            PairedMetric::Bleu => sentence_bleu(instance, 4),
            PairedMetric::RougeL => rouge_l_instance(instance),
        })
        .collect()
}
