//! Producing corrupted training inputs from clean sentences, and
//! linearizing meaning representations into the same surface form.
//!
//! Three corruption heuristics compose into the training-input pipeline:
//! random deletion of a sampled fraction of words, deletion restricted to
//! frequent words (so content words survive), and shuffling that keeps
//! adjacent pairs of the original sentence glued together.

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::data::{tokenize, MeaningRepresentation, TokenSequence, Vocabulary};

#[derive(Debug, Error)]
pub enum CorruptionError {
    #[error("invalid corruption config: {0}")]
    Config(String),
    #[error("boolean slot '{name}' has non-boolean value '{value}'")]
    BadBooleanValue { name: String, value: String },
    #[error("meaning representation has no slots")]
    EmptyMr,
}

/// How to verbalize a boolean slot whose value is "no". The conservative
/// default omits the slot; the alternative emits "not" plus the slot name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BooleanNoPolicy {
    #[default]
    Omit,
    NegatedName,
}

/// Parameters of the corruption pipeline.
#[derive(Debug, Clone)]
pub struct CorruptionConfig {
    /// Mean of the per-sentence deletion-rate distribution.
    pub rate_mean: f64,
    /// Variance (not standard deviation) of the deletion-rate distribution.
    pub rate_variance: f64,
    /// Sampled rates are clamped into this closed interval.
    pub rate_clamp: (f64, f64),
    /// Only words with count strictly above this threshold may be deleted
    /// when the frequency filter is on.
    pub count_threshold: u64,
    /// Where word counts come from; may be built on a different corpus
    /// than the one being corrupted.
    pub counts: Arc<Vocabulary>,
    pub enable_frequency_filter: bool,
    pub enable_shuffle: bool,
    pub seed: u64,
}

impl CorruptionConfig {
    pub fn new(counts: Arc<Vocabulary>) -> Self {
        CorruptionConfig {
            rate_mean: 0.6,
            rate_variance: 0.1,
            rate_clamp: (0.05, 0.95),
            count_threshold: 100,
            counts,
            enable_frequency_filter: true,
            enable_shuffle: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), CorruptionError> {
        let (low, high) = self.rate_clamp;
        if !(0.0..=1.0).contains(&low) || !(0.0..=1.0).contains(&high) || low > high {
            return Err(CorruptionError::Config(format!(
                "clamp range [{low}, {high}] must satisfy 0 <= low <= high <= 1"
            )));
        }
        if self.rate_mean < low || self.rate_mean > high {
            return Err(CorruptionError::Config(format!(
                "rate mean {} outside clamp range [{low}, {high}]",
                self.rate_mean
            )));
        }
        if self.rate_variance < 0.0 {
            return Err(CorruptionError::Config("rate variance must be >= 0".into()));
        }
        Ok(())
    }
}

/// One corrupted training input together with its clean sentence and the
/// deletion rate that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSample {
    pub original: TokenSequence,
    pub corrupted: TokenSequence,
    pub sampled_rate: f64,
}

/// Draws a deletion rate from Normal(mean, variance) and clamps it into
/// the configured range.
pub fn sample_deletion_rate<R: Rng>(rng: &mut R, config: &CorruptionConfig) -> f64 {
    let std_dev = config.rate_variance.sqrt();
    let normal = Normal::new(config.rate_mean, std_dev)
        .expect("validated config gives a well-formed normal distribution");
    let draw = normal.sample(rng);
    draw.clamp(config.rate_clamp.0, config.rate_clamp.1)
}

/// floor(p * n), guarded against f64 representation error so that exact
/// fractions like 0.6 * 20 land on the mathematical value.
fn deletion_count(p: f64, n: usize) -> usize {
    ((p * n as f64 + 1e-9).floor() as usize).min(n)
}

/// Removes `k` of the `eligible` positions uniformly at random (all of
/// them when fewer than `k` are eligible); survivors keep original order.
fn remove_random_subset<R: Rng>(
    seq: &TokenSequence,
    eligible: &[usize],
    k: usize,
    rng: &mut R,
) -> TokenSequence {
    let removed: HashSet<usize> = if eligible.len() <= k {
        eligible.iter().copied().collect()
    } else {
        rand::seq::index::sample(rng, eligible.len(), k)
            .iter()
            .map(|i| eligible[i])
            .collect()
    };
    seq.iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, t)| t.clone())
        .collect()
}

/// Removes a fraction `p` of the words at random: exactly floor(p*n)
/// positions chosen uniformly without replacement.
pub fn corrupt_random<R: Rng>(seq: &TokenSequence, p: f64, rng: &mut R) -> TokenSequence {
    assert!(!seq.is_empty(), "cannot corrupt an empty sequence");
    assert!((0.0..=1.0).contains(&p), "deletion rate out of range: {p}");
    let eligible: Vec<usize> = (0..seq.len()).collect();
    remove_random_subset(seq, &eligible, deletion_count(p, seq.len()), rng)
}

/// Like [`corrupt_random`], but only positions whose word count strictly
/// exceeds `threshold` may be removed. When fewer than floor(p*n)
/// positions are eligible, all eligible positions are removed.
pub fn corrupt_frequency_filtered<R: Rng>(
    seq: &TokenSequence,
    p: f64,
    counts: &Vocabulary,
    threshold: u64,
    rng: &mut R,
) -> TokenSequence {
    assert!(!seq.is_empty(), "cannot corrupt an empty sequence");
    assert!((0.0..=1.0).contains(&p), "deletion rate out of range: {p}");
    let eligible: Vec<usize> = seq
        .iter()
        .enumerate()
        .filter(|(_, t)| counts.count(t) > threshold)
        .map(|(i, _)| i)
        .collect();
    remove_random_subset(seq, &eligible, deletion_count(p, seq.len()), rng)
}

/// Shuffles the corrupted words while never splitting a bigram that also
/// occurs in the original sentence: adjacent pairs of `corrupted` that are
/// adjacent somewhere in `original` are glued into units by greedy
/// left-to-right chaining, the units are shuffled uniformly, and the
/// result is flattened.
pub fn shuffle_with_bigrams<R: Rng>(
    corrupted: &TokenSequence,
    original: &TokenSequence,
    rng: &mut R,
) -> TokenSequence {
    if corrupted.is_empty() {
        return TokenSequence::default();
    }
    let original_bigrams: HashSet<(&str, &str)> = original
        .windows(2)
        .map(|w| (w[0].as_str(), w[1].as_str()))
        .collect();
    let mut units: Vec<Vec<String>> = Vec::new();
    for token in corrupted.iter() {
        let chains = units
            .last()
            .map(|unit| {
                let last = unit.last().expect("units are non-empty");
                original_bigrams.contains(&(last.as_str(), token.as_str()))
            })
            .unwrap_or(false);
        if chains {
            units.last_mut().expect("non-empty").push(token.clone());
        } else {
            units.push(vec![token.clone()]);
        }
    }
    units.shuffle(rng);
    units.into_iter().flatten().collect()
}

/// The full corruption pipeline: sample a deletion rate, delete (with or
/// without the frequency filter), then optionally shuffle.
pub fn corrupt<R: Rng>(
    seq: &TokenSequence,
    config: &CorruptionConfig,
    rng: &mut R,
) -> CorruptionSample {
    let rate = sample_deletion_rate(rng, config);
    let deleted = if config.enable_frequency_filter {
        corrupt_frequency_filtered(seq, rate, &config.counts, config.count_threshold, rng)
    } else {
        corrupt_random(seq, rate, rng)
    };
    let corrupted = if config.enable_shuffle {
        shuffle_with_bigrams(&deleted, seq, rng)
    } else {
        deleted
    };
    CorruptionSample {
        original: seq.clone(),
        corrupted,
        sampled_rate: rate,
    }
}

/// Converts a meaning representation into a flat token sequence: boolean
/// "yes" slots emit the tokenized slot name, non-boolean slots emit the
/// tokenized slot value, in slot order.
pub fn linearize_mr(mr: &MeaningRepresentation) -> Result<TokenSequence, CorruptionError> {
    linearize_mr_with(mr, BooleanNoPolicy::Omit)
}

/// [`linearize_mr`] with an explicit policy for boolean "no" values.
pub fn linearize_mr_with(
    mr: &MeaningRepresentation,
    no_policy: BooleanNoPolicy,
) -> Result<TokenSequence, CorruptionError> {
    if mr.is_empty() {
        return Err(CorruptionError::EmptyMr);
    }
    let mut out = Vec::new();
    for slot in &mr.slots {
        if slot.is_boolean {
            match (slot.value.as_str(), no_policy) {
                ("yes", _) => out.extend(tokenize(&slot.name).into_vec()),
                ("no", BooleanNoPolicy::Omit) => {}
                ("no", BooleanNoPolicy::NegatedName) => {
                    out.push("not".to_owned());
                    out.extend(tokenize(&slot.name).into_vec());
                }
                (other, _) => {
                    return Err(CorruptionError::BadBooleanValue {
                        name: slot.name.clone(),
                        value: other.to_owned(),
                    })
                }
            }
        } else {
            out.extend(tokenize(&slot.value).into_vec());
        }
    }
    Ok(TokenSequence::new(out))
}
