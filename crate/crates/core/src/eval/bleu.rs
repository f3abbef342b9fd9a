use std::collections::HashMap;

use serde::Serialize;

use super::ngram::{ngram_counts, ngram_total};
use super::EvalInstance;

/// Corpus BLEU bookkeeping: clipped matches and totals per order, plus
/// the brevity penalty inputs.
#[derive(Debug, Clone, Serialize)]
pub struct BleuAudit {
    pub score: f64,
    /// (clipped matches, hypothesis n-grams) per order 1..=max_n.
    pub precisions: Vec<(u64, u64)>,
    pub hyp_length: u64,
    pub ref_length: u64,
    pub brevity_penalty: f64,
}

/// The reference length BLEU compares against: the reference closest in
/// length to the hypothesis, ties broken toward the shorter one.
fn closest_ref_length(hyp_len: usize, references: &[impl AsRef<[String]>]) -> u64 {
    references
        .iter()
        .map(|r| r.as_ref().len())
        .min_by_key(|&len| (len.abs_diff(hyp_len), len))
        .unwrap_or(0) as u64
}

/// Corpus-level BLEU: geometric mean of the modified (clipped) n-gram
/// precisions for orders 1..=max_n, times the brevity penalty. Orders
/// with no hypothesis n-grams at all (every hypothesis shorter than n)
/// are left out of the mean; any other zero precision zeroes the score —
/// no smoothing.
pub fn bleu(instances: &[EvalInstance], max_n: usize) -> BleuAudit {
    let mut matched = vec![0u64; max_n];
    let mut total = vec![0u64; max_n];
    let mut hyp_length = 0u64;
    let mut ref_length = 0u64;

    for instance in instances {
        let hyp = instance.hypothesis.as_slice();
        hyp_length += hyp.len() as u64;
        ref_length += closest_ref_length(hyp.len(), &instance.references);
        for n in 1..=max_n {
            let hyp_counts = ngram_counts(hyp, n);
            if hyp_counts.is_empty() {
                continue;
            }
            let mut max_ref_counts: HashMap<&[String], u64> = HashMap::new();
            for reference in &instance.references {
                for (gram, count) in ngram_counts(reference, n) {
                    let entry = max_ref_counts.entry(gram).or_insert(0);
                    *entry = (*entry).max(count);
                }
            }
            for (gram, count) in hyp_counts {
                let clip = max_ref_counts.get(gram).copied().unwrap_or(0);
                matched[n - 1] += count.min(clip);
            }
            total[n - 1] += ngram_total(hyp.len(), n);
        }
    }

    let brevity_penalty = if hyp_length == 0 {
        0.0
    } else if hyp_length < ref_length {
        (1.0 - ref_length as f64 / hyp_length as f64).exp()
    } else {
        1.0
    };

    let mut log_sum = 0.0;
    let mut orders_used = 0usize;
    let mut zero_precision = false;
    for n in 0..max_n {
        if total[n] == 0 {
            continue;
        }
        orders_used += 1;
        if matched[n] == 0 {
            zero_precision = true;
        } else {
            log_sum += (matched[n] as f64 / total[n] as f64).ln();
        }
    }
    let score = if zero_precision || orders_used == 0 || hyp_length == 0 {
        0.0
    } else {
        brevity_penalty * (log_sum / orders_used as f64).exp()
    };

    BleuAudit {
        score,
        precisions: matched.into_iter().zip(total).collect(),
        hyp_length,
        ref_length,
        brevity_penalty,
    }
}

/// Sentence-level BLEU with add-one smoothing on the orders above 1.
/// This is a different statistic from corpus BLEU; it exists to give the
/// significance test a per-item score.
pub fn sentence_bleu(instance: &EvalInstance, max_n: usize) -> f64 {
    let hyp = instance.hypothesis.as_slice();
    if hyp.is_empty() {
        return 0.0;
    }
    let ref_length = closest_ref_length(hyp.len(), &instance.references);
    let mut log_sum = 0.0;
    let mut orders_used = 0usize;
    for n in 1..=max_n {
        let total = ngram_total(hyp.len(), n);
        if total == 0 {
            continue;
        }
        let hyp_counts = ngram_counts(hyp, n);
        let mut max_ref_counts: HashMap<&[String], u64> = HashMap::new();
        for reference in &instance.references {
            for (gram, count) in ngram_counts(reference, n) {
                let entry = max_ref_counts.entry(gram).or_insert(0);
                *entry = (*entry).max(count);
            }
        }
        let mut matched = 0u64;
        for (gram, count) in hyp_counts {
            matched += count.min(max_ref_counts.get(gram).copied().unwrap_or(0));
        }
        let precision = if n == 1 {
            matched as f64 / total as f64
        } else {
            (matched + 1) as f64 / (total + 1) as f64
        };
        if precision == 0.0 {
            return 0.0;
        }
        log_sum += precision.ln();
        orders_used += 1;
    }
    if orders_used == 0 {
        return 0.0;
    }
    let brevity_penalty = if (hyp.len() as u64) < ref_length {
        (1.0 - ref_length as f64 / hyp.len() as f64).exp()
    } else {
        1.0
    };
    brevity_penalty * (log_sum / orders_used as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::tokenize;

    fn instance(hyp: &str, refs: &[&str]) -> EvalInstance {
        EvalInstance::new(tokenize(hyp), refs.iter().map(|r| tokenize(r)).collect()).unwrap()
    }

    #[test]
    fn identical_corpus_scores_one() {
        let instances = vec![
            instance("the cat sat on the mat", &["the cat sat on the mat"]),
            instance("dogs bark", &["dogs bark", "a dog barks"]),
        ];
        let audit = bleu(&instances, 4);
        assert!((audit.score - 1.0).abs() < 1e-12);
        assert_eq!(audit.brevity_penalty, 1.0);
    }

    #[test]
    fn disjoint_tokens_score_zero() {
        let instances = vec![instance("x y z w", &["a b c d"])];
        assert_eq!(bleu(&instances, 4).score, 0.0);
    }

    #[test]
    fn short_hypothesis_case_matches_hand_computation() {
        // p1 = p2 = p3 = 1, the 4-gram order has no hypothesis n-grams and
        // is excluded; BLEU = BP = exp(1 - 4/3).
        let instances = vec![instance("the cat sat", &["the cat sat down"])];
        let audit = bleu(&instances, 4);
        let expected = (1.0f64 - 4.0 / 3.0).exp();
        assert!((audit.score - expected).abs() < 1e-9, "score {}", audit.score);
        assert_eq!(audit.precisions[0], (3, 3));
        assert_eq!(audit.precisions[1], (2, 2));
        assert_eq!(audit.precisions[2], (1, 1));
        assert_eq!(audit.precisions[3], (0, 0));
    }

    #[test]
    fn clipping_limits_repeated_words() {
        // "the the the" against "the cat": only one "the" may count.
        let instances = vec![instance("the the the", &["the cat"])];
        let audit = bleu(&instances, 1);
        assert_eq!(audit.precisions[0], (1, 3));
    }

    #[test]
    fn closest_length_prefers_shorter_on_ties() {
        // Hypothesis length 3; references of length 2 and 4 tie, so r = 2
        // and there is no brevity penalty.
        let instances = vec![instance("a b c", &["a b", "a b c d"])];
        let audit = bleu(&instances, 1);
        assert_eq!(audit.ref_length, 2);
        assert_eq!(audit.brevity_penalty, 1.0);
    }

    #[test]
    fn reference_permutation_is_irrelevant() {
        let a = bleu(&[instance("the cat sat", &["a cat sat", "the cat sat down"])], 4);
        let b = bleu(&[instance("the cat sat", &["the cat sat down", "a cat sat"])], 4);
        assert_eq!(a.score.to_bits(), b.score.to_bits());
    }

    #[test]
    fn sentence_bleu_is_smoothed() {
        let inst = instance("the cat sat", &["the cat naps"]);
        // Corpus BLEU zeroes on the missing bigram; the sentence statistic
        // stays positive.
        assert_eq!(bleu(std::slice::from_ref(&inst), 4).score, 0.0);
        assert!(sentence_bleu(&inst, 4) > 0.0);
    }
}
