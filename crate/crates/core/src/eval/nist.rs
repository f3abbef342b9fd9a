use std::collections::HashMap;

use serde::Serialize;

use super::ngram::{ngram_counts, ngram_total};
use super::EvalInstance;

/// Brevity-penalty shape constant: exp(beta * ln^2(ratio)) equals 0.5 at
/// a 2/3 length ratio.
fn beta() -> f64 {
    0.5f64.ln() / (2.0f64 / 3.0).ln().powi(2)
}

#[derive(Debug, Clone, Serialize)]
pub struct NistAudit {
    pub score: f64,
    /// (information-weighted matches, hypothesis n-grams) per order.
    pub orders: Vec<(f64, u64)>,
    pub hyp_length: u64,
    /// Sum over instances of the mean reference length.
    pub ref_length: f64,
    pub brevity_penalty: f64,
    /// True when every hypothesis was empty (score forced to 0).
    pub empty_hypotheses: bool,
}

/// Information-weighted n-gram co-occurrence score over orders
/// 1..=max_n, times the NIST brevity penalty.
///
/// Information weights come from the pooled reference corpus of the whole
/// instance list: `info(w1..wn) = log2(count(w1..w n-1) / count(w1..wn))`,
/// with the total reference token count as the order-0 "prefix" count. A
/// hypothesis n-gram counts (clipped against the instance's best
/// reference) whenever it occurs in one of the instance's references.
pub fn nist(instances: &[EvalInstance], max_n: usize) -> NistAudit {
    // Pooled reference n-gram counts, orders 1..=max_n.
    let mut pooled: Vec<HashMap<Vec<String>, u64>> = vec![HashMap::new(); max_n + 1];
    let mut total_ref_tokens = 0u64;
    for instance in instances {
        for reference in &instance.references {
            total_ref_tokens += reference.len() as u64;
            for (n, pool) in pooled.iter_mut().enumerate().skip(1) {
                for (gram, count) in ngram_counts(reference, n) {
                    *pool.entry(gram.to_vec()).or_insert(0) += count;
                }
            }
        }
    }
    let info = |gram: &[String]| -> f64 {
        let n = gram.len();
        let denominator = pooled[n].get(gram).copied().unwrap_or(0);
        if denominator == 0 {
            return 0.0;
        }
        let numerator = if n == 1 {
            total_ref_tokens
        } else {
            pooled[n - 1].get(&gram[..n - 1]).copied().unwrap_or(0)
        };
        if numerator == 0 {
            return 0.0;
        }
        (numerator as f64 / denominator as f64).log2()
    };

    let mut weighted = vec![0.0f64; max_n];
    let mut totals = vec![0u64; max_n];
    let mut hyp_length = 0u64;
    let mut ref_length = 0.0f64;
    for instance in instances {
        let hyp = instance.hypothesis.as_slice();
        hyp_length += hyp.len() as u64;
        let mean_ref: f64 = instance
            .references
            .iter()
            .map(|r| r.len() as f64)
            .sum::<f64>()
            / instance.references.len() as f64;
        ref_length += mean_ref;
        for n in 1..=max_n {
            totals[n - 1] += ngram_total(hyp.len(), n);
            if hyp.len() < n {
                continue;
            }
            let mut max_ref_counts: HashMap<&[String], u64> = HashMap::new();
            for reference in &instance.references {
                for (gram, count) in ngram_counts(reference, n) {
                    let entry = max_ref_counts.entry(gram).or_insert(0);
                    *entry = (*entry).max(count);
                }
            }
            for (gram, count) in ngram_counts(hyp, n) {
                let clip = max_ref_counts.get(gram).copied().unwrap_or(0);
                let matched = count.min(clip);
                if matched > 0 {
                    weighted[n - 1] += matched as f64 * info(gram);
                }
            }
        }
    }

    let empty_hypotheses = hyp_length == 0;
    let brevity_penalty = if empty_hypotheses {
        0.0
    } else {
        let ratio = (hyp_length as f64 / ref_length).min(1.0);
        (beta() * ratio.ln().powi(2)).exp()
    };
    let mut score = 0.0;
    for n in 0..max_n {
        if totals[n] > 0 {
            score += weighted[n] / totals[n] as f64;
        }
    }
    score *= brevity_penalty;

    NistAudit {
        score,
        orders: weighted.into_iter().zip(totals).collect(),
        hyp_length,
        ref_length,
        brevity_penalty,
        empty_hypotheses,
    }
}
