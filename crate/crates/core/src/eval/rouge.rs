use super::EvalInstance;

/// Longest-common-subsequence length by dynamic programming.
pub fn lcs_length(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            row[j + 1] = if x == y {
                prev[j] + 1
            } else {
                row[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut row);
    }
    prev[b.len()]
}

/// ROUGE-L F1 (β = 1) of one hypothesis against one reference.
fn lcs_f1(hyp: &[String], reference: &[String]) -> f64 {
    let lcs = lcs_length(hyp, reference) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let precision = lcs / hyp.len() as f64;
    let recall = lcs / reference.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// ROUGE-L of one instance: the maximum F1 over its references.
pub fn rouge_l_instance(instance: &EvalInstance) -> f64 {
    instance
        .references
        .iter()
        .map(|reference| lcs_f1(&instance.hypothesis, reference))
        .fold(0.0, f64::max)
}

/// Corpus ROUGE-L: the mean of the per-instance scores.
pub fn rouge_l(instances: &[EvalInstance]) -> f64 {
    if instances.is_empty() {
        return 0.0;
    }
    instances.iter().map(rouge_l_instance).sum::<f64>() / instances.len() as f64
}
