use rand::Rng;

use super::EvalError;
use crate::seed;

/// Paired approximate-randomization test. Each round independently swaps
/// every pair with probability 1/2 and checks whether the absolute mean
/// difference reaches the observed one; the p-value is
/// `(hits + 1) / (rounds + 1)`. Deterministic given the seed.
pub fn approximate_randomization(
    scores_a: &[f64],
    scores_b: &[f64],
    rounds: usize,
    rng_seed: u64,
) -> Result<f64, EvalError> {
    if scores_a.len() != scores_b.len() {
        return Err(EvalError::LengthMismatch { a: scores_a.len(), b: scores_b.len() });
    }
    if scores_a.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = scores_a.len() as f64;
    let observed = (scores_a.iter().sum::<f64>() - scores_b.iter().sum::<f64>()).abs() / n;

    let mut rng = seed::rng(rng_seed);
    let mut hits = 0usize;
    for _ in 0..rounds {
        let mut diff = 0.0;
        for (&a, &b) in scores_a.iter().zip(scores_b) {
            if rng.random::<bool>() {
                diff += b - a;
            } else {
                diff += a - b;
            }
        }
        // The epsilon keeps reassembled identical differences from losing
        // to float rounding.
        if (diff / n).abs() >= observed - 1e-12 {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (rounds + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact p-value by enumerating all 2^n swap patterns.
    fn exact_p(scores_a: &[f64], scores_b: &[f64]) -> f64 {
        let n = scores_a.len();
        let observed =
            (scores_a.iter().sum::<f64>() - scores_b.iter().sum::<f64>()).abs() / n as f64;
        let mut hits = 0usize;
        for mask in 0u32..(1 << n) {
            let mut diff = 0.0;
            for i in 0..n {
                if mask & (1 << i) != 0 {
                    diff += scores_b[i] - scores_a[i];
                } else {
                    diff += scores_a[i] - scores_b[i];
                }
            }
            if (diff / n as f64).abs() >= observed - 1e-12 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    }

    #[test]
    fn identical_lists_give_p_one() {
        let scores = vec![0.3, 0.5, 0.9, 0.1];
        let p = approximate_randomization(&scores, &scores, 5000, 7).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn matches_exact_enumeration_on_small_n() {
        let a = vec![0.70, 0.30, 0.20, 0.60, 0.40, 0.40, 0.00, 0.70, 0.10, 0.30];
        let b = vec![0.50, 0.10, 0.00, 0.20, 0.40, 0.30, 0.00, 0.50, 0.30, 0.30];
        let exact = exact_p(&a, &b);
        let approx = approximate_randomization(&a, &b, 20000, 13).unwrap();
        assert!(
            (approx - exact).abs() < 0.02,
            "exact {exact}, approximate {approx}"
        );
    }

    #[test]
    fn symmetric_in_the_two_systems() {
        let a = vec![0.9, 0.2, 0.6, 0.4, 0.8];
        let b = vec![0.3, 0.1, 0.7, 0.2, 0.5];
        let p_ab = approximate_randomization(&a, &b, 20000, 3).unwrap();
        let p_ba = approximate_randomization(&b, &a, 20000, 3).unwrap();
        assert!((p_ab - p_ba).abs() < 0.02);
    }

    #[test]
    fn p_is_in_unit_interval_and_deterministic() {
        let a = vec![1.0, 0.0, 1.0, 1.0];
        let b = vec![0.0, 0.0, 0.0, 1.0];
        let p1 = approximate_randomization(&a, &b, 999, 42).unwrap();
        let p2 = approximate_randomization(&a, &b, 999, 42).unwrap();
        assert_eq!(p1, p2);
        assert!(p1 > 0.0 && p1 <= 1.0);
    }

    #[test]
    fn mismatched_lengths_error() {
        assert!(matches!(
            approximate_randomization(&[1.0], &[1.0, 2.0], 10, 1),
            Err(EvalError::LengthMismatch { .. })
        ));
    }
}
