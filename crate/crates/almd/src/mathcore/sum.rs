//! Pairwise (tree) summation.

/// Sum `values` by recursive halving. Rounding error grows like O(log n)
/// instead of O(n), which keeps frame-averaged losses and long-trajectory
/// statistics stable.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise mean; 0.0 for an empty slice.
pub fn pairwise_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    pairwise_sum(values) / values.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_on_small_input() {
        let v = [1.0, 2.0, 3.5, -0.5];
        assert_eq!(pairwise_sum(&v), 6.0);
    }

    #[test]
    fn large_alternating_sum_is_exact_for_representable_values() {
        // 1 + 2⁻³⁰ and −1 interleave; every partial sum is representable, so
        // the tree sum must reproduce n·2⁻³⁰ exactly.
        let n = 100_000;
        let eps = (2.0f64).powi(-30);
        let mut v = Vec::with_capacity(2 * n);
        for _ in 0..n {
            v.push(1.0 + eps);
            v.push(-1.0);
        }
        assert_eq!(pairwise_sum(&v), n as f64 * eps);
    }

    #[test]
    fn beats_naive_summation_on_repeated_decimals() {
        // Σ of a million copies of fl(0.1); the true value is 10⁶·fl(0.1).
        let v = vec![0.1f64; 1_000_000];
        let reference = 1.0e6 * 0.1;
        let tree_err = (pairwise_sum(&v) - reference).abs();
        let naive_err = (v.iter().sum::<f64>() - reference).abs();
        assert!(tree_err < 1e-9, "tree error {tree_err}");
        assert!(tree_err < naive_err, "{tree_err} vs naive {naive_err}");
    }
}
