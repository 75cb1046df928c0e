//! Index-ordered pairwise summation with compensated leaves.
//!
//! The split points depend only on the length, so the result is bit-identical
//! for a given input regardless of how the terms were produced.

const LEAF: usize = 64;

/// Sum of `term(0) + … + term(len - 1)`.
pub fn pairwise_sum_by(len: usize, term: impl Fn(usize) -> f64 + Copy) -> f64 {
    sum_range(0, len, term)
}

pub fn pairwise_sum(values: &[f64]) -> f64 {
    pairwise_sum_by(values.len(), |k| values[k])
}

/// Arithmetic mean; `NaN` for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    pairwise_sum(values) / values.len() as f64
}

fn sum_range(start: usize, end: usize, term: impl Fn(usize) -> f64 + Copy) -> f64 {
    if end - start <= LEAF {
        // Neumaier
        let mut sum = 0.0f64;
        let mut compensation = 0.0f64;
        for k in start..end {
            let v = term(k);
            let t = sum + v;
            if sum.abs() >= v.abs() {
                compensation += (sum - t) + v;
            } else {
                compensation += (v - t) + sum;
            }
            sum = t;
        }
        return sum + compensation;
    }
    let mid = start + (end - start) / 2;
    sum_range(start, mid, term) + sum_range(mid, end, term)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sums() {
        assert_eq!(pairwise_sum(&[]), 0.0);
        assert_eq!(pairwise_sum(&[1.0, 2.0, 3.5]), 6.5);
        assert_eq!(mean(&[1.0, 2.0, 3.0, 4.0]), 2.5);
    }

    #[test]
    fn compensates_cancellation() {
        let values = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(pairwise_sum(&values), 2.0);
    }

    #[test]
    fn accurate_for_long_sums() {
        let values = vec![0.1; 1_000_000];
        let s = pairwise_sum(&values);
        assert!((s - 100_000.0).abs() < 1e-9, "{s}");
    }
}
