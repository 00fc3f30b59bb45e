//! Seeded inputs shared by the benchmarks.

use debias_core::numerics::RandomStream;
use ndarray::Array2;

/// `rows x cols` matrix of standard normal draws.
pub fn normal_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    let mut s = RandomStream::new(seed);
    Array2::from_shape_fn((rows, cols), |_| s.normal())
}

/// Alternating labels, exactly balanced for even `n`.
pub fn alternating_labels(n: usize) -> Vec<bool> {
    (0..n).map(|i| i % 2 == 0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inputs_are_seeded() {
        assert_eq!(normal_matrix(3, 4, 1), normal_matrix(3, 4, 1));
        assert_ne!(normal_matrix(3, 4, 1), normal_matrix(3, 4, 2));
        assert_eq!(alternating_labels(4), vec![true, false, true, false]);
    }
}
