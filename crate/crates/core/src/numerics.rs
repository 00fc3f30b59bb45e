//! Dense-vector primitives and the seeded random stream shared by every module.
//!
//! All arithmetic is `f64`. Vectors are plain slices; callers own storage.

use crate::error::{Error, Result};

pub fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

/// Cosine of the angle between `u` and `v`.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: v.len(),
        });
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::ZeroNormInput);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// `log Σ exp(s)` with a max shift, i.e. the log-denominator of a softmax.
pub fn log_sum_exp(scores: &[f64]) -> Result<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if scores.is_empty() {
        return Err(Error::EmptyInput);
    }
    let sum: f64 = scores.iter().map(|s| (s - max).exp()).sum();
    Ok(max + sum.ln())
}

pub fn mean(xs: &[f64]) -> Result<f64> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Arithmetic mean and sample (n - 1) standard deviation.
pub fn mean_and_sample_std(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "standard deviation needs at least 2 values, got {}",
            xs.len()
        )));
    }
    let m = mean(xs)?;
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    Ok((m, (ss / (xs.len() - 1) as f64).sqrt()))
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based SplitMix64 stream.
///
/// Draw `k` (0-based) is `mix(seed + (k + 1) * 0x9E3779B97F4A7C15)` where `mix`
/// is the SplitMix64 finalizer (shifts 30/27/31, multipliers
/// `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB`). Derived quantities:
///
/// * `uniform`: `(u64 >> 11) * 2^-53`, in `[0, 1)`;
/// * `below(n)`: `(u64 * n) >> 64` (multiply-shift);
/// * `normal`: Box–Muller cosine branch with `u1 = 1 - uniform`, one normal per
///   two draws;
/// * `fork(tag)`: child seed `mix(seed ^ mix(tag + 0x9E3779B97F4A7C15))`.
///
/// Nothing else in the crate draws randomness, so an implementation following
/// this recipe replays every stochastic step bit for bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomStream {
    seed: u64,
    position: u64,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, position: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of 64-bit draws consumed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Independent child stream; does not advance `self`.
    pub fn fork(&self, tag: u64) -> RandomStream {
        let child =
            splitmix_finalize(self.seed ^ splitmix_finalize(tag.wrapping_add(GOLDEN_GAMMA)));
        RandomStream::new(child)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.position += 1;
        splitmix_finalize(
            self.seed
                .wrapping_add(self.position.wrapping_mul(GOLDEN_GAMMA)),
        )
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Standard logistic variate.
    pub fn logistic(&mut self) -> f64 {
        let u = 1.0 - self.uniform();
        let u = u.min(1.0 - f64::EPSILON);
        (u / (1.0 - u)).ln()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Fisher–Yates, walking from the back.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }

    /// `k` distinct indices from `0..n`, in draw order (partial Fisher–Yates).
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let k = k.min(n);
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        let u = [1.0, 2.0, 3.0];
        assert!((cosine_similarity(&u, &u).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((c - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn cosine_rejects_zero_norm_and_mismatch() {
        assert!(matches!(
            cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]),
            Err(Error::ZeroNormInput)
        ));
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn log_sum_exp_examples() {
        assert!((log_sum_exp(&[0.0, 0.0, 0.0]).unwrap() - 3f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[5.0]).unwrap(), 5.0);
        // direct summation at full precision
        let direct = (1f64.exp() + 2.0).ln();
        assert!((log_sum_exp(&[1.0, 0.0, 0.0]).unwrap() - direct).abs() < 1e-15);
        assert!((direct - 1.551_444_7).abs() < 1e-7);
        assert!(matches!(log_sum_exp(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn log_sum_exp_does_not_overflow_at_small_temperature() {
        // cosine scores divided by tau = 0.01
        let v = log_sum_exp(&[100.0, 99.0, -100.0]).unwrap();
        assert!(v.is_finite());
        assert!((v - (100.0 + (1.0 + (-1f64).exp() + (-200f64).exp()).ln())).abs() < 1e-12);
    }

    #[test]
    fn mean_std_examples() {
        let (m, s) = mean_and_sample_std(&[1.0, 0.0]).unwrap();
        assert_eq!(m, 0.5);
        assert!((s - 0.5f64.sqrt()).abs() < 1e-15);
        let (m, s) = mean_and_sample_std(&[3.25; 3]).unwrap();
        assert_eq!((m, s), (3.25, 0.0));
        // brute force: sqrt(((1.5^2 + 0.5^2) * 2) / 3)
        let (m, s) = mean_and_sample_std(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert!((s - 1.290_994_4).abs() < 1e-7);
        assert!(matches!(
            mean_and_sample_std(&[1.0]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn splitmix_reference_values() {
        // Reference SplitMix64 sequence for seed 0 (Vigna's splitmix64.c).
        let mut s = RandomStream::new(0);
        assert_eq!(s.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(s.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(s.position(), 2);
    }

    #[test]
    fn equal_seeds_give_identical_million_draws() {
        let mut a = RandomStream::new(42);
        let mut b = RandomStream::new(42);
        for _ in 0..1_000_000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn forks_are_distinct_and_stable() {
        let s = RandomStream::new(7);
        assert_eq!(s.fork(1), s.fork(1));
        assert_ne!(s.fork(1).seed(), s.fork(2).seed());
        assert_eq!(s.position(), 0);
    }

    #[test]
    fn sample_indices_are_distinct() {
        let mut s = RandomStream::new(3);
        let mut idx = s.sample_indices(50, 20);
        assert_eq!(idx.len(), 20);
        idx.sort_unstable();
        idx.dedup();
        assert_eq!(idx.len(), 20);
        assert!(idx.iter().all(|&i| i < 50));
    }

    #[test]
    fn normal_moments() {
        let mut s = RandomStream::new(11);
        let xs: Vec<f64> = (0..200_000).map(|_| s.normal()).collect();
        let (m, sd) = mean_and_sample_std(&xs).unwrap();
        assert!(m.abs() < 0.01, "{m}");
        assert!((sd - 1.0).abs() < 0.01, "{sd}");
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..12).prop_flat_map(|n| {
            (
                prop::collection::vec(-10.0f64..10.0, n),
                prop::collection::vec(-10.0f64..10.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn cosine_symmetric_and_scale_invariant((u, v) in vec_pair(), a in 0.01f64..100.0, b in 0.01f64..100.0) {
            prop_assume!(norm(&u) > 1e-6 && norm(&v) > 1e-6);
            let c = cosine_similarity(&u, &v).unwrap();
            prop_assert!((c - cosine_similarity(&v, &u).unwrap()).abs() < 1e-12);
            let su: Vec<f64> = u.iter().map(|x| a * x).collect();
            let sv: Vec<f64> = v.iter().map(|x| b * x).collect();
            prop_assert!((c - cosine_similarity(&su, &sv).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&c));
        }

        #[test]
        fn log_sum_exp_shift(scores in prop::collection::vec(-100.0f64..100.0, 1..20), c in -50.0f64..50.0) {
            let shifted: Vec<f64> = scores.iter().map(|s| s + c).collect();
            let lhs = log_sum_exp(&shifted).unwrap();
            let rhs = log_sum_exp(&scores).unwrap() + c;
            prop_assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        }
    }
}
