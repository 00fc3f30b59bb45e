use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 2×2 confusion counts with `true` as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        Self { tp, fp, fn_, tn }
    }

    pub fn from_labels(truth: &[bool], predicted: &[bool]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                found: predicted.len(),
            });
        }
        if truth.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut c = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// Same matrix with the class labels exchanged.
    pub fn relabeled(&self) -> Self {
        Self::new(self.tn, self.fn_, self.fp, self.tp)
    }
}

pub fn accuracy(c: &Confusion) -> f64 {
    if c.total() == 0 {
        return 0.0;
    }
    (c.tp + c.tn) as f64 / c.total() as f64
}

/// Matthews correlation; 0 when any marginal is empty.
pub fn mcc(c: &Confusion) -> f64 {
    let (tp, fp, fn_, tn) = (c.tp as f64, c.fp as f64, c.fn_ as f64, c.tn as f64);
    let denom = (tp + fp) * (tp + fn_) * (tn + fp) * (tn + fn_);
    if denom == 0.0 {
        return 0.0;
    }
    (tp * tn - fp * fn_) / denom.sqrt()
}

/// Cohen's kappa with marginal-product chance agreement; 0 when chance
/// agreement is 1.
pub fn cohen_kappa(c: &Confusion) -> f64 {
    let n = c.total() as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p_o = (c.tp + c.tn) as f64 / n;
    let pred_pos = (c.tp + c.fp) as f64 / n;
    let true_pos = (c.tp + c.fn_) as f64 / n;
    let p_e = pred_pos * true_pos + (1.0 - pred_pos) * (1.0 - true_pos);
    if p_e == 1.0 {
        return 0.0;
    }
    (p_o - p_e) / (1.0 - p_e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RandomStream;

    /// Kappa from the full label-pair table, without closed-form marginals.
    #[allow(clippy::needless_range_loop)]
    fn kappa_oracle(c: &Confusion) -> f64 {
        let cells = [[c.tn, c.fp], [c.fn_, c.tp]];
        let n: u64 = cells.iter().flatten().sum();
        let n = n as f64;
        let observed = (0..2).map(|k| cells[k][k] as f64).sum::<f64>() / n;
        let mut chance = 0.0;
        for k in 0..2 {
            let row: u64 = cells[k].iter().sum();
            let col: u64 = (0..2).map(|r| cells[r][k]).sum();
            chance += (row as f64 / n) * (col as f64 / n);
        }
        if chance == 1.0 {
            0.0
        } else {
            (observed - chance) / (1.0 - chance)
        }
    }

    /// MCC as the Pearson correlation of the expanded 0/1 label vectors.
    fn mcc_oracle(c: &Confusion) -> f64 {
        let mut truth = Vec::new();
        let mut pred = Vec::new();
        for (t, p, k) in [
            (1.0, 1.0, c.tp),
            (0.0, 1.0, c.fp),
            (1.0, 0.0, c.fn_),
            (0.0, 0.0, c.tn),
        ] {
            for _ in 0..k {
                truth.push(t);
                pred.push(p);
            }
        }
        let n = truth.len() as f64;
        let mt = truth.iter().sum::<f64>() / n;
        let mp = pred.iter().sum::<f64>() / n;
        let cov: f64 = truth
            .iter()
            .zip(&pred)
            .map(|(t, p)| (t - mt) * (p - mp))
            .sum();
        let vt: f64 = truth.iter().map(|t| (t - mt).powi(2)).sum();
        let vp: f64 = pred.iter().map(|p| (p - mp).powi(2)).sum();
        if vt == 0.0 || vp == 0.0 {
            0.0
        } else {
            cov / (vt * vp).sqrt()
        }
    }

    #[test]
    fn worked_example() {
        let c = Confusion::new(3, 1, 2, 4);
        assert!((mcc(&c) - 10.0 / 600f64.sqrt()).abs() < 1e-15);
        assert!((mcc(&c) - 0.40825).abs() < 1e-5);
        assert!((cohen_kappa(&c) - 0.4).abs() < 1e-12);
        assert!((accuracy(&c) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn perfect_inverted_and_chance() {
        let perfect = Confusion::new(5, 0, 0, 5);
        assert_eq!(mcc(&perfect), 1.0);
        assert_eq!(cohen_kappa(&perfect), 1.0);
        let inverted = Confusion::new(0, 5, 5, 0);
        assert_eq!(mcc(&inverted), -1.0);
        // independent predictions with matching marginals
        let chance = Confusion::new(1, 1, 1, 1);
        assert_eq!(cohen_kappa(&chance), 0.0);
        assert_eq!(mcc(&chance), 0.0);
        let degenerate = Confusion::new(4, 0, 0, 0);
        assert_eq!(mcc(&degenerate), 0.0);
        assert_eq!(cohen_kappa(&degenerate), 0.0);
    }

    #[test]
    fn majority_vote_on_balanced_data_is_half() {
        let truth: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        let c = Confusion::from_labels(&truth, &[true; 10]).unwrap();
        assert_eq!(accuracy(&c), 0.5);
    }

    #[test]
    fn from_labels_counts() {
        let c = Confusion::from_labels(&[true, true, false, false], &[true, false, true, false])
            .unwrap();
        assert_eq!(c, Confusion::new(1, 1, 1, 1));
        assert!(Confusion::from_labels(&[true], &[]).is_err());
        assert!(Confusion::from_labels(&[], &[]).is_err());
    }

    #[test]
    fn brute_force_agreement_on_1000_matrices() {
        let mut s = RandomStream::new(99);
        for _ in 0..1000 {
            let c = Confusion::new(
                s.below(30) as u64,
                s.below(30) as u64,
                s.below(30) as u64,
                s.below(30) as u64 + 1,
            );
            assert!((mcc(&c) - mcc_oracle(&c)).abs() < 1e-12, "{c:?}");
            assert!((cohen_kappa(&c) - kappa_oracle(&c)).abs() < 1e-12, "{c:?}");
            let r = c.relabeled();
            assert!((mcc(&c) - mcc(&r)).abs() < 1e-12);
            assert!((cohen_kappa(&c) - cohen_kappa(&r)).abs() < 1e-12);
            assert!((-1.0..=1.0).contains(&mcc(&c)));
        }
    }
}
