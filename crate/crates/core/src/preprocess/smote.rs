use ndarray::{Array2, ArrayView2, Axis};

use crate::dataset::{FeatureTable, Provenance, Record, SensitiveAttribute};
use crate::error::{Error, Result};
use crate::numerics::RandomStream;

pub const SMOTE_DEFAULT_K: usize = 5;

/// One oversampled row: `seed + lambda * (neighbor - seed)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRow {
    pub seed: usize,
    pub neighbor: usize,
    pub lambda: f64,
    pub values: Vec<f64>,
}

/// `k` nearest same-class neighbours (Euclidean, ties to the lower index) of
/// every row of `points`, excluding the row itself.
fn nearest_neighbors(points: ArrayView2<f64>, k: usize) -> Vec<Vec<usize>> {
    let gram = points.dot(&points.t());
    let sq: Vec<f64> = gram.diag().to_vec();
    let m = points.nrows();
    (0..m)
        .map(|i| {
            let mut cand: Vec<(f64, usize)> = (0..m)
                .filter(|&j| j != i)
                .map(|j| ((sq[i] + sq[j] - 2.0 * gram[[i, j]]).max(0.0), j))
                .collect();
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cand.truncate(k);
            cand.into_iter().map(|(_, j)| j).collect()
        })
        .collect()
}

/// Synthetic minority rows that bring `labels` to parity. Returned rows index
/// into `features`; an already balanced input yields nothing.
pub fn smote_rows(
    features: ArrayView2<f64>,
    labels: &[bool],
    k: usize,
    stream: &mut RandomStream,
) -> Result<Vec<SyntheticRow>> {
    if features.nrows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.nrows(),
            found: labels.len(),
        });
    }
    let positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let negatives: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    let (minority, majority) = if positives.len() < negatives.len() {
        (positives, negatives)
    } else {
        (negatives, positives)
    };
    let needed = majority.len() - minority.len();
    if needed == 0 {
        return Ok(Vec::new());
    }
    if minority.len() <= k {
        return Err(Error::TooFewMinoritySamples {
            found: minority.len(),
            k,
        });
    }
    let points = features.select(Axis(0), &minority);
    let neighbors = nearest_neighbors(points.view(), k);
    let mut out = Vec::with_capacity(needed);
    for _ in 0..needed {
        let s = stream.below(minority.len());
        let nn = neighbors[s][stream.below(k)];
        let lambda = stream.uniform();
        let (a, b) = (points.row(s), points.row(nn));
        let values = a.iter().zip(b).map(|(x, y)| x + lambda * (y - x)).collect();
        out.push(SyntheticRow {
            seed: minority[s],
            neighbor: minority[nn],
            lambda,
            values,
        });
    }
    Ok(out)
}

/// Oversamples the minority class of `attribute` up to the majority size.
///
/// The input records come first, unchanged; each synthetic record copies its
/// seed record's labels and phenotypes and gets the id `<seed id>~smote<n>`.
pub fn smote(
    table: &FeatureTable,
    attribute: SensitiveAttribute,
    k: usize,
    stream: &mut RandomStream,
) -> Result<FeatureTable> {
    let labels: Vec<bool> = table
        .classes(attribute)
        .iter()
        .map(|c| c.is_first())
        .collect();
    let matrix: Array2<f64> = table.feature_matrix();
    let synthetic = smote_rows(matrix.view(), &labels, k, stream)?;
    if synthetic.is_empty() {
        return Ok(table.clone());
    }
    let mut records = table.records().to_vec();
    for (n, row) in synthetic.into_iter().enumerate() {
        let seed: &Record = &table.records()[row.seed];
        records.push(Record {
            record_id: format!("{}~smote{n}", seed.record_id),
            features: row.values,
            ..seed.clone()
        });
    }
    FeatureTable::new(
        records,
        Provenance::Derived {
            description: format!(
                "SMOTE-balanced on {attribute} (k = {k}, seed {})",
                stream.seed()
            ),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Ethnicity, Gender, PHENOTYPES};
    use proptest::prelude::*;

    fn table(n_h: usize, n_n: usize, dim: usize, seed: u64) -> FeatureTable {
        let mut s = RandomStream::new(seed);
        let records = (0..n_h + n_n)
            .map(|i| Record {
                record_id: format!("r{i}"),
                features: (0..dim).map(|_| s.normal()).collect(),
                gender: Gender::Male,
                ethnicity: if i < n_h {
                    Ethnicity::Hispanic
                } else {
                    Ethnicity::NonHispanic
                },
                los_class: 3,
                dx_phenotypes: [0; PHENOTYPES],
                proc_phenotypes: [1; PHENOTYPES],
            })
            .collect();
        FeatureTable::new(
            records,
            Provenance::Derived {
                description: "t".into(),
            },
        )
        .unwrap()
    }

    #[test]
    fn balanced_table_is_unchanged() {
        let t = table(10, 10, 3, 0);
        let out = smote(
            &t,
            SensitiveAttribute::Ethnicity,
            5,
            &mut RandomStream::new(1),
        )
        .unwrap();
        assert_eq!(out, t);
    }

    #[test]
    fn cohort_ethnicity_counts_balance() {
        let t = table(510, 1919, 4, 2);
        let out = smote(
            &t,
            SensitiveAttribute::Ethnicity,
            5,
            &mut RandomStream::new(3),
        )
        .unwrap();
        let hispanic = out
            .records()
            .iter()
            .filter(|r| r.ethnicity == Ethnicity::Hispanic)
            .count();
        assert_eq!(hispanic, 1919);
        assert_eq!(out.len(), 2 * 1919);
        assert_eq!(&out.records()[..t.len()], t.records());
    }

    #[test]
    fn too_few_minority_rows() {
        let t = table(5, 20, 2, 0);
        assert!(matches!(
            smote(
                &t,
                SensitiveAttribute::Ethnicity,
                5,
                &mut RandomStream::new(0)
            ),
            Err(Error::TooFewMinoritySamples { found: 5, k: 5 })
        ));
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn neighbours_match_brute_force() {
        let t = table(30, 0, 5, 8);
        let m = t.feature_matrix();
        let nn = nearest_neighbors(m.view(), 3);
        for i in 0..30 {
            let mut d: Vec<(f64, usize)> = (0..30)
                .filter(|&j| j != i)
                .map(|j| {
                    let s: f64 = t.records()[i]
                        .features
                        .iter()
                        .zip(&t.records()[j].features)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (s, j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0));
            let want: Vec<usize> = d[..3].iter().map(|p| p.1).collect();
            assert_eq!(nn[i], want);
        }
    }

    proptest! {
        #[test]
        fn balanced_prefix_preserving_and_convex(
            seed in any::<u64>(),
            k in 1usize..5,
            extra in 1usize..8,
            majority in 15usize..30,
            dim in 1usize..5,
        ) {
            let t = table(k + extra, majority, dim, seed);
            let out = smote(&t, SensitiveAttribute::Ethnicity, k, &mut RandomStream::new(seed ^ 1)).unwrap();
            let hispanic = out.records().iter().filter(|r| r.ethnicity == Ethnicity::Hispanic).count();
            prop_assert_eq!(2 * hispanic, out.len());
            prop_assert_eq!(&out.records()[..t.len()], t.records());

            let x = t.feature_matrix();
            let labels: Vec<bool> = t.records().iter().map(|r| r.ethnicity == Ethnicity::Hispanic).collect();
            for row in smote_rows(x.view(), &labels, k, &mut RandomStream::new(seed)).unwrap() {
                prop_assert!(labels[row.seed] && labels[row.neighbor] && row.seed != row.neighbor);
                prop_assert!((0.0..=1.0).contains(&row.lambda));
                for (j, v) in row.values.iter().enumerate() {
                    let (a, b) = (x[[row.seed, j]], x[[row.neighbor, j]]);
                    prop_assert!((v - (a + row.lambda * (b - a))).abs() < 1e-12);
                }
            }
        }
    }
}
