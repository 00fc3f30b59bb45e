use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mi::mutual_information;
use crate::dataset::{AttributeClass, FeatureTable, SensitiveAttribute};
use crate::error::{Error, Result};

/// Top-half mutual-information features for one attribute, with the per-class
/// means of those features used to build counterfactual positives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitiveProfile {
    pub attribute: SensitiveAttribute,
    /// Feature dimension of the table the profile was computed on.
    pub dim: usize,
    /// Sorted, unique.
    pub sensitive_indices: Vec<usize>,
    /// One score per feature, in bits. Empty for hand-built profiles.
    pub mi_scores: Vec<f64>,
    /// Mean of each sensitive feature over first-class records.
    pub class1_means: Vec<f64>,
    /// Mean of each sensitive feature over second-class records.
    pub class2_means: Vec<f64>,
}

impl SensitiveProfile {
    /// Builds a profile from explicit parts, checking shapes.
    pub fn new(
        attribute: SensitiveAttribute,
        dim: usize,
        mut sensitive_indices: Vec<usize>,
        class1_means: Vec<f64>,
        class2_means: Vec<f64>,
    ) -> Result<Self> {
        let pairs = {
            let mut p: Vec<(usize, f64, f64)> = sensitive_indices
                .iter()
                .zip(class1_means.iter().zip(&class2_means))
                .map(|(&i, (&a, &b))| (i, a, b))
                .collect();
            p.sort_by_key(|t| t.0);
            p
        };
        if class1_means.len() != sensitive_indices.len()
            || class2_means.len() != sensitive_indices.len()
        {
            return Err(Error::DimensionMismatch {
                expected: sensitive_indices.len(),
                found: class1_means.len().min(class2_means.len()),
            });
        }
        sensitive_indices.sort_unstable();
        if sensitive_indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig(
                "sensitive indices must be unique".into(),
            ));
        }
        if let Some(&max) = sensitive_indices.last() {
            if max >= dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: max + 1,
                });
            }
        }
        Ok(Self {
            attribute,
            dim,
            sensitive_indices,
            mi_scores: Vec::new(),
            class1_means: pairs.iter().map(|t| t.1).collect(),
            class2_means: pairs.iter().map(|t| t.2).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.sensitive_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensitive_indices.is_empty()
    }

    /// Means of the opposite class, i.e. the values a counterfactual takes.
    pub fn counterfactual_means(&self, class: AttributeClass) -> &[f64] {
        match class {
            AttributeClass::First => &self.class2_means,
            AttributeClass::Second => &self.class1_means,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let p: SensitiveProfile = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        if p.class1_means.len() != p.len() || p.class2_means.len() != p.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                found: p.class1_means.len(),
            });
        }
        Ok(p)
    }
}

/// Ranks features by mutual information with `attribute` (ties to the lower
/// index), keeps the top `floor(D / 2)` and records both class means.
pub fn select_sensitive_features(
    table: &FeatureTable,
    attribute: SensitiveAttribute,
) -> Result<SensitiveProfile> {
    let dim = table.dim();
    let labels: Vec<bool> = table
        .classes(attribute)
        .iter()
        .map(|c| c.is_first())
        .collect();
    let mut column = vec![0.0; table.len()];
    let mut mi_scores = Vec::with_capacity(dim);
    for j in 0..dim {
        for (c, r) in column.iter_mut().zip(table.records()) {
            *c = r.features[j];
        }
        mi_scores.push(mutual_information(&column, &labels)?);
    }
    let mut ranked: Vec<usize> = (0..dim).collect();
    ranked.sort_by(|&a, &b| mi_scores[b].total_cmp(&mi_scores[a]).then(a.cmp(&b)));
    let mut sensitive_indices = ranked[..dim / 2].to_vec();
    sensitive_indices.sort_unstable();

    let mut sums = [
        vec![0.0; sensitive_indices.len()],
        vec![0.0; sensitive_indices.len()],
    ];
    let mut counts = [0usize; 2];
    for (r, &first) in table.records().iter().zip(&labels) {
        let side = usize::from(!first);
        counts[side] += 1;
        for (s, &j) in sums[side].iter_mut().zip(&sensitive_indices) {
            *s += r.features[j];
        }
    }
    let [class1_means, class2_means] = [0, 1].map(|side| {
        sums[side]
            .iter()
            .map(|s| s / counts[side] as f64)
            .collect::<Vec<_>>()
    });
    Ok(SensitiveProfile {
        attribute,
        dim,
        sensitive_indices,
        mi_scores,
        class1_means,
        class2_means,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Ethnicity, Gender, Provenance, Record, PHENOTYPES};
    use crate::numerics::RandomStream;

    fn table_from(rows: Vec<(Vec<f64>, Gender)>) -> FeatureTable {
        let records = rows
            .into_iter()
            .enumerate()
            .map(|(i, (features, gender))| Record {
                record_id: format!("r{i}"),
                features,
                gender,
                ethnicity: Ethnicity::NonHispanic,
                los_class: 1,
                dx_phenotypes: [0; PHENOTYPES],
                proc_phenotypes: [0; PHENOTYPES],
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
    fn selects_half_of_the_features() {
        let mut s = RandomStream::new(1);
        let rows = (0..60)
            .map(|i| {
                let g = if i % 2 == 0 {
                    Gender::Female
                } else {
                    Gender::Male
                };
                ((0..10).map(|_| s.normal()).collect(), g)
            })
            .collect();
        let p = select_sensitive_features(&table_from(rows), SensitiveAttribute::Gender).unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(p.mi_scores.len(), 10);
        assert!(p.sensitive_indices.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(p.class1_means.len(), 5);
    }

    #[test]
    fn informative_features_rank_first_and_means_are_arithmetic() {
        // feature 1 and 3 carry the label; 0 and 2 are constant.
        let rows: Vec<(Vec<f64>, Gender)> = (0..40)
            .map(|i| {
                let female = i % 2 == 0;
                let v = if female { 1.0 } else { 0.0 } + (i / 2) as f64 * 1e-3;
                (
                    vec![7.0, v, 7.0, 2.0 * v],
                    if female { Gender::Female } else { Gender::Male },
                )
            })
            .collect();
        let t = table_from(rows);
        let p = select_sensitive_features(&t, SensitiveAttribute::Gender).unwrap();
        assert_eq!(p.sensitive_indices, vec![1, 3]);
        let female: Vec<f64> = (0..20).map(|k| 1.0 + k as f64 * 1e-3).collect();
        let m = female.iter().sum::<f64>() / 20.0;
        assert!((p.class1_means[0] - m).abs() < 1e-12);
        assert!((p.class1_means[1] - 2.0 * m).abs() < 1e-12);
    }

    #[test]
    fn two_class1_rows_mean() {
        // class-1 rows (0,2) and (2,4) on the sensitive columns average to (1,3)
        let p = SensitiveProfile::new(
            SensitiveAttribute::Gender,
            4,
            vec![0, 2],
            vec![(0.0 + 2.0) / 2.0, (2.0 + 4.0) / 2.0],
            vec![0.0, 0.0],
        )
        .unwrap();
        assert_eq!(p.class1_means, vec![1.0, 3.0]);
    }

    #[test]
    fn profile_save_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let p = SensitiveProfile::new(
            SensitiveAttribute::Ethnicity,
            6,
            vec![5, 1],
            vec![0.5, -0.25],
            vec![1.0, 2.0],
        )
        .unwrap();
        assert_eq!(p.sensitive_indices, vec![1, 5]);
        assert_eq!(p.class1_means, vec![-0.25, 0.5]);
        p.save(&path).unwrap();
        assert_eq!(SensitiveProfile::load(&path).unwrap(), p);
    }
}
