//! Records, tables and the synthetic cohort generator.

mod io;
mod split;
mod synth;

pub use io::{
    load_embeddings_for, load_table, read_manifest, write_embeddings, write_manifest, write_table,
    TableManifest,
};
pub use split::split;
pub use synth::{generate_synthetic, SynthConfig};

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of phenotype bits in each of the two one-hot blocks.
pub const PHENOTYPES: usize = 12;

pub type PhenotypeBits = [u8; PHENOTYPES];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    Female,
    Male,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ethnicity {
    Hispanic,
    NonHispanic,
}

/// Protected attribute a debiaser is trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitiveAttribute {
    Gender,
    Ethnicity,
}

impl SensitiveAttribute {
    pub const ALL: [SensitiveAttribute; 2] =
        [SensitiveAttribute::Gender, SensitiveAttribute::Ethnicity];

    pub fn name(self) -> &'static str {
        match self {
            SensitiveAttribute::Gender => "gender",
            SensitiveAttribute::Ethnicity => "ethnicity",
        }
    }
}

impl fmt::Display for SensitiveAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SensitiveAttribute {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gender" => Ok(SensitiveAttribute::Gender),
            "ethnicity" => Ok(SensitiveAttribute::Ethnicity),
            other => Err(Error::InvalidConfig(format!("unknown attribute `{other}`"))),
        }
    }
}

/// Which side of a binary attribute a record is on. `First` is female for
/// gender and Hispanic for ethnicity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AttributeClass {
    First,
    Second,
}

impl AttributeClass {
    pub fn is_first(self) -> bool {
        self == AttributeClass::First
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LosBinary {
    Short,
    Long,
}

/// Collapses the five length-of-stay classes: 1 and 2 are short, 3 to 5 long.
pub fn binarize_los(los_class: i64) -> Result<LosBinary> {
    match los_class {
        1 | 2 => Ok(LosBinary::Short),
        3..=5 => Ok(LosBinary::Long),
        other => Err(Error::InvalidClass(other)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub record_id: String,
    pub features: Vec<f64>,
    pub gender: Gender,
    pub ethnicity: Ethnicity,
    pub los_class: u8,
    pub dx_phenotypes: PhenotypeBits,
    pub proc_phenotypes: PhenotypeBits,
}

impl Record {
    pub fn attribute_class(&self, attribute: SensitiveAttribute) -> AttributeClass {
        match attribute {
            SensitiveAttribute::Gender => match self.gender {
                Gender::Female => AttributeClass::First,
                Gender::Male => AttributeClass::Second,
            },
            SensitiveAttribute::Ethnicity => match self.ethnicity {
                Ethnicity::Hispanic => AttributeClass::First,
                Ethnicity::NonHispanic => AttributeClass::Second,
            },
        }
    }

    pub fn los_binary(&self) -> LosBinary {
        binarize_los(self.los_class as i64).expect("validated at table construction")
    }

    pub fn is_long_stay(&self) -> bool {
        self.los_binary() == LosBinary::Long
    }
}

/// Where a table came from. Synthetic tables carry the generator's ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum Provenance {
    File {
        path: String,
    },
    Synthetic {
        config: SynthConfig,
        gender_biased: Vec<usize>,
        ethnicity_biased: Vec<usize>,
        clinical: Vec<usize>,
    },
    Derived {
        description: String,
    },
}

impl Provenance {
    /// Ground-truth biased feature indices for `attribute`, synthetic tables only.
    pub fn biased_indices(&self, attribute: SensitiveAttribute) -> Option<&[usize]> {
        match self {
            Provenance::Synthetic {
                gender_biased,
                ethnicity_biased,
                ..
            } => Some(match attribute {
                SensitiveAttribute::Gender => gender_biased,
                SensitiveAttribute::Ethnicity => ethnicity_biased,
            }),
            _ => None,
        }
    }
}

/// Immutable, validated collection of records with a common feature dimension.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    records: Vec<Record>,
    dim: usize,
    provenance: Provenance,
}

/// Tables compare by content; provenance is metadata.
impl PartialEq for FeatureTable {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.records == other.records
    }
}

impl FeatureTable {
    pub fn new(records: Vec<Record>, provenance: Provenance) -> Result<Self> {
        let Some(first) = records.first() else {
            return Err(Error::InsufficientData(
                "feature table has no records".into(),
            ));
        };
        let dim = first.features.len();
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: r.features.len(),
                });
            }
            if !seen.insert(r.record_id.as_str()) {
                return Err(Error::DuplicateRecordId(r.record_id.clone()));
            }
            binarize_los(r.los_class as i64)?;
            if r.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "record `{}` has a non-finite feature",
                    r.record_id
                )));
            }
            if r.dx_phenotypes
                .iter()
                .chain(&r.proc_phenotypes)
                .any(|&b| b > 1)
            {
                return Err(Error::InvalidConfig(format!(
                    "record `{}` has a phenotype bit outside 0/1",
                    r.record_id
                )));
            }
        }
        Ok(Self {
            records,
            dim,
            provenance,
        })
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }

    /// Row-major `n × dim` copy of the features.
    pub fn feature_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.len(), self.dim));
        for (mut row, r) in m.rows_mut().into_iter().zip(&self.records) {
            row.iter_mut().zip(&r.features).for_each(|(d, s)| *d = *s);
        }
        m
    }

    /// Features restricted to `columns`, in the given order.
    pub fn column_matrix(&self, columns: &[usize]) -> Array2<f64> {
        let mut m = Array2::zeros((self.len(), columns.len()));
        for (mut row, r) in m.rows_mut().into_iter().zip(&self.records) {
            for (d, &c) in row.iter_mut().zip(columns) {
                *d = r.features[c];
            }
        }
        m
    }

    pub fn classes(&self, attribute: SensitiveAttribute) -> Vec<AttributeClass> {
        self.records
            .iter()
            .map(|r| r.attribute_class(attribute))
            .collect()
    }

    pub fn record_ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.record_id.as_str()).collect()
    }

    /// New table with the records at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize], provenance: Provenance) -> Result<FeatureTable> {
        let records = indices.iter().map(|&i| self.records[i].clone()).collect();
        FeatureTable::new(records, provenance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn record(id: &str, features: Vec<f64>, gender: Gender) -> Record {
        Record {
            record_id: id.into(),
            features,
            gender,
            ethnicity: Ethnicity::NonHispanic,
            los_class: 2,
            dx_phenotypes: [0; PHENOTYPES],
            proc_phenotypes: [0; PHENOTYPES],
        }
    }

    #[test]
    fn binarize_examples() {
        assert_eq!(binarize_los(1).unwrap(), LosBinary::Short);
        assert_eq!(binarize_los(2).unwrap(), LosBinary::Short);
        assert_eq!(binarize_los(3).unwrap(), LosBinary::Long);
        assert_eq!(binarize_los(5).unwrap(), LosBinary::Long);
        assert!(matches!(binarize_los(0), Err(Error::InvalidClass(0))));
        assert!(matches!(binarize_los(6), Err(Error::InvalidClass(6))));
    }

    #[test]
    fn table_validation() {
        let p = || Provenance::Derived {
            description: "test".into(),
        };
        assert!(FeatureTable::new(vec![], p()).is_err());
        let dup = vec![
            record("a", vec![1.0], Gender::Male),
            record("a", vec![2.0], Gender::Male),
        ];
        assert!(matches!(
            FeatureTable::new(dup, p()),
            Err(Error::DuplicateRecordId(_))
        ));
        let ragged = vec![
            record("a", vec![1.0], Gender::Male),
            record("b", vec![2.0, 3.0], Gender::Male),
        ];
        assert!(matches!(
            FeatureTable::new(ragged, p()),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut bad = record("a", vec![1.0], Gender::Male);
        bad.los_class = 6;
        assert!(matches!(
            FeatureTable::new(vec![bad], p()),
            Err(Error::InvalidClass(6))
        ));
    }

    #[test]
    fn attribute_classes() {
        let mut r = record("a", vec![0.0], Gender::Female);
        assert_eq!(
            r.attribute_class(SensitiveAttribute::Gender),
            AttributeClass::First
        );
        assert_eq!(
            r.attribute_class(SensitiveAttribute::Ethnicity),
            AttributeClass::Second
        );
        r.ethnicity = Ethnicity::Hispanic;
        assert_eq!(
            r.attribute_class(SensitiveAttribute::Ethnicity),
            AttributeClass::First
        );
    }
}
