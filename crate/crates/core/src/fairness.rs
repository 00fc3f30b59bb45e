//! WEAT association statistics and the single-category SC-WEAT effect size.
//!
//! Vector sets are matrices with one vector per row.

use std::fmt;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::{FeatureTable, SensitiveAttribute, PHENOTYPES};
use crate::error::{Error, Result};
use crate::numerics::mean_and_sample_std;
use crate::trainer::EmbeddingVariant;

/// Below this the effect-size denominator is reported as collapsed.
pub const MIN_STD: f64 = 1e-12;

fn check_sets(sets: &[ArrayView2<f64>]) -> Result<usize> {
    let dim = sets[0].ncols();
    for s in sets {
        if s.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        if s.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: s.ncols(),
            });
        }
    }
    Ok(dim)
}

/// Rows scaled to unit length; zero rows are an error.
fn unit_rows(m: ArrayView2<f64>) -> Result<Array2<f64>> {
    let mut out = m.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let n = row.dot(&row).sqrt();
        if n == 0.0 {
            return Err(Error::ZeroNormInput);
        }
        row /= n;
    }
    Ok(out)
}

fn mean_cosine(w: &Array1<f64>, set: &Array2<f64>) -> f64 {
    set.dot(w).mean().expect("non-empty set")
}

/// `s(w, A1, A2)`: mean cosine of `w` to `A1` minus mean cosine to `A2`.
pub fn association(w: ArrayView1<f64>, a1: ArrayView2<f64>, a2: ArrayView2<f64>) -> Result<f64> {
    let dim = check_sets(&[a1, a2])?;
    if w.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: w.len(),
        });
    }
    let wn = w.dot(&w).sqrt();
    if wn == 0.0 {
        return Err(Error::ZeroNormInput);
    }
    let w = &w / wn;
    Ok(mean_cosine(&w, &unit_rows(a1)?) - mean_cosine(&w, &unit_rows(a2)?))
}

/// Two-target WEAT statistic `Σ_{x∈T1} s(x, A1, A2) − Σ_{y∈T2} s(y, A1, A2)`.
pub fn weat_statistic(
    t1: ArrayView2<f64>,
    t2: ArrayView2<f64>,
    a1: ArrayView2<f64>,
    a2: ArrayView2<f64>,
) -> Result<f64> {
    check_sets(&[t1, t2, a1, a2])?;
    let sum = |t: ArrayView2<f64>| -> Result<f64> {
        t.axis_iter(Axis(0)).map(|x| association(x, a1, a2)).sum()
    };
    Ok(sum(t1)? - sum(t2)?)
}

/// SC-WEAT effect size of targets `T` between attribute sets `A1` and `A2`:
/// `(mean_1 − mean_2) / std`, where `mean_k` averages `cos(w, a)` over all
/// `w ∈ T`, `a ∈ Ak` and `std` is the sample deviation of `cos(w, x)` over all
/// `w ∈ T`, `x ∈ A1 ∪ A2`. Positive values lean towards `A1`.
pub fn sc_weat_effect_size(
    targets: ArrayView2<f64>,
    a1: ArrayView2<f64>,
    a2: ArrayView2<f64>,
) -> Result<f64> {
    check_sets(&[targets, a1, a2])?;
    let t = unit_rows(targets)?;
    let c1 = unit_rows(a1)?.dot(&t.t());
    let c2 = unit_rows(a2)?.dot(&t.t());
    let all: Vec<f64> = c1.iter().chain(c2.iter()).copied().collect();
    let (_, std) = mean_and_sample_std(&all)?;
    if std.is_nan() || std < MIN_STD {
        return Err(Error::ZeroVariance(std));
    }
    let m1 = c1.mean().expect("non-empty");
    let m2 = c2.mean().expect("non-empty");
    Ok((m1 - m2) / std)
}

/// Which one-hot phenotype block supplies the targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetBlock {
    DiagnosticCodes,
    ProcedureReports,
}

impl TargetBlock {
    pub const ALL: [TargetBlock; 2] = [TargetBlock::DiagnosticCodes, TargetBlock::ProcedureReports];

    pub fn name(self) -> &'static str {
        match self {
            TargetBlock::DiagnosticCodes => "diagnostic_codes",
            TargetBlock::ProcedureReports => "procedure_reports",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TargetBlock::DiagnosticCodes => "Diagnostic codes",
            TargetBlock::ProcedureReports => "Procedure reports",
        }
    }
}

impl fmt::Display for TargetBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Target vectors living in the audited space: one centroid per phenotype
/// that has at least one member.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSet {
    pub block: TargetBlock,
    pub phenotypes: Vec<usize>,
    pub vectors: Array2<f64>,
}

impl TargetSet {
    /// Phenotype centroids of `embeddings`, whose rows follow `table`.
    pub fn centroids(
        table: &FeatureTable,
        embeddings: ArrayView2<f64>,
        block: TargetBlock,
    ) -> Result<Self> {
        if embeddings.nrows() != table.len() {
            return Err(Error::DimensionMismatch {
                expected: table.len(),
                found: embeddings.nrows(),
            });
        }
        let dim = embeddings.ncols();
        let mut sums = Array2::<f64>::zeros((PHENOTYPES, dim));
        let mut counts = [0usize; PHENOTYPES];
        for (r, row) in table.records().iter().zip(embeddings.axis_iter(Axis(0))) {
            let bits = match block {
                TargetBlock::DiagnosticCodes => &r.dx_phenotypes,
                TargetBlock::ProcedureReports => &r.proc_phenotypes,
            };
            for (p, &b) in bits.iter().enumerate() {
                if b == 1 {
                    counts[p] += 1;
                    sums.row_mut(p).scaled_add(1.0, &row);
                }
            }
        }
        let phenotypes: Vec<usize> = (0..PHENOTYPES).filter(|&p| counts[p] > 0).collect();
        if phenotypes.is_empty() {
            return Err(Error::InsufficientData(format!(
                "no record carries a {block} phenotype"
            )));
        }
        let mut vectors = Array2::zeros((phenotypes.len(), dim));
        for (k, &p) in phenotypes.iter().enumerate() {
            vectors
                .row_mut(k)
                .assign(&(&sums.row(p) / counts[p] as f64));
        }
        Ok(Self {
            block,
            phenotypes,
            vectors,
        })
    }
}

/// Rows of `embeddings` split by attribute class: `(A1, A2)`.
pub fn attribute_sets(
    table: &FeatureTable,
    embeddings: ArrayView2<f64>,
    attribute: SensitiveAttribute,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if embeddings.nrows() != table.len() {
        return Err(Error::DimensionMismatch {
            expected: table.len(),
            found: embeddings.nrows(),
        });
    }
    let classes = table.classes(attribute);
    let first: Vec<usize> = (0..classes.len())
        .filter(|&i| classes[i].is_first())
        .collect();
    let second: Vec<usize> = (0..classes.len())
        .filter(|&i| !classes[i].is_first())
        .collect();
    if first.is_empty() || second.is_empty() {
        return Err(Error::SingleClassLabels);
    }
    Ok((
        embeddings.select(Axis(0), &first),
        embeddings.select(Axis(0), &second),
    ))
}

/// Effect size of one target block in one embedding space.
pub fn audit_block(
    table: &FeatureTable,
    embeddings: ArrayView2<f64>,
    attribute: SensitiveAttribute,
    block: TargetBlock,
) -> Result<f64> {
    let targets = TargetSet::centroids(table, embeddings, block)?;
    let (a1, a2) = attribute_sets(table, embeddings, attribute)?;
    sc_weat_effect_size(targets.vectors.view(), a1.view(), a2.view())
}

/// One grid cell; exactly one of `effect_size` and `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeCell {
    pub attribute: SensitiveAttribute,
    pub fraction: f64,
    pub variant: EmbeddingVariant,
    pub block: TargetBlock,
    pub effect_size: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeReport {
    pub cells: Vec<EffectSizeCell>,
}

impl EffectSizeReport {
    pub fn get(
        &self,
        attribute: SensitiveAttribute,
        fraction: f64,
        variant: EmbeddingVariant,
        block: TargetBlock,
    ) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| {
                c.attribute == attribute
                    && c.fraction == fraction
                    && c.variant == variant
                    && c.block == block
            })
            .and_then(|c| c.effect_size)
    }

    pub fn extend(&mut self, other: EffectSizeReport) {
        self.cells.extend(other.cells);
    }

    pub fn failures(&self) -> impl Iterator<Item = &EffectSizeCell> {
        self.cells.iter().filter(|c| c.error.is_some())
    }
}

/// Audits every variant's embeddings of `table` (the training split of one
/// fraction) on both target blocks. Failing cells are recorded, not raised.
pub fn audit(
    table: &FeatureTable,
    embeddings: &[(EmbeddingVariant, ArrayView2<f64>)],
    attribute: SensitiveAttribute,
    fraction: f64,
) -> EffectSizeReport {
    let mut cells = Vec::with_capacity(embeddings.len() * TargetBlock::ALL.len());
    for &(variant, emb) in embeddings {
        for block in TargetBlock::ALL {
            let result = audit_block(table, emb, attribute, block);
            cells.push(EffectSizeCell {
                attribute,
                fraction,
                variant,
                block,
                effect_size: result.as_ref().ok().copied(),
                error: result.err().map(|e| e.to_string()),
            });
        }
    }
    EffectSizeReport { cells }
}
