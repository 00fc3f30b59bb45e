//! Counterfactual positives by sensitive-feature mean swap, and cutout masking.

use crate::dataset::{AttributeClass, FeatureTable};
use crate::error::{Error, Result};
use crate::numerics::RandomStream;
use crate::preprocess::SensitiveProfile;

/// Anchor row and its counterfactual twin. They agree on every non-sensitive index.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub attribute_class: AttributeClass,
}

/// Copy of `sample` whose sensitive coordinates hold the other class's means.
pub fn generate_positive(
    sample: &[f64],
    sample_class: AttributeClass,
    profile: &SensitiveProfile,
) -> Result<Vec<f64>> {
    if sample.len() != profile.dim {
        return Err(Error::DimensionMismatch {
            expected: profile.dim,
            found: sample.len(),
        });
    }
    let mut positive = sample.to_vec();
    let means = profile.counterfactual_means(sample_class);
    for (&j, &m) in profile.sensitive_indices.iter().zip(means) {
        positive[j] = m;
    }
    Ok(positive)
}

/// One pair per record, in table order. Negatives are not materialized: every
/// other view in a training batch plays that role.
pub fn build_pairs(table: &FeatureTable, profile: &SensitiveProfile) -> Result<Vec<PairedSample>> {
    table
        .records()
        .iter()
        .map(|r| {
            let class = r.attribute_class(profile.attribute);
            Ok(PairedSample {
                anchor: r.features.clone(),
                positive: generate_positive(&r.features, class, profile)?,
                attribute_class: class,
            })
        })
        .collect()
}

/// How many sensitive coordinates cutout zeroes: none for a zero fraction,
/// otherwise `max(1, floor(fraction * n_sensitive))`.
pub fn cutout_count(fraction: f64, n_sensitive: usize) -> usize {
    if fraction <= 0.0 || n_sensitive == 0 {
        0
    } else {
        ((fraction * n_sensitive as f64).floor() as usize).clamp(1, n_sensitive)
    }
}

/// Zeroes a uniformly chosen subset of the sensitive coordinates in place.
pub fn cutout_in_place(
    sample: &mut [f64],
    profile: &SensitiveProfile,
    fraction: f64,
    stream: &mut RandomStream,
) -> Result<()> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!(
            "cutout fraction {fraction} not in [0, 1]"
        )));
    }
    if sample.len() != profile.dim {
        return Err(Error::DimensionMismatch {
            expected: profile.dim,
            found: sample.len(),
        });
    }
    let k = cutout_count(fraction, profile.len());
    for pos in stream.sample_indices(profile.len(), k) {
        sample[profile.sensitive_indices[pos]] = 0.0;
    }
    Ok(())
}

pub fn cutout(
    sample: &[f64],
    profile: &SensitiveProfile,
    fraction: f64,
    stream: &mut RandomStream,
) -> Result<Vec<f64>> {
    let mut out = sample.to_vec();
    cutout_in_place(&mut out, profile, fraction, stream)?;
    Ok(out)
}
