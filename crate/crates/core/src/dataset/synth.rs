//! Synthetic stand-in for a biased clinical embedding cohort.
//!
//! Every feature is marginally standard normal before the bias shift. Three
//! disjoint index sets matter:
//!
//! * gender-biased and ethnicity-biased features get `+bias_shift` for the
//!   first class of their attribute and `-bias_shift` for the second;
//! * clinical features share a few latent factors (loading `clinical_loading`)
//!   and the length-of-stay class is an ordinal function of those factors.
//!
//! Phenotype bits fire with a logistic probability driven by the standardized
//! sum of the biased features, so phenotype centroids lean towards one class
//! of each attribute. The diagnostic block leans the same way for both
//! attributes; the procedure block leans the opposite way for ethnicity.

use serde::{Deserialize, Serialize};

use super::{Ethnicity, FeatureTable, Gender, Provenance, Record, PHENOTYPES};
use crate::error::{Error, Result};
use crate::numerics::RandomStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_records: usize,
    pub dim: usize,
    /// Fraction of features biased for each attribute (each attribute gets its own set).
    pub sensitive_frac: f64,
    pub bias_shift: f64,
    /// Probability of the first gender class (female).
    pub female_prior: f64,
    /// Probability of the first ethnicity class (Hispanic).
    pub hispanic_prior: f64,
    pub los_priors: [f64; 5],
    pub phenotype_link: f64,
    pub clinical_frac: f64,
    pub clinical_factors: usize,
    pub clinical_loading: f64,
    /// Scale of the latent length-of-stay score relative to unit logistic noise.
    pub los_signal: f64,
    /// Fraction of clinical indices borrowed from the gender-biased set (stress knob).
    pub bias_los_overlap: f64,
    /// Standard deviation of features that are neither biased nor clinical.
    pub noise_scale: f64,
    /// Multiplier on clinical features (applied before any bias shift).
    pub clinical_scale: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::cohort_shape(0)
    }
}

impl SynthConfig {
    /// Cohort-shaped preset: 2,429 records of dimension 2,136 with the
    /// female/male, Hispanic/non-Hispanic and length-of-stay counts of the
    /// heart-failure cohort (1,269/1,160; 510/1,919; 261/1,319/542/164/143).
    pub fn cohort_shape(seed: u64) -> Self {
        let n = 2429.0;
        Self {
            n_records: 2429,
            dim: 2136,
            sensitive_frac: 0.05,
            bias_shift: 0.1,
            female_prior: 1269.0 / n,
            hispanic_prior: 510.0 / n,
            los_priors: [261.0 / n, 1319.0 / n, 542.0 / n, 164.0 / n, 143.0 / n],
            phenotype_link: 2.0,
            clinical_frac: 0.25,
            clinical_factors: 8,
            clinical_loading: 0.5,
            los_signal: 2.0,
            bias_los_overlap: 0.0,
            noise_scale: 0.15,
            clinical_scale: 0.3,
            seed,
        }
    }

    /// Number of biased features per attribute.
    pub fn biased_count(&self) -> usize {
        (self.sensitive_frac * self.dim as f64).round() as usize
    }

    pub fn clinical_count(&self) -> usize {
        (self.clinical_frac * self.dim as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.n_records < 2 || self.dim == 0 {
            return bad("need at least 2 records and 1 feature".into());
        }
        if !(self.sensitive_frac > 0.0 && self.sensitive_frac <= 1.0) {
            return bad(format!(
                "sensitive_frac {} not in (0, 1]",
                self.sensitive_frac
            ));
        }
        for (name, p) in [
            ("female_prior", self.female_prior),
            ("hispanic_prior", self.hispanic_prior),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} {p} is not a probability"));
            }
        }
        if self.los_priors.iter().any(|p| !(0.0..=1.0).contains(p))
            || (self.los_priors.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad("los_priors must be probabilities summing to 1".into());
        }
        if !(0.0..=1.0).contains(&self.clinical_frac)
            || !(0.0..=1.0).contains(&self.clinical_loading)
            || !(0.0..=1.0).contains(&self.bias_los_overlap)
        {
            return bad(
                "clinical_frac, clinical_loading and bias_los_overlap must lie in [0, 1]".into(),
            );
        }
        if self.clinical_factors == 0 {
            return bad("clinical_factors must be positive".into());
        }
        let b = self.biased_count();
        let borrowed = self.borrowed_clinical();
        if 2 * b + self.clinical_count() - borrowed > self.dim {
            return bad(format!(
                "{} biased features per attribute plus {} clinical features exceed dim {}",
                b,
                self.clinical_count(),
                self.dim
            ));
        }
        if ![self.bias_shift, self.phenotype_link, self.los_signal]
            .iter()
            .all(|v| v.is_finite())
        {
            return bad("non-finite generator parameter".into());
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite())
            || !(self.clinical_scale > 0.0 && self.clinical_scale.is_finite())
        {
            return bad("noise_scale and clinical_scale must be positive".into());
        }
        Ok(())
    }

    fn borrowed_clinical(&self) -> usize {
        ((self.bias_los_overlap * self.clinical_count() as f64).round() as usize)
            .min(self.biased_count())
            .min(self.clinical_count())
    }
}

/// Exact class counts by largest remainder, ties to the lower class.
fn allocate(n: usize, priors: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = priors.iter().map(|p| p * n as f64).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..priors.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut k = 0;
    while counts.iter().sum::<usize>() < n {
        counts[order[k % order.len()]] += 1;
        k += 1;
    }
    counts
}

/// Shuffled label vector with exactly `counts[c]` entries equal to `c`.
fn shuffled_labels(counts: &[usize], stream: &mut RandomStream) -> Vec<usize> {
    let mut labels: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(c, &k)| std::iter::repeat(c).take(k))
        .collect();
    stream.shuffle(&mut labels);
    labels
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[allow(clippy::needless_range_loop)]
pub fn generate_synthetic(config: &SynthConfig) -> Result<FeatureTable> {
    config.validate()?;
    let (n, dim) = (config.n_records, config.dim);
    let root = RandomStream::new(config.seed);

    let mut perm: Vec<usize> = (0..dim).collect();
    root.fork(1).shuffle(&mut perm);
    let b = config.biased_count();
    let mut gender_biased = perm[..b].to_vec();
    let mut ethnicity_biased = perm[b..2 * b].to_vec();
    let borrowed = config.borrowed_clinical();
    let fresh = config.clinical_count() - borrowed;
    let mut clinical: Vec<usize> = gender_biased[..borrowed]
        .iter()
        .chain(&perm[2 * b..2 * b + fresh])
        .copied()
        .collect();

    let mut attr_stream = root.fork(2);
    let female = allocate(n, &[config.female_prior, 1.0 - config.female_prior]);
    let genders = shuffled_labels(&female, &mut attr_stream);
    let hispanic = allocate(n, &[config.hispanic_prior, 1.0 - config.hispanic_prior]);
    let ethnicities = shuffled_labels(&hispanic, &mut attr_stream);

    let mut scale_of = vec![config.noise_scale; dim];
    for &j in gender_biased.iter().chain(&ethnicity_biased) {
        scale_of[j] = 1.0;
    }
    let mut feat_stream = root.fork(3);
    let mut features: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            scale_of
                .iter()
                .map(|&sd| sd * feat_stream.normal())
                .collect()
        })
        .collect();

    let mut latent_stream = root.fork(4);
    let k = config.clinical_factors;
    let latents: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|_| latent_stream.normal()).collect())
        .collect();
    let (load, resid) = (
        config.clinical_loading.sqrt(),
        (1.0 - config.clinical_loading).sqrt(),
    );
    for (row, z) in features.iter_mut().zip(&latents) {
        for (pos, &j) in clinical.iter().enumerate() {
            let unit = row[j] / scale_of[j];
            row[j] = config.clinical_scale * (load * z[pos % k] + resid * unit);
        }
    }
    for (i, row) in features.iter_mut().enumerate() {
        let gs = if genders[i] == 0 {
            config.bias_shift
        } else {
            -config.bias_shift
        };
        let es = if ethnicities[i] == 0 {
            config.bias_shift
        } else {
            -config.bias_shift
        };
        gender_biased.iter().for_each(|&j| row[j] += gs);
        ethnicity_biased.iter().for_each(|&j| row[j] += es);
    }

    // Phenotype drivers use the standardized sums of each biased set.
    let scale = if b > 0 { 1.0 / (b as f64).sqrt() } else { 0.0 };
    let drive = |row: &[f64], idx: &[usize]| idx.iter().map(|&j| row[j]).sum::<f64>() * scale;
    let mut pheno_stream = root.fork(5);
    let mut blocks = [vec![[0u8; PHENOTYPES]; n], vec![[0u8; PHENOTYPES]; n]];
    for (block, ethnicity_sign) in [(0usize, 1.0), (1, -1.0)] {
        for p in 0..PHENOTYPES {
            let base = pheno_stream.uniform_range(-2.0, -0.5);
            for (i, row) in features.iter().enumerate() {
                let logit = base
                    + config.phenotype_link
                        * (drive(row, &gender_biased)
                            + ethnicity_sign * drive(row, &ethnicity_biased));
                blocks[block][i][p] = pheno_stream.bernoulli(sigmoid(logit)) as u8;
            }
        }
    }

    let mut los_stream = root.fork(6);
    let beta: Vec<f64> = (0..k).map(|_| los_stream.normal()).collect();
    let raw: Vec<f64> = latents
        .iter()
        .map(|z| z.iter().zip(&beta).map(|(a, b)| a * b).sum())
        .collect();
    let sd = crate::numerics::mean_and_sample_std(&raw)
        .map(|(_, s)| s)
        .unwrap_or(1.0)
        .max(1e-12);
    let score: Vec<f64> = raw
        .iter()
        .map(|r| config.los_signal * r / sd + los_stream.logistic())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| score[a].total_cmp(&score[b]).then(a.cmp(&b)));
    let los_counts = allocate(n, &config.los_priors);
    let mut los = vec![0u8; n];
    let mut cursor = 0;
    for (class, &count) in los_counts.iter().enumerate() {
        for &i in &order[cursor..cursor + count] {
            los[i] = class as u8 + 1;
        }
        cursor += count;
    }

    let records = (0..n)
        .map(|i| Record {
            record_id: format!("syn{i:06}"),
            features: std::mem::take(&mut features[i]),
            gender: if genders[i] == 0 {
                Gender::Female
            } else {
                Gender::Male
            },
            ethnicity: if ethnicities[i] == 0 {
                Ethnicity::Hispanic
            } else {
                Ethnicity::NonHispanic
            },
            los_class: los[i],
            dx_phenotypes: blocks[0][i],
            proc_phenotypes: blocks[1][i],
        })
        .collect();
    gender_biased.sort_unstable();
    ethnicity_biased.sort_unstable();
    clinical.sort_unstable();
    FeatureTable::new(
        records,
        Provenance::Synthetic {
            config: config.clone(),
            gender_biased,
            ethnicity_biased,
            clinical,
        },
    )
}
