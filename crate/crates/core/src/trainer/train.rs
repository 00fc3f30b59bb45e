use std::time::Instant;

use ndarray::{aview1, s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::backprop::loss_and_gradients;
use super::encoder::{Architecture, EncoderParams};
use super::lars::{Lars, LarsConfig};
use crate::counterfactual::{build_pairs, cutout_in_place, PairedSample};
use crate::dataset::FeatureTable;
use crate::error::{Error, Result};
use crate::numerics::RandomStream;
use crate::preprocess::SensitiveProfile;

/// Rows embedded per forward pass in [`embed`].
const EMBED_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub temperature: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// `None` means `0.3 * effective_batch / 256`.
    pub base_lr: Option<f64>,
    pub lars_trust: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub cutout_enabled: bool,
    pub cutout_fraction: f64,
    pub hidden: usize,
    pub representation: usize,
    pub head_hidden: usize,
    pub projection: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            temperature: 0.5,
            batch_size: 1024,
            epochs: 100,
            base_lr: None,
            lars_trust: 1e-3,
            weight_decay: 1e-6,
            momentum: 0.9,
            cutout_enabled: false,
            cutout_fraction: 0.2,
            hidden: 512,
            representation: 256,
            head_hidden: 256,
            projection: 128,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn architecture(&self, input: usize) -> Architecture {
        Architecture {
            input,
            hidden: self.hidden,
            representation: self.representation,
            head_hidden: self.head_hidden,
            projection: self.projection,
        }
    }

    pub fn effective_batch(&self, n_pairs: usize) -> usize {
        self.batch_size.min(n_pairs)
    }

    pub fn learning_rate(&self, n_pairs: usize) -> f64 {
        self.base_lr
            .unwrap_or(0.3 * self.effective_batch(n_pairs) as f64 / 256.0)
    }

    pub fn lars(&self) -> LarsConfig {
        LarsConfig {
            trust: self.lars_trust,
            weight_decay: self.weight_decay,
            momentum: self.momentum,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs must be positive");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if self
            .base_lr
            .is_some_and(|lr| !(lr >= 0.0 && lr.is_finite()))
        {
            return bad("base_lr must be non-negative");
        }
        if self.lars_trust.is_nan()
            || self.lars_trust <= 0.0
            || self.weight_decay.is_nan()
            || self.weight_decay < 0.0
        {
            return bad("lars_trust must be positive and weight_decay non-negative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.cutout_fraction) {
            return bad("cutout_fraction must lie in [0, 1]");
        }
        if [
            self.hidden,
            self.representation,
            self.head_hidden,
            self.projection,
        ]
        .contains(&0)
        {
            return bad("layer widths must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
    /// Not part of the deterministic output; excluded from saved reports.
    #[serde(skip)]
    pub wall_time_secs: f64,
    pub n_pairs: usize,
    pub batch_size: usize,
    pub batches_per_epoch: usize,
    pub learning_rate: f64,
    pub config: TrainConfig,
}

/// Interleaves anchors and positives into rows `2k`, `2k + 1`.
pub fn interleave(anchors: ArrayView2<f64>, positives: ArrayView2<f64>) -> Result<Array2<f64>> {
    if anchors.dim() != positives.dim() {
        return Err(Error::DimensionMismatch {
            expected: anchors.nrows(),
            found: positives.nrows(),
        });
    }
    let (n, d) = anchors.dim();
    let mut views = Array2::zeros((2 * n, d));
    for k in 0..n {
        views.row_mut(2 * k).assign(&anchors.row(k));
        views.row_mut(2 * k + 1).assign(&positives.row(k));
    }
    Ok(views)
}

/// Mean NT-Xent loss of paired batches and its parameter gradients.
pub fn loss_gradients(
    params: &EncoderParams,
    anchors: ArrayView2<f64>,
    positives: ArrayView2<f64>,
    temperature: f64,
) -> Result<(f64, EncoderParams)> {
    let views = interleave(anchors, positives)?;
    loss_and_gradients(params, views.view(), temperature)
}

fn batch_views(
    pairs: &[PairedSample],
    members: &[usize],
    dim: usize,
    cutout: Option<(&SensitiveProfile, f64, &mut RandomStream)>,
) -> Result<Array2<f64>> {
    let mut views = Array2::zeros((2 * members.len(), dim));
    for (k, &i) in members.iter().enumerate() {
        let p = &pairs[i];
        views.row_mut(2 * k).assign(&aview1(&p.anchor));
        views.row_mut(2 * k + 1).assign(&aview1(&p.positive));
    }
    if let Some((profile, fraction, stream)) = cutout {
        for mut row in views.axis_iter_mut(Axis(0)) {
            cutout_in_place(
                row.as_slice_mut().expect("standard layout"),
                profile,
                fraction,
                stream,
            )?;
        }
    }
    Ok(views)
}

/// Trains the encoder on counterfactual pairs of `table`.
///
/// Each epoch shuffles the pairs and walks them in batches; a trailing batch
/// with fewer than two pairs is skipped. With cutout enabled every view gets a
/// fresh mask per epoch.
pub fn train(
    table: &FeatureTable,
    profile: &SensitiveProfile,
    config: &TrainConfig,
) -> Result<(EncoderParams, TrainReport)> {
    config.validate()?;
    let start = Instant::now();
    let pairs = build_pairs(table, profile)?;
    let n = pairs.len();
    let batch = config.effective_batch(n);
    if batch < 2 {
        return Err(Error::BatchTooSmall(2 * batch));
    }
    let lr = config.learning_rate(n);
    let root = RandomStream::new(config.seed);
    let mut params = EncoderParams::init(config.architecture(table.dim()), &mut root.fork(1));
    let mut shuffler = root.fork(2);
    let mut masker = root.fork(3);
    let mut optimizer = Lars::new(&params, config.lars());

    let mut order: Vec<usize> = (0..n).collect();
    let batches: Vec<(usize, usize)> = (0..n)
        .step_by(batch)
        .map(|s| (s, (s + batch).min(n)))
        .filter(|(s, e)| e - s >= 2)
        .collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        shuffler.shuffle(&mut order);
        let mut total = 0.0;
        for (b, &(s, e)) in batches.iter().enumerate() {
            let cutout =
                config
                    .cutout_enabled
                    .then_some((profile, config.cutout_fraction, &mut masker));
            let views = batch_views(&pairs, &order[s..e], table.dim(), cutout)?;
            let (loss, grads) = loss_and_gradients(&params, views.view(), config.temperature)
                .map_err(|e| match e {
                    Error::NonFiniteActivation(_) | Error::NonFiniteGradient(_) => {
                        Error::NonFiniteLoss { epoch, batch: b }
                    }
                    other => other,
                })?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            optimizer.step(&mut params, &grads, lr);
            total += loss;
        }
        epoch_losses.push(total / batches.len() as f64);
    }
    let report = TrainReport {
        final_loss: epoch_losses.last().copied().unwrap_or(f64::NAN),
        epoch_losses,
        wall_time_secs: start.elapsed().as_secs_f64(),
        n_pairs: n,
        batch_size: batch,
        batches_per_epoch: batches.len(),
        learning_rate: lr,
        config: config.clone(),
    };
    Ok((params, report))
}

/// Representation `h` for every record of `table`, in table order.
pub fn embed(params: &EncoderParams, table: &FeatureTable) -> Result<Array2<f64>> {
    embed_matrix(params, table.feature_matrix().view())
}

pub fn embed_matrix(params: &EncoderParams, features: ArrayView2<f64>) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((features.nrows(), params.architecture.representation));
    let mut start = 0;
    while start < features.nrows() {
        let end = (start + EMBED_CHUNK).min(features.nrows());
        let h = params.represent(features.slice(s![start..end, ..]))?;
        out.slice_mut(s![start..end, ..]).assign(&h);
        start = end;
    }
    if features.nrows() == 0 && features.ncols() != params.architecture.input {
        return Err(Error::DimensionMismatch {
            expected: params.architecture.input,
            found: features.ncols(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_synthetic, SensitiveAttribute, SynthConfig};
    use crate::numerics::cosine_similarity;
    use crate::preprocess::select_sensitive_features;

    fn small_table(seed: u64) -> FeatureTable {
        generate_synthetic(&SynthConfig {
            n_records: 240,
            dim: 40,
            bias_shift: 0.5,
            ..SynthConfig::cohort_shape(seed)
        })
        .unwrap()
    }

    fn small_config(seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: 64,
            epochs: 4,
            hidden: 32,
            representation: 16,
            head_hidden: 16,
            projection: 8,
            seed,
            ..TrainConfig::default()
        }
    }

    fn setup(seed: u64) -> (FeatureTable, SensitiveProfile) {
        let t = small_table(seed);
        let p = select_sensitive_features(&t, SensitiveAttribute::Gender).unwrap();
        (t, p)
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let (t, p) = setup(1);
        let cfg = TrainConfig {
            epochs: 1,
            base_lr: Some(0.0),
            ..small_config(5)
        };
        let (params, report) = train(&t, &p, &cfg).unwrap();
        let init =
            EncoderParams::init(cfg.architecture(t.dim()), &mut RandomStream::new(5).fork(1));
        assert_eq!(params, init);
        assert_eq!(report.epoch_losses.len(), 1);
    }

    #[test]
    fn same_seed_is_bitwise_reproducible() {
        let (t, p) = setup(2);
        let cfg = TrainConfig {
            cutout_enabled: true,
            ..small_config(9)
        };
        let (a, ra) = train(&t, &p, &cfg).unwrap();
        let (b, rb) = train(&t, &p, &cfg).unwrap();
        assert_eq!(a, b);
        let bits = |r: &TrainReport| {
            r.epoch_losses
                .iter()
                .map(|l| l.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&ra), bits(&rb));
        let other = train(&t, &p, &small_config(10)).unwrap().0;
        assert_ne!(a, other);
    }

    #[test]
    fn losses_are_finite_nonnegative_and_decrease() {
        let (t, p) = setup(3);
        let cfg = TrainConfig {
            epochs: 15,
            ..small_config(3)
        };
        let (_, report) = train(&t, &p, &cfg).unwrap();
        assert_eq!(report.batches_per_epoch, 4);
        assert!(report
            .epoch_losses
            .iter()
            .all(|l| l.is_finite() && *l >= 0.0));
        assert!(
            report.final_loss < report.epoch_losses[0],
            "{:?}",
            report.epoch_losses
        );
    }

    #[test]
    fn trailing_singleton_batch_is_skipped() {
        let (t, p) = setup(4);
        let t = t
            .select_rows(&(0..129).collect::<Vec<_>>(), t.provenance().clone())
            .unwrap();
        let (_, report) = train(&t, &p, &small_config(1)).unwrap();
        assert_eq!(report.batches_per_epoch, 2);
    }

    #[test]
    fn batch_clamps_to_table_and_sets_default_rate() {
        let (t, p) = setup(5);
        let cfg = TrainConfig {
            batch_size: 1024,
            epochs: 1,
            ..small_config(0)
        };
        let (_, report) = train(&t, &p, &cfg).unwrap();
        assert_eq!(report.batch_size, 240);
        assert!((report.learning_rate - 0.3 * 240.0 / 256.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let (t, p) = setup(6);
        for cfg in [
            TrainConfig {
                temperature: 0.0,
                ..small_config(0)
            },
            TrainConfig {
                epochs: 0,
                ..small_config(0)
            },
            TrainConfig {
                cutout_fraction: 1.5,
                ..small_config(0)
            },
            TrainConfig {
                batch_size: 1,
                ..small_config(0)
            },
        ] {
            assert!(matches!(train(&t, &p, &cfg), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn embed_is_deterministic_and_zero_for_zero_weights() {
        let (t, p) = setup(7);
        let (params, _) = train(&t, &p, &small_config(7)).unwrap();
        let a = embed(&params, &t).unwrap();
        let b = embed(&params, &t).unwrap();
        assert_eq!(a.dim(), (240, 16));
        assert_eq!(a, b);
        let zero = EncoderParams::zeros(params.architecture);
        assert!(embed(&zero, &t).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn trained_embedding_keeps_twins_closer_than_strangers() {
        let (t, p) = setup(8);
        let cfg = TrainConfig {
            epochs: 20,
            ..small_config(8)
        };
        let (params, _) = train(&t, &p, &cfg).unwrap();
        let pairs = build_pairs(&t, &p).unwrap();
        let n = pairs.len();
        let mut anchors = Array2::zeros((n, t.dim()));
        let mut positives = Array2::zeros((n, t.dim()));
        for (i, pair) in pairs.iter().enumerate() {
            anchors.row_mut(i).assign(&aview1(&pair.anchor));
            positives.row_mut(i).assign(&aview1(&pair.positive));
        }
        let ha = embed_matrix(&params, anchors.view()).unwrap();
        let hp = embed_matrix(&params, positives.view()).unwrap();
        let cos = |i: usize, j: usize, other: &Array2<f64>| {
            cosine_similarity(
                ha.row(i).as_slice().unwrap(),
                other.row(j).as_slice().unwrap(),
            )
            .unwrap_or(0.0)
        };
        let twin = (0..n).map(|i| cos(i, i, &hp)).sum::<f64>() / n as f64;
        let stranger = (0..n).map(|i| cos(i, (i + n / 2) % n, &ha)).sum::<f64>() / n as f64;
        assert!(twin > stranger, "twin {twin} stranger {stranger}");
    }

    #[test]
    fn embed_rejects_wrong_width() {
        let params = EncoderParams::zeros(Architecture::standard(3));
        let x = Array2::<f64>::zeros((2, 4));
        assert!(matches!(
            embed_matrix(&params, x.view()),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 4
            })
        ));
    }

    #[test]
    fn paired_batch_gradients_match_interleaved_views() {
        let mut s = RandomStream::new(12);
        let arch = Architecture {
            input: 3,
            hidden: 4,
            representation: 4,
            head_hidden: 3,
            projection: 2,
        };
        let params = EncoderParams::init(arch, &mut s);
        let a = Array2::from_shape_fn((3, 3), |_| s.normal());
        let b = Array2::from_shape_fn((3, 3), |_| s.normal());
        let (l1, g1) = loss_gradients(&params, a.view(), b.view(), 0.5).unwrap();
        let views = interleave(a.view(), b.view()).unwrap();
        let (l2, g2) = loss_and_gradients(&params, views.view(), 0.5).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(g1, g2);
        // identical rows: degenerate loss log(2N - 1), finite gradients
        let same = Array2::from_elem((3, 3), 0.4);
        let (l, g) = loss_gradients(&params, same.view(), same.view(), 0.5).unwrap();
        assert!((l - 5f64.ln()).abs() < 1e-12);
        assert!(g.is_finite());
    }
}
