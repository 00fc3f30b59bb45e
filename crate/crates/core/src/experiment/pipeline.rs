use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{aview1, s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::{emit_reports, ReportFormat};
use crate::dataset::{split, FeatureTable, SensitiveAttribute};
use crate::downstream::{
    evaluate, CellKey, ClassifierKind, EvalCell, EvalReport, FeatureView, LabelledRows, Task,
};
use crate::error::{Error, ErrorKind, Result};
use crate::fairness::{audit, EffectSizeCell, EffectSizeReport, TargetBlock};
use crate::numerics::RandomStream;
use crate::preprocess::{select_sensitive_features, smote, smote_rows, SensitiveProfile};
use crate::trainer::{
    embed, save_checkpoint, train, CheckpointMeta, EmbeddingVariant, TrainConfig, TrainReport,
};

/// One trained encoder, with its checkpoint path relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub attribute: SensitiveAttribute,
    pub fraction: f64,
    pub variant: EmbeddingVariant,
    pub checkpoint: String,
    pub report: TrainReport,
}

/// A numerical failure that the run stepped over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub attribute: SensitiveAttribute,
    pub fraction: f64,
    pub variant: Option<EmbeddingVariant>,
    pub stage: String,
    pub message: String,
}

/// `|d|` at the smallest and the largest training fraction for one audit row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendLine {
    pub attribute: SensitiveAttribute,
    pub block: TargetBlock,
    pub variant: EmbeddingVariant,
    pub smallest_fraction: f64,
    pub largest_fraction: f64,
    pub abs_d_smallest: Option<f64>,
    pub abs_d_largest: Option<f64>,
    /// `|d|` at the largest fraction is no larger than at the smallest.
    pub decreased: Option<bool>,
}

/// Everything a run produces; the single source for every emitted report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResults {
    pub seed: u64,
    pub attributes: Vec<SensitiveAttribute>,
    pub fractions: Vec<f64>,
    pub variants: Vec<EmbeddingVariant>,
    pub classifiers: Vec<ClassifierKind>,
    pub effect_sizes: EffectSizeReport,
    pub evaluation: EvalReport,
    pub training: Vec<TrainRun>,
    pub failures: Vec<Failure>,
    pub trend: Vec<TrendLine>,
}

impl RunResults {
    pub fn empty(config: &ExperimentConfig) -> Self {
        Self {
            seed: config.seed,
            attributes: config.attributes(),
            fractions: config.fractions.clone(),
            variants: config.variants.clone(),
            classifiers: config.classifiers.clone(),
            effect_sizes: EffectSizeReport::default(),
            evaluation: EvalReport::default(),
            training: Vec::new(),
            failures: Vec::new(),
            trend: Vec::new(),
        }
    }
}

/// Percent label used in file names: `0.8 -> "80"`, `0.125 -> "12.5"`.
pub fn fraction_tag(fraction: f64) -> String {
    let p = fraction * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}", p.round() as u64)
    } else {
        format!("{p}")
    }
}

fn cell_stream(root: &RandomStream, attribute: SensitiveAttribute, fraction: f64) -> RandomStream {
    let a = match attribute {
        SensitiveAttribute::Gender => 1u64,
        SensitiveAttribute::Ethnicity => 2,
    };
    root.fork(a).fork(fraction.to_bits())
}

/// Writes through a sibling temp file so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Appends synthetic minority rows (ids `<seed id>~smote<n>`) so both label
/// classes are equally frequent.
pub fn oversample_rows(
    ids: &[String],
    x: ArrayView2<f64>,
    labels: &[bool],
    k: usize,
    stream: &mut RandomStream,
) -> Result<(Vec<String>, Array2<f64>, Vec<bool>)> {
    let synthetic = smote_rows(x, labels, k, stream)?;
    let mut out_ids = ids.to_vec();
    let mut out_labels = labels.to_vec();
    let mut out = Array2::zeros((x.nrows() + synthetic.len(), x.ncols()));
    out.slice_mut(s![..x.nrows(), ..]).assign(&x);
    for (n, row) in synthetic.into_iter().enumerate() {
        out.row_mut(x.nrows() + n).assign(&aview1(&row.values));
        out_ids.push(format!("{}~smote{n}", ids[row.seed]));
        out_labels.push(labels[row.seed]);
    }
    Ok((out_ids, out, out_labels))
}

fn failed_cells(key: CellKey, kinds: &[ClassifierKind], message: &str) -> EvalReport {
    EvalReport {
        cells: kinds
            .iter()
            .map(|&classifier| EvalCell {
                pipeline: key.pipeline,
                fraction: key.fraction,
                task: key.task,
                variant: key.variant,
                view: key.view,
                classifier,
                accuracy: None,
                mcc: None,
                kappa: None,
                kappa_negative: false,
                note: None,
                error: Some(message.to_string()),
            })
            .collect(),
    }
}

struct Views {
    variant: EmbeddingVariant,
    train: Array2<f64>,
    test: Array2<f64>,
}

struct Cell<'a> {
    config: &'a ExperimentConfig,
    attribute: SensitiveAttribute,
    fraction: f64,
    stream: RandomStream,
    results: &'a mut RunResults,
}

impl Cell<'_> {
    fn fail(&mut self, variant: Option<EmbeddingVariant>, stage: &str, error: &Error) {
        self.results.failures.push(Failure {
            attribute: self.attribute,
            fraction: self.fraction,
            variant,
            stage: stage.to_string(),
            message: error.to_string(),
        });
    }

    fn file_stem(&self) -> String {
        format!(
            "{}_f{}_seed{}",
            self.attribute,
            fraction_tag(self.fraction),
            self.config.seed
        )
    }

    fn train_variant(
        &mut self,
        variant: EmbeddingVariant,
        cutout: bool,
        seed: u64,
        balanced: &FeatureTable,
        profile: &SensitiveProfile,
    ) -> Result<crate::trainer::EncoderParams> {
        let cfg = TrainConfig {
            seed,
            cutout_enabled: cutout,
            ..self.config.train.clone()
        };
        let (params, report) = train(balanced, profile, &cfg)?;
        let rel = format!("checkpoints/encoder_{variant}_{}.dclr", self.file_stem());
        save_checkpoint(
            self.config.output_dir.join(&rel),
            &params,
            &CheckpointMeta {
                seed,
                attribute: Some(self.attribute),
                config: Some(cfg),
            },
        )?;
        self.results.training.push(TrainRun {
            attribute: self.attribute,
            fraction: self.fraction,
            variant,
            checkpoint: rel,
            report,
        });
        Ok(params)
    }

    fn run(&mut self, table: &FeatureTable) -> Result<()> {
        let (attribute, fraction) = (self.attribute, self.fraction);
        let (train_t, test_t) = split(table, fraction, attribute, &mut self.stream.fork(1))?;
        let balanced = smote(
            &train_t,
            attribute,
            self.config.smote_k,
            &mut self.stream.fork(2),
        )?;
        let profile = select_sensitive_features(&balanced, attribute)?;
        let profile_path = self
            .config
            .output_dir
            .join(format!("profiles/profile_{}.json", self.file_stem()));
        write_json(&profile_path, &profile)?;
        let train_seed = self.stream.fork(3).next_u64();

        let raw_train = train_t.feature_matrix();
        let raw_test = test_t.feature_matrix();
        let mut views = Vec::new();
        let mut failed = Vec::new();
        for &variant in &self.config.variants {
            let Some(cutout) = variant.uses_cutout() else {
                views.push(Views {
                    variant,
                    train: raw_train.clone(),
                    test: raw_test.clone(),
                });
                continue;
            };
            let outcome = self
                .train_variant(variant, cutout, train_seed, &balanced, &profile)
                .and_then(|params| Ok((embed(&params, &train_t)?, embed(&params, &test_t)?)));
            match outcome {
                Ok((train, test)) => views.push(Views {
                    variant,
                    train,
                    test,
                }),
                Err(e) if e.kind() == ErrorKind::Numerical => {
                    self.fail(Some(variant), "train", &e);
                    failed.push((variant, e.to_string()));
                }
                Err(e) => return Err(e),
            }
        }

        let audited: Vec<(EmbeddingVariant, ArrayView2<f64>)> =
            views.iter().map(|v| (v.variant, v.train.view())).collect();
        let mut effects = audit(&train_t, &audited, attribute, fraction);
        for (variant, message) in &failed {
            for block in TargetBlock::ALL {
                effects.cells.push(EffectSizeCell {
                    attribute,
                    fraction,
                    variant: *variant,
                    block,
                    effect_size: None,
                    error: Some(message.clone()),
                });
            }
        }
        effects.cells.sort_by_key(|c| {
            (
                self.config.variants.iter().position(|v| *v == c.variant),
                c.block,
            )
        });
        self.results.effect_sizes.extend(effects);

        let train_ids: Vec<String> = train_t.record_ids().iter().map(|s| s.to_string()).collect();
        let test_ids: Vec<String> = test_t.record_ids().iter().map(|s| s.to_string()).collect();
        let los = |t: &FeatureTable| {
            t.records()
                .iter()
                .map(|r| r.is_long_stay())
                .collect::<Vec<_>>()
        };
        let class = |t: &FeatureTable| {
            t.classes(attribute)
                .iter()
                .map(|c| c.is_first())
                .collect::<Vec<_>>()
        };
        let tasks = [
            (Task::LengthOfStay, los(&train_t), los(&test_t)),
            (
                Task::SensitiveProbe(attribute),
                class(&train_t),
                class(&test_t),
            ),
        ];
        let sensitive_train = train_t.column_matrix(&profile.sensitive_indices);
        let sensitive_test = test_t.column_matrix(&profile.sensitive_indices);
        let eval_root = self.stream.fork(4);
        for &variant in &self.config.variants {
            let found = views.iter().find(|v| v.variant == variant);
            for (t, (task, y_train, y_test)) in tasks.iter().enumerate() {
                let mut inputs = Vec::new();
                if let Some(v) = found {
                    inputs.push((FeatureView::All, v.train.view(), v.test.view()));
                }
                if variant == EmbeddingVariant::Raw && matches!(task, Task::SensitiveProbe(_)) {
                    inputs.push((
                        FeatureView::Sensitive,
                        sensitive_train.view(),
                        sensitive_test.view(),
                    ));
                }
                if found.is_none() {
                    let message = &failed
                        .iter()
                        .find(|f| f.0 == variant)
                        .expect("failed variant")
                        .1;
                    let key = CellKey {
                        pipeline: attribute,
                        fraction,
                        task: *task,
                        variant,
                        view: FeatureView::All,
                    };
                    self.results.evaluation.extend(failed_cells(
                        key,
                        &self.config.classifiers,
                        message,
                    ));
                    continue;
                }
                for (view, x_train, x_test) in inputs {
                    let key = CellKey {
                        pipeline: attribute,
                        fraction,
                        task: *task,
                        variant,
                        view,
                    };
                    let stream = eval_root
                        .fork(variant as u64)
                        .fork(t as u64)
                        .fork(view as u64);
                    let report = oversample_rows(
                        &train_ids,
                        x_train,
                        y_train,
                        self.config.smote_k,
                        &mut stream.fork(0),
                    )
                    .and_then(|(ids, x, y)| {
                        evaluate(
                            key,
                            &self.config.classifiers,
                            LabelledRows {
                                ids: &ids,
                                features: x.view(),
                                labels: &y,
                            },
                            LabelledRows {
                                ids: &test_ids,
                                features: x_test,
                                labels: y_test,
                            },
                            &self.config.downstream,
                            &stream.fork(1),
                        )
                    });
                    match report {
                        Ok(r) => self.results.evaluation.extend(r),
                        Err(e @ Error::Leakage(_)) => return Err(e),
                        Err(e) => {
                            self.fail(Some(variant), &format!("evaluate {task} ({view:?})"), &e);
                            self.results.evaluation.extend(failed_cells(
                                key,
                                &self.config.classifiers,
                                &e.to_string(),
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// `|d|` trend between the smallest and the largest fraction of a grid.
pub fn trend_summary(effects: &EffectSizeReport, fractions: &[f64]) -> Vec<TrendLine> {
    if fractions.len() < 2 {
        return Vec::new();
    }
    let lo = fractions.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = fractions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut keys: Vec<(SensitiveAttribute, TargetBlock, EmbeddingVariant)> = Vec::new();
    for c in &effects.cells {
        let k = (c.attribute, c.block, c.variant);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(attribute, block, variant)| {
            let small = effects.get(attribute, lo, variant, block).map(f64::abs);
            let large = effects.get(attribute, hi, variant, block).map(f64::abs);
            TrendLine {
                attribute,
                block,
                variant,
                smallest_fraction: lo,
                largest_fraction: hi,
                abs_d_smallest: small,
                abs_d_largest: large,
                decreased: small.zip(large).map(|(s, l)| l <= s),
            }
        })
        .collect()
}

/// Runs every (attribute, fraction) cell and writes profiles, checkpoints and
/// reports under the output directory.
///
/// Configuration and I/O errors abort the run; numerical failures are recorded
/// in [`RunResults::failures`] and the grid continues.
pub fn run_pipeline(config: &ExperimentConfig) -> Result<RunResults> {
    config.validate()?;
    let table = config.input.load(config.seed)?;
    for sub in ["profiles", "checkpoints", "reports"] {
        fs::create_dir_all(config.output_dir.join(sub))?;
    }
    let root = RandomStream::new(config.seed);
    let mut results = RunResults::empty(config);
    for attribute in config.attributes() {
        for &fraction in &config.fractions {
            let mut cell = Cell {
                config,
                attribute,
                fraction,
                stream: cell_stream(&root, attribute, fraction),
                results: &mut results,
            };
            if let Err(e) = cell.run(&table) {
                if e.kind() != ErrorKind::Numerical || matches!(e, Error::Leakage(_)) {
                    return Err(e);
                }
                cell.fail(None, "prepare", &e);
            }
        }
    }
    results.trend = trend_summary(&results.effect_sizes, &config.fractions);
    emit_reports(
        &results,
        &config.output_dir.join("reports"),
        &[ReportFormat::Text, ReportFormat::Structured],
    )?;
    Ok(results)
}

/// The effect-size grid of a run over at least two fractions, with its trend.
pub fn fraction_sweep(config: &ExperimentConfig) -> Result<(EffectSizeReport, Vec<TrendLine>)> {
    if config.fractions.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "a fraction sweep needs at least two fractions, got {}",
            config.fractions.len()
        )));
    }
    let results = run_pipeline(config)?;
    Ok((results.effect_sizes, results.trend))
}
