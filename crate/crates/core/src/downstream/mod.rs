//! From-scratch classifiers and agreement metrics for the downstream benchmark.

mod forest;
mod knn;
mod linear;
mod metrics;
mod mlp;

pub use forest::{Forest, ForestConfig};
pub use knn::KnnModel;
pub use linear::{fit_linear_svm, fit_logistic, LinearModel, Standardizer};
pub use metrics::{accuracy, cohen_kappa, mcc, Confusion};
pub use mlp::{fit_mlp, MlpConfig, MlpModel};

use std::collections::HashSet;
use std::fmt;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::dataset::SensitiveAttribute;
use crate::error::{Error, Result};
use crate::numerics::RandomStream;
use crate::trainer::EmbeddingVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Knn,
    LogisticRegression,
    LinearSvm,
    Mlp,
    RandomForest,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 5] = [
        Self::Knn,
        Self::LogisticRegression,
        Self::LinearSvm,
        Self::Mlp,
        Self::RandomForest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Knn => "knn",
            Self::LogisticRegression => "logistic_regression",
            Self::LinearSvm => "linear_svm",
            Self::Mlp => "mlp",
            Self::RandomForest => "random_forest",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Knn => "kNN",
            Self::LogisticRegression => "LR",
            Self::LinearSvm => "SVM",
            Self::Mlp => "MLP",
            Self::RandomForest => "RF",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub knn_k: usize,
    pub lr_epochs: usize,
    pub lr_rate: f64,
    pub lr_l2: f64,
    pub svm_epochs: usize,
    pub svm_rate: f64,
    pub svm_l2: f64,
    pub mlp_hidden: usize,
    pub mlp_epochs: usize,
    pub mlp_rate: f64,
    pub mlp_momentum: f64,
    pub mlp_batch: usize,
    pub mlp_l2: f64,
    pub rf_trees: usize,
    pub rf_max_depth: usize,
    pub rf_min_samples_split: usize,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Self {
            knn_k: 5,
            lr_epochs: 500,
            lr_rate: 0.5,
            lr_l2: 1e-4,
            svm_epochs: 30,
            svm_rate: 0.01,
            svm_l2: 1e-4,
            mlp_hidden: 64,
            mlp_epochs: 200,
            mlp_rate: 0.01,
            mlp_momentum: 0.9,
            mlp_batch: 64,
            mlp_l2: 1e-4,
            rf_trees: 100,
            rf_max_depth: 64,
            rf_min_samples_split: 2,
        }
    }
}

impl Hyperparameters {
    pub fn mlp(&self) -> MlpConfig {
        MlpConfig {
            hidden: self.mlp_hidden,
            epochs: self.mlp_epochs,
            rate: self.mlp_rate,
            momentum: self.mlp_momentum,
            batch_size: self.mlp_batch,
            l2: self.mlp_l2,
        }
    }

    pub fn forest(&self) -> ForestConfig {
        ForestConfig {
            trees: self.rf_trees,
            max_depth: self.rf_max_depth,
            min_samples_split: self.rf_min_samples_split,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    Knn(KnnModel),
    LogisticRegression(LinearModel),
    LinearSvm(LinearModel),
    Mlp(MlpModel),
    RandomForest(Forest),
}

/// A fitted model together with any non-fatal training note.
#[derive(Debug, Clone, PartialEq)]
pub struct Fitted {
    pub model: Classifier,
    pub input_dim: usize,
    pub note: Option<String>,
}

pub fn fit(
    kind: ClassifierKind,
    x: ArrayView2<f64>,
    y: &[bool],
    hyper: &Hyperparameters,
    stream: &mut RandomStream,
) -> Result<Fitted> {
    if x.nrows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.nrows(),
            found: y.len(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyInput);
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(Error::SingleClassLabels);
    }
    let mut note = None;
    let model = match kind {
        ClassifierKind::Knn => Classifier::Knn(KnnModel::fit(x, y, hyper.knn_k)),
        ClassifierKind::LogisticRegression => {
            let (m, n) = fit_logistic(x, y, hyper.lr_epochs, hyper.lr_rate, hyper.lr_l2);
            note = n;
            Classifier::LogisticRegression(m)
        }
        ClassifierKind::LinearSvm => Classifier::LinearSvm(fit_linear_svm(
            x,
            y,
            hyper.svm_epochs,
            hyper.svm_rate,
            hyper.svm_l2,
            stream,
        )),
        ClassifierKind::Mlp => Classifier::Mlp(fit_mlp(x, y, &hyper.mlp(), stream)),
        ClassifierKind::RandomForest => {
            Classifier::RandomForest(Forest::fit(x, y, &hyper.forest(), stream))
        }
    };
    Ok(Fitted {
        model,
        input_dim: x.ncols(),
        note,
    })
}

impl Fitted {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<bool>> {
        if x.nrows() == 0 {
            return Err(Error::EmptyInput);
        }
        if x.ncols() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                found: x.ncols(),
            });
        }
        Ok(match &self.model {
            Classifier::Knn(m) => m.predict(x),
            Classifier::LogisticRegression(m) | Classifier::LinearSvm(m) => m.predict(x),
            Classifier::Mlp(m) => m.predict(x),
            Classifier::RandomForest(m) => m.predict(x),
        })
    }
}

/// What the classifiers predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "task", content = "attribute")]
pub enum Task {
    /// Binarized length of stay; `true` is a long stay.
    LengthOfStay,
    /// The sensitive attribute itself; `true` is the first class.
    SensitiveProbe(SensitiveAttribute),
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::LengthOfStay => f.write_str("length_of_stay"),
            Task::SensitiveProbe(a) => write!(f, "{a}_probe"),
        }
    }
}

/// Which input columns a probe sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureView {
    All,
    /// The selected sensitive features of the raw table only.
    Sensitive,
}

/// Labelled rows with the record ids they came from.
#[derive(Debug, Clone, Copy)]
pub struct LabelledRows<'a> {
    pub ids: &'a [String],
    pub features: ArrayView2<'a, f64>,
    pub labels: &'a [bool],
}

/// Id of the original record a row descends from (oversampled rows carry a
/// `~` suffix).
pub fn source_id(id: &str) -> &str {
    id.split_once('~').map_or(id, |(base, _)| base)
}

/// Errors with [`Error::Leakage`] if a training row and an evaluation row
/// descend from the same record.
pub fn check_disjoint(train_ids: &[String], test_ids: &[String]) -> Result<()> {
    let train: HashSet<&str> = train_ids.iter().map(|s| source_id(s)).collect();
    match test_ids.iter().find(|id| train.contains(source_id(id))) {
        Some(id) => Err(Error::Leakage(id.clone())),
        None => Ok(()),
    }
}

/// One (task, classifier, variant) cell of the benchmark grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCell {
    pub pipeline: SensitiveAttribute,
    pub fraction: f64,
    pub task: Task,
    pub variant: EmbeddingVariant,
    pub view: FeatureView,
    pub classifier: ClassifierKind,
    pub accuracy: Option<f64>,
    pub mcc: Option<f64>,
    pub kappa: Option<f64>,
    /// Set when the computed kappa is below zero; the value is kept as is.
    pub kappa_negative: bool,
    pub note: Option<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub cells: Vec<EvalCell>,
}

impl EvalReport {
    pub fn find(
        &self,
        pipeline: SensitiveAttribute,
        fraction: f64,
        task: Task,
        variant: EmbeddingVariant,
        view: FeatureView,
        classifier: ClassifierKind,
    ) -> Option<&EvalCell> {
        self.cells.iter().find(|c| {
            c.pipeline == pipeline
                && c.fraction == fraction
                && c.task == task
                && c.variant == variant
                && c.view == view
                && c.classifier == classifier
        })
    }

    pub fn accuracy(
        &self,
        pipeline: SensitiveAttribute,
        fraction: f64,
        task: Task,
        variant: EmbeddingVariant,
        view: FeatureView,
        classifier: ClassifierKind,
    ) -> Option<f64> {
        self.find(pipeline, fraction, task, variant, view, classifier)
            .and_then(|c| c.accuracy)
    }

    pub fn extend(&mut self, other: EvalReport) {
        self.cells.extend(other.cells);
    }

    pub fn failures(&self) -> impl Iterator<Item = &EvalCell> {
        self.cells.iter().filter(|c| c.error.is_some())
    }
}

/// Where an evaluation grid row belongs.
#[derive(Debug, Clone, Copy)]
pub struct CellKey {
    pub pipeline: SensitiveAttribute,
    pub fraction: f64,
    pub task: Task,
    pub variant: EmbeddingVariant,
    pub view: FeatureView,
}

/// Fits each classifier on `train` and scores it on `test`. Every classifier
/// gets its own child stream, so the cell results do not depend on which other
/// kinds are requested. A leakage violation aborts; per-model failures are
/// recorded in the cell.
pub fn evaluate(
    key: CellKey,
    kinds: &[ClassifierKind],
    train: LabelledRows<'_>,
    test: LabelledRows<'_>,
    hyper: &Hyperparameters,
    stream: &RandomStream,
) -> Result<EvalReport> {
    check_disjoint(train.ids, test.ids)?;
    let cells = kinds
        .iter()
        .map(|&kind| {
            let mut child = stream.fork(kind as u64);
            let outcome =
                fit(kind, train.features, train.labels, hyper, &mut child).and_then(|m| {
                    let pred = m.predict(test.features)?;
                    Ok((Confusion::from_labels(test.labels, &pred)?, m.note))
                });
            let mut cell = EvalCell {
                pipeline: key.pipeline,
                fraction: key.fraction,
                task: key.task,
                variant: key.variant,
                view: key.view,
                classifier: kind,
                accuracy: None,
                mcc: None,
                kappa: None,
                kappa_negative: false,
                note: None,
                error: None,
            };
            match outcome {
                Ok((conf, note)) => {
                    let k = cohen_kappa(&conf);
                    cell.accuracy = Some(accuracy(&conf));
                    cell.mcc = Some(mcc(&conf));
                    cell.kappa = Some(k);
                    cell.kappa_negative = k < 0.0;
                    cell.note = note;
                }
                Err(e) => cell.error = Some(e.to_string()),
            }
            cell
        })
        .collect();
    Ok(EvalReport { cells })
}
