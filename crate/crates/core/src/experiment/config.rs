use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{
    generate_synthetic, load_table, FeatureTable, SensitiveAttribute, SynthConfig,
};
use crate::downstream::{ClassifierKind, Hyperparameters};
use crate::error::{Error, Result};
use crate::preprocess::SMOTE_DEFAULT_K;
use crate::trainer::{EmbeddingVariant, TrainConfig};

/// Where the feature table comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSource {
    /// Generated in memory; the generator seed is replaced by the master seed.
    Synthetic(SynthConfig),
    /// A table written by [`crate::dataset::write_table`].
    File { path: PathBuf },
}

impl Default for InputSource {
    fn default() -> Self {
        InputSource::Synthetic(SynthConfig::default())
    }
}

impl InputSource {
    pub fn load(&self, seed: u64) -> Result<FeatureTable> {
        match self {
            InputSource::Synthetic(cfg) => generate_synthetic(&SynthConfig {
                seed,
                ..cfg.clone()
            }),
            InputSource::File { path } => load_table(path),
        }
    }
}

/// Which protected attributes get their own pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeChoice {
    Gender,
    Ethnicity,
    #[default]
    Both,
}

impl AttributeChoice {
    pub fn attributes(self) -> Vec<SensitiveAttribute> {
        match self {
            AttributeChoice::Gender => vec![SensitiveAttribute::Gender],
            AttributeChoice::Ethnicity => vec![SensitiveAttribute::Ethnicity],
            AttributeChoice::Both => SensitiveAttribute::ALL.to_vec(),
        }
    }
}

impl std::str::FromStr for AttributeChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gender" => Ok(AttributeChoice::Gender),
            "ethnicity" => Ok(AttributeChoice::Ethnicity),
            "both" => Ok(AttributeChoice::Both),
            other => Err(Error::InvalidConfig(format!(
                "unknown attribute choice `{other}`"
            ))),
        }
    }
}

fn default_fractions() -> Vec<f64> {
    vec![0.2, 0.4, 0.6, 0.8]
}

fn default_variants() -> Vec<EmbeddingVariant> {
    EmbeddingVariant::ALL.to_vec()
}

fn default_classifiers() -> Vec<ClassifierKind> {
    ClassifierKind::ALL.to_vec()
}

fn default_smote_k() -> usize {
    SMOTE_DEFAULT_K
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Everything a full run needs. The training seed inside `train` is ignored:
/// each cell derives its own from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub input: InputSource,
    #[serde(default)]
    pub attribute: AttributeChoice,
    #[serde(default = "default_fractions")]
    pub fractions: Vec<f64>,
    #[serde(default = "default_variants")]
    pub variants: Vec<EmbeddingVariant>,
    #[serde(default = "default_classifiers")]
    pub classifiers: Vec<ClassifierKind>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub downstream: Hyperparameters,
    #[serde(default = "default_smote_k")]
    pub smote_k: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Cohort-shaped synthetic input with every fraction, variant and classifier.
    pub fn new(seed: u64, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            input: InputSource::default(),
            attribute: AttributeChoice::default(),
            fractions: default_fractions(),
            variants: default_variants(),
            classifiers: default_classifiers(),
            train: TrainConfig::default(),
            downstream: Hyperparameters::default(),
            smote_k: default_smote_k(),
            output_dir: output_dir.into(),
            seed,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn attributes(&self) -> Vec<SensitiveAttribute> {
        self.attribute.attributes()
    }

    /// True when any requested variant needs a trained encoder.
    pub fn needs_training(&self) -> bool {
        self.variants.iter().any(|v| v.uses_cutout().is_some())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.fractions.is_empty() {
            return bad("at least one training fraction is required".into());
        }
        for (i, &f) in self.fractions.iter().enumerate() {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!(
                    "training fraction {f} must lie strictly between 0 and 1"
                ));
            }
            if self.fractions[..i].contains(&f) {
                return bad(format!("training fraction {f} is listed twice"));
            }
        }
        if self.variants.is_empty() {
            return bad("at least one embedding variant is required".into());
        }
        for (i, v) in self.variants.iter().enumerate() {
            if self.variants[..i].contains(v) {
                return bad(format!("variant {v} is listed twice"));
            }
        }
        for (i, c) in self.classifiers.iter().enumerate() {
            if self.classifiers[..i].contains(c) {
                return bad(format!("classifier {c} is listed twice"));
            }
        }
        if self.smote_k == 0 {
            return bad("smote_k must be positive".into());
        }
        if let InputSource::Synthetic(cfg) = &self.input {
            cfg.validate()?;
        }
        if self.needs_training() {
            self.train.validate()?;
        }
        let h = &self.downstream;
        if h.knn_k == 0
            || h.mlp_hidden == 0
            || h.mlp_batch == 0
            || h.rf_trees == 0
            || h.rf_max_depth == 0
        {
            return bad("downstream sizes (knn_k, mlp_hidden, mlp_batch, rf_trees, rf_max_depth) must be positive".into());
        }
        let rates = [
            h.lr_rate, h.lr_l2, h.svm_rate, h.svm_l2, h.mlp_rate, h.mlp_l2,
        ];
        if rates.iter().any(|r| !(r.is_finite() && *r >= 0.0))
            || !(0.0..1.0).contains(&h.mlp_momentum)
        {
            return bad(
                "downstream rates must be finite and non-negative, mlp_momentum in [0, 1)".into(),
            );
        }
        Ok(())
    }
}
