//! From-scratch learners: class-balanced logistic regression, a bagged
//! forest and two Newton-boosted tree ensembles (level-wise and leaf-wise
//! growth), sharing one exact-split tree grower.

mod ensemble;
mod linear;
mod tree;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use ensemble::{fit_forest, fit_gbdt, fit_gbdt_traced, EnsembleMode, LossTrace, TreeEnsemble};
pub use linear::{fit_logistic, LinearModel};
pub use tree::{best_split, Growth, Split, SplitDecision, Tree, TreeNode};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Forest,
    GbdtLevel,
    GbdtLeaf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [Self::Logistic, Self::Forest, Self::GbdtLevel, Self::GbdtLeaf];

    pub fn display_name(self) -> &'static str {
        match self {
            Self::Logistic => "Logistic Regression",
            Self::Forest => "Random Forest",
            Self::GbdtLevel => "GBDT level-wise (depth 5)",
            Self::GbdtLeaf => "GBDT leaf-wise (31 leaves)",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logistic" => Ok(Self::Logistic),
            "forest" => Ok(Self::Forest),
            "gbdt_level" | "gbdt-level" => Ok(Self::GbdtLevel),
            "gbdt_leaf" | "gbdt-leaf" => Ok(Self::GbdtLeaf),
            other => Err(Error::invalid("model", format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Logistic,
    Squared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub kind: ModelKind,
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub max_leaves: Option<usize>,
    pub learning_rate: f64,
    pub min_leaf_samples: usize,
    /// Leaf regularisation λ for boosted trees.
    pub l2_leaf_lambda: f64,
    /// Coefficient penalty for logistic regression.
    pub l2_lambda: f64,
    pub subsample: f64,
    pub colsample: f64,
    pub bootstrap: bool,
    pub class_balanced: bool,
    pub loss: Loss,
    pub seed: u64,
}

impl LearnerConfig {
    pub fn logistic() -> Self {
        LearnerConfig {
            kind: ModelKind::Logistic,
            n_trees: 0,
            max_depth: None,
            max_leaves: None,
            learning_rate: 1.0,
            min_leaf_samples: 1,
            l2_leaf_lambda: 0.0,
            l2_lambda: 1.0,
            subsample: 1.0,
            colsample: 1.0,
            bootstrap: false,
            class_balanced: true,
            loss: Loss::Logistic,
            seed: 0,
        }
    }

    /// 200 trees, depth 10, balanced class weights.
    pub fn forest() -> Self {
        LearnerConfig {
            kind: ModelKind::Forest,
            n_trees: 200,
            max_depth: Some(10),
            min_leaf_samples: 5,
            bootstrap: true,
            ..Self::logistic()
        }
    }

    /// 200 rounds, learning rate 0.05, depth 5.
    pub fn gbdt_level() -> Self {
        LearnerConfig {
            kind: ModelKind::GbdtLevel,
            n_trees: 200,
            max_depth: Some(5),
            max_leaves: None,
            learning_rate: 0.05,
            min_leaf_samples: 20,
            l2_leaf_lambda: 1.0,
            class_balanced: false,
            ..Self::logistic()
        }
    }

    /// 200 rounds, learning rate 0.05, 31 leaves.
    pub fn gbdt_leaf() -> Self {
        LearnerConfig {
            kind: ModelKind::GbdtLeaf,
            max_depth: None,
            max_leaves: Some(31),
            ..Self::gbdt_level()
        }
    }

    pub fn preset(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Logistic => Self::logistic(),
            ModelKind::Forest => Self::forest(),
            ModelKind::GbdtLevel => Self::gbdt_level(),
            ModelKind::GbdtLeaf => Self::gbdt_leaf(),
        }
    }

    /// Regression presets for the service-time task. Boosted models use
    /// shallow trees with more rounds, which suits the additive target.
    pub fn regression_preset(kind: ModelKind) -> Self {
        let base = Self::preset(kind);
        match kind {
            ModelKind::GbdtLevel => LearnerConfig {
                n_trees: 600,
                max_depth: Some(2),
                learning_rate: 0.1,
                loss: Loss::Squared,
                ..base
            },
            ModelKind::GbdtLeaf => LearnerConfig {
                n_trees: 600,
                max_leaves: Some(3),
                learning_rate: 0.1,
                loss: Loss::Squared,
                ..base
            },
            _ => LearnerConfig {
                loss: Loss::Squared,
                class_balanced: false,
                ..base
            },
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == ModelKind::Forest && self.n_trees == 0 {
            return Err(Error::invalid("n_trees", "a forest needs at least one tree"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning_rate", "must lie in (0, 1]"));
        }
        if self.min_leaf_samples == 0 {
            return Err(Error::invalid("min_leaf_samples", "must be positive"));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::invalid("subsample", "must lie in (0, 1]"));
        }
        if !(self.colsample > 0.0 && self.colsample <= 1.0) {
            return Err(Error::invalid("colsample", "must lie in (0, 1]"));
        }
        if !(self.l2_leaf_lambda >= 0.0 && self.l2_lambda >= 0.0) {
            return Err(Error::invalid("l2_leaf_lambda", "regularisation must be >= 0"));
        }
        Ok(())
    }

    pub fn growth(&self) -> Result<Growth> {
        match (self.kind, self.max_leaves, self.max_depth) {
            (ModelKind::GbdtLeaf, Some(l), d) if l >= 1 => Ok(Growth::LeafWise { max_leaves: l, max_depth: d }),
            (ModelKind::GbdtLeaf, _, _) => Err(Error::invalid("max_leaves", "leaf-wise growth needs max_leaves >= 1")),
            (_, _, Some(d)) => Ok(Growth::LevelWise { max_depth: d }),
            (_, _, None) => Ok(Growth::LevelWise { max_depth: usize::MAX }),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `n / (2 · n_c)` per class.
pub fn class_balanced_weights(labels: &[u8]) -> [f64; 2] {
    let n = labels.len() as f64;
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let neg = n - pos;
    [
        if neg > 0.0 { n / (2.0 * neg) } else { 1.0 },
        if pos > 0.0 { n / (2.0 * pos) } else { 1.0 },
    ]
}

pub(crate) fn validate_binary(labels: &[u8], n_rows: usize) -> Result<()> {
    if labels.len() != n_rows {
        return Err(Error::LengthMismatch { left: n_rows, right: labels.len() });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::NonBinaryLabels(f64::from(bad)));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// A trained model of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Model {
    Linear(LinearModel),
    Ensemble(TreeEnsemble),
}

impl Model {
    pub fn n_features(&self) -> usize {
        match self {
            Model::Linear(m) => m.weights.len(),
            Model::Ensemble(e) => e.n_features,
        }
    }

    fn check_dims(&self, x: &FeatureMatrix) -> Result<()> {
        if x.n_cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                found: x.n_cols(),
            });
        }
        Ok(())
    }

    /// Class-1 probability per row, always in `[0, 1]`.
    pub fn predict_proba(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        Ok(x
            .rows()
            .map(|r| match self {
                Model::Linear(m) => m.predict_proba_row(r),
                Model::Ensemble(e) => e.predict_proba_row(r),
            })
            .collect())
    }

    /// Linear score, boosted margin, or bagged mean.
    pub fn predict_raw(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        Ok(x
            .rows()
            .map(|r| match self {
                Model::Linear(m) => m.margin(r),
                Model::Ensemble(e) => e.raw(r),
            })
            .collect())
    }
}

/// Fits the configured model. Classification targets are 0/1 values.
pub fn fit(config: &LearnerConfig, x: &FeatureMatrix, targets: &[f64]) -> Result<Model> {
    config.validate()?;
    match config.kind {
        ModelKind::Logistic => {
            let labels: Vec<u8> = targets
                .iter()
                .map(|&t| if t == 0.0 || t == 1.0 { Ok(t as u8) } else { Err(Error::NonBinaryLabels(t)) })
                .collect::<Result<_>>()?;
            let cw = if config.class_balanced { None } else { Some([1.0, 1.0]) };
            fit_logistic(x, &labels, config.l2_lambda, cw).map(Model::Linear)
        }
        ModelKind::Forest => fit_forest(x, targets, config).map(Model::Ensemble),
        ModelKind::GbdtLevel | ModelKind::GbdtLeaf => fit_gbdt(x, targets, config).map(Model::Ensemble),
    }
}

pub fn fit_classifier(config: &LearnerConfig, x: &FeatureMatrix, labels: &[u8]) -> Result<Model> {
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    fit(config, x, &y)
}

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Versioned on-disk model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub config: LearnerConfig,
    pub model: Model,
}

impl ModelDocument {
    pub fn new(model: Model, config: LearnerConfig, feature_names: Vec<String>) -> Self {
        ModelDocument {
            format_version: MODEL_FORMAT_VERSION,
            feature_names,
            config,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let version = value.get("format_version").and_then(serde_json::Value::as_u64).unwrap_or(0) as u32;
        if version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelVersion(version));
        }
        Ok(serde_json::from_value(value)?)
    }
}
