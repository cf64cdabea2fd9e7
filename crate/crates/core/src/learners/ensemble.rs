use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_tree, GrowParams, Growth, Presorted, RowStats, Tree};
use super::{class_balanced_weights, sigmoid, validate_binary, LearnerConfig, Loss};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::{derive_index, derive_seed, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    Bagged,
    Boosted,
}

/// Additive tree model.
///
/// Boosted: `margin = base_score + learning_rate · Σ tree(x)`.
/// Bagged: `output = mean tree(x)`; for classification that mean is the
/// class-1 probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub mode: EnsembleMode,
    pub loss: Loss,
    pub trees: Vec<Tree>,
    pub base_score: Option<f64>,
    pub learning_rate: f64,
    pub growth: Growth,
    pub n_features: usize,
}

impl TreeEnsemble {
    /// Scale applied to each tree's output.
    pub fn tree_weight(&self) -> f64 {
        match self.mode {
            EnsembleMode::Boosted => self.learning_rate,
            EnsembleMode::Bagged => 1.0 / self.trees.len().max(1) as f64,
        }
    }

    /// Raw output: boosted margin (log-odds for logistic loss) or bagged mean.
    pub fn raw(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        self.base_score.unwrap_or(0.0) + self.tree_weight() * sum
    }

    pub fn predict_proba_row(&self, x: &[f64]) -> f64 {
        let raw = self.raw(x);
        match (self.mode, self.loss) {
            (EnsembleMode::Boosted, Loss::Logistic) => sigmoid(raw),
            _ => raw.clamp(0.0, 1.0),
        }
    }
}

fn logistic_loss(margins: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let total_w: f64 = w.iter().sum();
    margins
        .iter()
        .zip(y)
        .zip(w)
        .map(|((&m, &t), &wi)| {
            let softplus = if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
            wi * (softplus - t * m)
        })
        .sum::<f64>()
        / total_w
}

fn squared_loss(margins: &[f64], y: &[f64], w: &[f64]) -> f64 {
    let total_w: f64 = w.iter().sum();
    margins.iter().zip(y).zip(w).map(|((m, t), wi)| wi * (m - t).powi(2)).sum::<f64>() / (2.0 * total_w)
}

/// Training loss after each round, starting with the base score alone.
pub type LossTrace = Vec<f64>;

/// Newton gradient boosting. Each round fits one tree to the per-sample
/// gradient/hessian of the loss at the current margin; leaves hold
/// `-G/(H+λ)`.
pub fn fit_gbdt(x: &FeatureMatrix, targets: &[f64], config: &LearnerConfig) -> Result<TreeEnsemble> {
    fit_gbdt_traced(x, targets, None, config).map(|(m, _)| m)
}

pub fn fit_gbdt_traced(
    x: &FeatureMatrix,
    targets: &[f64],
    sample_weights: Option<&[f64]>,
    config: &LearnerConfig,
) -> Result<(TreeEnsemble, LossTrace)> {
    config.validate()?;
    let n = x.n_rows();
    if targets.len() != n {
        return Err(Error::LengthMismatch { left: n, right: targets.len() });
    }
    if n == 0 {
        return Err(Error::EmptyInput("training rows"));
    }
    if let Some(&bad) = targets.iter().find(|t| !t.is_finite()) {
        return Err(Error::DegenerateInput(format!("non-finite target {bad}")));
    }
    let w: Vec<f64> = match sample_weights {
        Some(sw) => {
            if sw.len() != n {
                return Err(Error::LengthMismatch { left: n, right: sw.len() });
            }
            sw.to_vec()
        }
        None => vec![1.0; n],
    };
    let total_w: f64 = w.iter().sum();
    let base = match config.loss {
        Loss::Logistic => {
            if let Some(&bad) = targets.iter().find(|&&t| t != 0.0 && t != 1.0) {
                return Err(Error::NonBinaryLabels(bad));
            }
            let pos: f64 = targets.iter().zip(&w).map(|(t, wi)| t * wi).sum();
            let neg = total_w - pos;
            if pos <= 0.0 || neg <= 0.0 {
                return Err(Error::SingleClass);
            }
            (pos / neg).ln()
        }
        Loss::Squared => targets.iter().zip(&w).map(|(t, wi)| t * wi).sum::<f64>() / total_w,
    };
    let growth = config.growth()?;
    let data = Presorted::new(x);
    let mut margins = vec![base; n];
    let loss_of = |m: &[f64]| match config.loss {
        Loss::Logistic => logistic_loss(m, targets, &w),
        Loss::Squared => squared_loss(m, targets, &w),
    };
    let mut trace = vec![loss_of(&margins)];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut count = vec![1.0; n];
    let mut trees = Vec::with_capacity(config.n_trees);
    let n_feat = x.n_cols();
    for round in 0..config.n_trees {
        let round_seed = derive_index(config.seed, round as u64);
        let mut rng = substream(round_seed, 0);
        // Equal-gain columns are resolved by position in this order. Rounds
        // come in pairs sharing one shuffle, the second reversed, so any two
        // tied columns take turns winning.
        let mut features: Vec<usize> = (0..n_feat).collect();
        features.shuffle(&mut substream(derive_index(config.seed, (round / 2) as u64), 1));
        if round % 2 == 1 {
            features.reverse();
        }
        if config.colsample < 1.0 {
            let keep = ((config.colsample * n_feat as f64).ceil() as usize).clamp(1, n_feat);
            features.truncate(keep);
        }
        for i in 0..n {
            let (g, h) = match config.loss {
                Loss::Logistic => {
                    let p = sigmoid(margins[i]);
                    (p - targets[i], p * (1.0 - p))
                }
                Loss::Squared => (margins[i] - targets[i], 1.0),
            };
            grad[i] = w[i] * g;
            hess[i] = w[i] * h;
            count[i] = if config.subsample < 1.0 {
                f64::from(u8::from(rng.random::<f64>() < config.subsample))
            } else {
                1.0
            };
        }
        let tree = grow_tree(
            &data,
            &RowStats { grad: &grad, hess: &hess, count: &count },
            &GrowParams {
                growth,
                min_leaf_samples: config.min_leaf_samples,
                lambda: config.l2_leaf_lambda,
                features,
                features_per_node: None,
                seed: round_seed,
            },
        );
        for (i, m) in margins.iter_mut().enumerate() {
            *m += config.learning_rate * tree.predict(x.row(i));
        }
        trace.push(loss_of(&margins));
        trees.push(tree);
    }
    Ok((
        TreeEnsemble {
            mode: EnsembleMode::Boosted,
            loss: config.loss,
            trees,
            base_score: Some(base),
            learning_rate: config.learning_rate,
            growth,
            n_features: n_feat,
        },
        trace,
    ))
}

/// Bagged trees: bootstrap rows per tree, √d columns per split, class
/// weights `n / (2 n_c)` for classification. Logistic loss means
/// classification (leaves hold the weighted class-1 fraction); squared loss
/// means regression (leaves hold the mean target).
pub fn fit_forest(x: &FeatureMatrix, targets: &[f64], config: &LearnerConfig) -> Result<TreeEnsemble> {
    config.validate()?;
    let n = x.n_rows();
    if targets.len() != n {
        return Err(Error::LengthMismatch { left: n, right: targets.len() });
    }
    if n == 0 {
        return Err(Error::EmptyInput("training rows"));
    }
    let row_weight: Vec<f64> = match config.loss {
        Loss::Logistic => {
            let labels: Vec<u8> = targets
                .iter()
                .map(|&t| if t == 0.0 || t == 1.0 { Ok(t as u8) } else { Err(Error::NonBinaryLabels(t)) })
                .collect::<Result<_>>()?;
            validate_binary(&labels, n)?;
            let cw = if config.class_balanced { class_balanced_weights(&labels) } else { [1.0, 1.0] };
            labels.iter().map(|&l| cw[l as usize]).collect()
        }
        Loss::Squared => vec![1.0; n],
    };
    let growth = config.growth()?;
    let data = Presorted::new(x);
    let n_feat = x.n_cols();
    let per_node = ((n_feat as f64).sqrt().floor() as usize).max(1);
    let trees: Vec<Tree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let tree_seed = derive_index(derive_seed(config.seed, "forest"), t as u64);
            let mut rng = substream(tree_seed, u64::MAX);
            let mut count = vec![0.0; n];
            if config.bootstrap {
                for _ in 0..n {
                    count[rng.random_range(0..n)] += 1.0;
                }
            } else {
                count.fill(1.0);
            }
            let hess: Vec<f64> = (0..n).map(|i| count[i] * row_weight[i]).collect();
            let grad: Vec<f64> = (0..n).map(|i| -hess[i] * targets[i]).collect();
            grow_tree(
                &data,
                &RowStats { grad: &grad, hess: &hess, count: &count },
                &GrowParams {
                    growth,
                    min_leaf_samples: config.min_leaf_samples,
                    lambda: 0.0,
                    features: (0..n_feat).collect(),
                    features_per_node: Some(per_node),
                    seed: tree_seed,
                },
            )
        })
        .collect();
    Ok(TreeEnsemble {
        mode: EnsembleMode::Bagged,
        loss: config.loss,
        trees,
        base_score: None,
        learning_rate: 1.0,
        growth,
        n_features: n_feat,
    })
}
