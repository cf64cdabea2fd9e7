//! Path-dependent TreeSHAP over the tree ensembles, in margin units.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::learners::{Tree, TreeEnsemble};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapVector {
    pub values: Vec<f64>,
    /// Cover-weighted expected margin.
    pub base_value: f64,
}

impl ShapVector {
    pub fn total(&self) -> f64 {
        self.base_value + self.values.iter().sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: usize,
    zero: f64,
    one: f64,
    weight: f64,
}

const NO_FEATURE: usize = usize::MAX;

fn extend(path: &mut Vec<PathElement>, zero: f64, one: f64, feature: usize) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero,
        one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let d = depth as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / (d + 1.0);
        path[i].weight = zero * path[i].weight * (d - i as f64) / (d + 1.0);
    }
}

fn unwind(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let d = depth as f64;
    let PathElement { one, zero, .. } = path[index];
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * (d + 1.0) / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (d - i as f64) / (d + 1.0);
        } else {
            path[i].weight = path[i].weight * (d + 1.0) / (zero * (d - i as f64));
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
    path.pop();
}

fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let d = depth as f64;
    let PathElement { one, zero, .. } = path[index];
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * (d + 1.0) / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (d - i as f64) / (d + 1.0);
        } else if zero != 0.0 {
            total += path[i].weight / zero / ((d - i as f64) / (d + 1.0));
        }
    }
    total
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    tree: &Tree,
    x: &[f64],
    phi: &mut [f64],
    node: usize,
    parent: &[PathElement],
    zero: f64,
    one: f64,
    feature: usize,
) {
    let mut path = parent.to_vec();
    extend(&mut path, zero, one, feature);
    let n = &tree.nodes[node];
    match &n.split {
        None => {
            for i in 1..path.len() {
                let w = unwound_sum(&path, i);
                let el = path[i];
                phi[el.feature] += w * (el.one - el.zero) * n.value;
            }
        }
        Some(s) => {
            let (hot, cold) = if x[s.feature] <= s.threshold { (s.left, s.right) } else { (s.right, s.left) };
            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            if let Some(k) = path.iter().position(|e| e.feature == s.feature) {
                incoming_zero = path[k].zero;
                incoming_one = path[k].one;
                unwind(&mut path, k);
            }
            let cover = n.cover;
            recurse(tree, x, phi, hot, &path, incoming_zero * tree.nodes[hot].cover / cover, incoming_one, s.feature);
            recurse(tree, x, phi, cold, &path, incoming_zero * tree.nodes[cold].cover / cover, 0.0, s.feature);
        }
    }
}

fn check_covers(ensemble: &TreeEnsemble) -> Result<()> {
    for (t, tree) in ensemble.trees.iter().enumerate() {
        if let Some(node) = tree.nodes.iter().position(|n| !(n.cover > 0.0 && n.cover.is_finite())) {
            return Err(Error::MissingCover { tree: t, node });
        }
    }
    Ok(())
}

/// Cover-weighted mean leaf value.
pub fn expected_value(tree: &Tree) -> f64 {
    let root = tree.nodes[0].cover;
    tree.nodes
        .iter()
        .filter(|n| n.split.is_none())
        .map(|n| n.cover * n.value)
        .sum::<f64>()
        / root
}

/// Attributions of one tree's raw output.
pub fn tree_shap_single(tree: &Tree, x: &[f64], n_features: usize) -> Vec<f64> {
    let mut phi = vec![0.0; n_features];
    recurse(tree, x, &mut phi, 0, &[], 1.0, 1.0, NO_FEATURE);
    phi
}

fn shap_unchecked(ensemble: &TreeEnsemble, x: &[f64]) -> ShapVector {
    let w = ensemble.tree_weight();
    let mut values = vec![0.0; ensemble.n_features];
    let mut base = ensemble.base_score.unwrap_or(0.0);
    for tree in &ensemble.trees {
        for (v, p) in values.iter_mut().zip(tree_shap_single(tree, x, ensemble.n_features)) {
            *v += w * p;
        }
        base += w * expected_value(tree);
    }
    ShapVector { values, base_value: base }
}

/// Per-feature attributions whose sum plus `base_value` is the ensemble's
/// raw margin at `x`.
pub fn tree_shap(ensemble: &TreeEnsemble, x: &[f64]) -> Result<ShapVector> {
    check_covers(ensemble)?;
    if x.len() != ensemble.n_features {
        return Err(Error::DimensionMismatch { expected: ensemble.n_features, found: x.len() });
    }
    Ok(shap_unchecked(ensemble, x))
}

pub fn shap_matrix(ensemble: &TreeEnsemble, matrix: &FeatureMatrix) -> Result<Vec<ShapVector>> {
    check_covers(ensemble)?;
    if matrix.n_cols() != ensemble.n_features {
        return Err(Error::DimensionMismatch { expected: ensemble.n_features, found: matrix.n_cols() });
    }
    Ok((0..matrix.n_rows())
        .into_par_iter()
        .map(|i| shap_unchecked(ensemble, matrix.row(i)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub index: usize,
    pub name: String,
    pub mean_abs_shap: f64,
}

/// Features by descending mean |SHAP|, ties by column index.
pub fn rank_importance(shaps: &[ShapVector], names: &[String]) -> Vec<FeatureImportance> {
    let d = names.len();
    let mut sums = vec![0.0; d];
    for s in shaps {
        for (acc, v) in sums.iter_mut().zip(&s.values) {
            *acc += v.abs();
        }
    }
    let n = shaps.len().max(1) as f64;
    let mut ranked: Vec<FeatureImportance> = (0..d)
        .map(|j| FeatureImportance {
            index: j,
            name: names[j].clone(),
            mean_abs_shap: sums[j] / n,
        })
        .collect();
    ranked.sort_by(|a, b| b.mean_abs_shap.total_cmp(&a.mean_abs_shap).then(a.index.cmp(&b.index)));
    ranked
}

pub fn mean_abs_shap(ensemble: &TreeEnsemble, matrix: &FeatureMatrix) -> Result<Vec<FeatureImportance>> {
    if matrix.is_empty() {
        return Err(Error::EmptyInput("SHAP ranking needs at least one row"));
    }
    let shaps = shap_matrix(ensemble, matrix)?;
    Ok(rank_importance(&shaps, matrix.column_names()))
}

/// Long-format export: one line per (row, feature) with the feature value
/// and its attribution.
pub fn write_shap_csv(matrix: &FeatureMatrix, shaps: &[ShapVector], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row", "feature", "value", "shap", "base_value"])?;
    for (i, s) in shaps.iter().enumerate() {
        for (j, name) in matrix.column_names().iter().enumerate() {
            w.write_record([
                i.to_string(),
                name.clone(),
                matrix.get(i, j).to_string(),
                s.values[j].to_string(),
                s.base_value.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
