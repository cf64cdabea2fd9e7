//! Stratified k-fold, time-ordered splits and SMOTE restricted to training
//! partitions.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::{derive_seed, substream};

/// A (train, test) index pair. Only the splitters in this module create
/// one, which is what lets [`TrainPartition`] vouch for its rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    train: Vec<usize>,
    test: Vec<usize>,
}

impl Fold {
    pub fn train(&self) -> &[usize] {
        &self.train
    }

    pub fn test(&self) -> &[usize] {
        &self.test
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub folds: Vec<Fold>,
    pub seed: u64,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.folds.len()
    }
}

/// Shuffles each class with a seeded substream, then deals rows
/// round-robin into `k` folds. The dealing position carries over from one
/// class to the next so fold sizes stay within one of each other.
pub fn stratified_kfold(labels: &[u8], k: usize, seed: u64) -> Result<FoldPlan> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::invalid("k", "need at least 2 folds"));
    }
    if k > n {
        return Err(Error::invalid("k", format!("{k} folds requested for {n} samples")));
    }
    let mut assignment = vec![0usize; n];
    let mut classes: Vec<u8> = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let mut next = 0usize;
    for &c in &classes {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut substream(seed, u64::from(c)));
        for i in members {
            assignment[i] = next;
            next = (next + 1) % k;
        }
    }
    let folds = (0..k)
        .map(|f| Fold {
            train: (0..n).filter(|&i| assignment[i] != f).collect(),
            test: (0..n).filter(|&i| assignment[i] == f).collect(),
        })
        .collect();
    Ok(FoldPlan { folds, seed })
}

/// Orders rows by `(timestamp, index)` and puts the first
/// `round(train_fraction · n)` into train.
pub fn time_split<T: PartialOrd>(timestamps: &[T], train_fraction: f64) -> Result<Fold> {
    let n = timestamps.len();
    if n < 2 {
        return Err(Error::EmptyInput("time split needs at least 2 rows"));
    }
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid("train_fraction", "must lie in (0, 1)"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        timestamps[a]
            .partial_cmp(&timestamps[b])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    if timestamps.iter().all(|t| t.partial_cmp(&timestamps[0]) == Some(Ordering::Equal)) {
        log::warn!("all {n} timestamps are equal; time split falls back to row order");
    }
    let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let test = order.split_off(n_train);
    Ok(Fold { train: order, test })
}

/// Rows of a training split. SMOTE accepts only this type, so it cannot be
/// pointed at evaluation rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPartition {
    matrix: FeatureMatrix,
    labels: Vec<u8>,
}

impl TrainPartition {
    pub fn from_fold(x: &FeatureMatrix, labels: &[u8], fold: &Fold) -> Result<Self> {
        if x.n_rows() != labels.len() {
            return Err(Error::LengthMismatch { left: x.n_rows(), right: labels.len() });
        }
        Ok(TrainPartition {
            matrix: x.select_rows(&fold.train),
            labels: fold.train.iter().map(|&i| labels[i]).collect(),
        })
    }

    /// Wraps arbitrary rows. Used only by the leakage demonstration, which
    /// deliberately oversamples before splitting.
    pub(crate) fn unchecked(matrix: FeatureMatrix, labels: Vec<u8>) -> Self {
        TrainPartition { matrix, labels }
    }

    pub fn matrix(&self) -> &FeatureMatrix {
        &self.matrix
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn into_parts(self) -> (FeatureMatrix, Vec<u8>) {
        (self.matrix, self.labels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Minority count after oversampling, as a fraction of the majority.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

/// Parents of one synthetic row, as indices into the partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutput {
    /// Original rows followed by the synthetic ones.
    pub matrix: FeatureMatrix,
    pub labels: Vec<u8>,
    pub origins: Vec<SyntheticOrigin>,
}

impl SmoteOutput {
    pub fn n_synthetic(&self) -> usize {
        self.origins.len()
    }
}

pub fn interpolate(a: &[f64], b: &[f64], lambda: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + lambda * (y - x)).collect()
}

/// Sets each one-hot block to its argmax (lowest index on ties).
pub fn snap_blocks(row: &mut [f64], blocks: &[Vec<usize>]) {
    for block in blocks {
        let Some(&best) = block
            .iter()
            .reduce(|a, b| if row[*b] > row[*a] { b } else { a })
        else {
            continue;
        };
        for &j in block {
            row[j] = if j == best { 1.0 } else { 0.0 };
        }
    }
}

/// Synthetic minority oversampling. Neighbours are found among the minority
/// rows in Euclidean distance over columns standardised with the
/// partition's own statistics. Synthetic row `s` takes minority row
/// `s mod m` as its base, so every minority row is used evenly.
pub fn smote(partition: &TrainPartition, config: &SmoteConfig) -> Result<SmoteOutput> {
    let x = &partition.matrix;
    let labels = &partition.labels;
    if config.k_neighbors == 0 {
        return Err(Error::invalid("k_neighbors", "must be positive"));
    }
    if !(config.target_ratio > 0.0 && config.target_ratio.is_finite()) {
        return Err(Error::invalid("target_ratio", "must be positive"));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    let minority_label = u8::from(pos <= neg);
    let minority: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == minority_label).collect();
    let majority = labels.len() - minority.len();
    let m = minority.len();
    if m <= config.k_neighbors {
        return Err(Error::InsufficientMinority { minority: m, k_neighbors: config.k_neighbors });
    }
    let wanted = (config.target_ratio * majority as f64).round() as usize;
    let n_synth = wanted.saturating_sub(m);

    let scale: Vec<(f64, f64)> = x
        .column_stats()
        .iter()
        .map(|s| (s.mean, if s.std > 0.0 { s.std } else { 1.0 }))
        .collect();
    let z: Vec<Vec<f64>> = minority
        .iter()
        .map(|&i| x.row(i).iter().zip(&scale).map(|(v, (mu, sd))| (v - mu) / sd).collect())
        .collect();
    let neighbors: Vec<Vec<usize>> = (0..m)
        .into_par_iter()
        .map(|a| {
            let mut d: Vec<(f64, usize)> = (0..m)
                .filter(|&b| b != a)
                .map(|b| (z[a].iter().zip(&z[b]).map(|(p, q)| (p - q).powi(2)).sum(), b))
                .collect();
            d.sort_by(|p, q| p.0.total_cmp(&q.0).then(p.1.cmp(&q.1)));
            d.truncate(config.k_neighbors);
            d.into_iter().map(|(_, b)| b).collect()
        })
        .collect();

    let stream_seed = derive_seed(config.seed, "smote");
    let blocks = x.categorical_blocks();
    let synthetic: Vec<(Vec<f64>, SyntheticOrigin)> = (0..n_synth)
        .into_par_iter()
        .map(|s| {
            let mut rng = substream(stream_seed, s as u64);
            let a = s % m;
            let b = neighbors[a][rng.random_range(0..neighbors[a].len())];
            let lambda: f64 = rng.random();
            let base = minority[a];
            let neighbor = minority[b];
            let mut row = interpolate(x.row(base), x.row(neighbor), lambda);
            snap_blocks(&mut row, blocks);
            (row, SyntheticOrigin { base, neighbor, lambda })
        })
        .collect();

    let mut matrix = x.clone();
    let mut out_labels = labels.clone();
    let mut origins = Vec::with_capacity(n_synth);
    for (row, origin) in synthetic {
        matrix.push_row(&row)?;
        out_labels.push(minority_label);
        origins.push(origin);
    }
    Ok(SmoteOutput {
        matrix,
        labels: out_labels,
        origins,
    })
}
