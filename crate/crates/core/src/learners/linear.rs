use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{class_balanced_weights, sigmoid, validate_binary};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const MAX_NEWTON_ITERATIONS: usize = 100;
pub const GRADIENT_TOLERANCE: f64 = 1e-8;

/// L2-penalised logistic regression. Coefficients are stored in the raw
/// feature space; the penalty is applied to the standardised coefficients
/// during fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub l2_lambda: f64,
    pub class_weights: [f64; 2],
    pub converged: bool,
    pub iterations: usize,
}

impl LinearModel {
    pub fn margin(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict_proba_row(&self, x: &[f64]) -> f64 {
        sigmoid(self.margin(x))
    }
}

fn objective(
    z: &DMatrix<f64>,
    y: &[f64],
    c: &[f64],
    theta: &DVector<f64>,
    lambda: f64,
) -> f64 {
    let d = theta.len() - 1;
    let margins = z * theta;
    let mut loss = 0.0;
    for i in 0..y.len() {
        let m = margins[i];
        // log(1 + e^m) - y·m, computed stably.
        let softplus = if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
        loss += c[i] * (softplus - y[i] * m);
    }
    loss + 0.5 * lambda * theta.rows(0, d).norm_squared()
}

/// Newton-Raphson with backtracking on the class-weighted, L2-penalised
/// logistic loss. Stops when the gradient ∞-norm reaches 1e-8 or after 100
/// iterations (`converged` records which).
pub fn fit_logistic(
    x: &FeatureMatrix,
    labels: &[u8],
    l2_lambda: f64,
    class_weights: Option<[f64; 2]>,
) -> Result<LinearModel> {
    validate_binary(labels, x.n_rows())?;
    if !(l2_lambda.is_finite() && l2_lambda >= 0.0) {
        return Err(Error::invalid("l2_lambda", "must be finite and >= 0"));
    }
    let cw = class_weights.unwrap_or_else(|| class_balanced_weights(labels));
    let n = x.n_rows();
    let d = x.n_cols();
    let stats = x.column_stats();
    let scale: Vec<f64> = stats.iter().map(|s| if s.std > 0.0 { s.std } else { 1.0 }).collect();
    // Standardised design with a trailing intercept column.
    let z = DMatrix::from_fn(n, d + 1, |i, j| {
        if j == d {
            1.0
        } else {
            (x.get(i, j) - stats[j].mean) / scale[j]
        }
    });
    let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let c: Vec<f64> = labels.iter().map(|&l| cw[l as usize]).collect();
    let mut theta = DVector::zeros(d + 1);
    let mut converged = false;
    let mut iterations = 0;
    let mut current = objective(&z, &y, &c, &theta, l2_lambda);
    while iterations < MAX_NEWTON_ITERATIONS {
        let margins = &z * &theta;
        let mut resid = DVector::zeros(n);
        let mut curv = DVector::zeros(n);
        for i in 0..n {
            let p = sigmoid(margins[i]);
            resid[i] = c[i] * (p - y[i]);
            curv[i] = c[i] * p * (1.0 - p);
        }
        let mut grad = z.transpose() * &resid;
        for j in 0..d {
            grad[j] += l2_lambda * theta[j];
        }
        if grad.amax() <= GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        let mut weighted = z.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= curv[i];
        }
        let mut hess = z.transpose() * weighted;
        for j in 0..d {
            hess[(j, j)] += l2_lambda;
        }
        // Tiny ridge keeps the solve defined when a direction is flat.
        for j in 0..=d {
            hess[(j, j)] += 1e-12;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => hess.lu().solve(&grad).unwrap_or_else(|| grad.clone()),
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &theta - t * &step;
            let val = objective(&z, &y, &c, &cand, l2_lambda);
            if val <= current {
                theta = cand;
                current = val;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break;
        }
    }
    let weights: Vec<f64> = (0..d).map(|j| theta[j] / scale[j]).collect();
    let bias = theta[d] - (0..d).map(|j| theta[j] * stats[j].mean / scale[j]).sum::<f64>();
    Ok(LinearModel {
        weights,
        bias,
        l2_lambda,
        class_weights: cw,
        converged,
        iterations,
    })
}
