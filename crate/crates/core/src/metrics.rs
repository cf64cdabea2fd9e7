//! Classification and regression metrics, percentile bootstrap intervals,
//! Platt scaling and reliability bins.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::sigmoid;
use crate::rng::{derive_index, substream};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    /// Index 0 is the negative class, index 1 the positive class.
    pub per_class: [ClassMetrics; 2],
    pub macro_f1: f64,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
    pub confusion: Confusion,
    pub threshold: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn class_metrics(tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    ClassMetrics {
        precision,
        recall,
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        support: tp + fn_,
    }
}

fn check_inputs(labels: &[u8], probabilities: &[f64]) -> Result<()> {
    if labels.len() != probabilities.len() {
        return Err(Error::LengthMismatch { left: labels.len(), right: probabilities.len() });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
        return Err(Error::NonBinaryLabels(f64::from(bad)));
    }
    Ok(())
}

pub fn confusion(labels: &[u8], probabilities: &[f64], threshold: f64) -> Result<Confusion> {
    check_inputs(labels, probabilities)?;
    let mut c = Confusion::default();
    for (&l, &p) in labels.iter().zip(probabilities) {
        match (l == 1, p >= threshold) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => c.tn += 1,
        }
    }
    Ok(c)
}

/// Hard predictions at `p >= threshold`. A class with no true or predicted
/// members gets F1 = 0.
pub fn classification_report(labels: &[u8], probabilities: &[f64], threshold: f64) -> Result<ClassificationReport> {
    let c = confusion(labels, probabilities, threshold)?;
    let positive = class_metrics(c.tp, c.fp, c.fn_);
    let negative = class_metrics(c.tn, c.fn_, c.fp);
    let auc = match auc_roc(labels, probabilities) {
        Ok(a) => Some(a),
        Err(Error::SingleClass) => None,
        Err(e) => return Err(e),
    };
    Ok(ClassificationReport {
        per_class: [negative, positive],
        macro_f1: 0.5 * (negative.f1 + positive.f1),
        auc,
        confusion: c,
        threshold,
    })
}

pub fn macro_f1(labels: &[u8], probabilities: &[f64]) -> Result<f64> {
    let c = confusion(labels, probabilities, 0.5)?;
    Ok(0.5 * (class_metrics(c.tp, c.fp, c.fn_).f1 + class_metrics(c.tn, c.fn_, c.fp).f1))
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Mann–Whitney estimate: `(R⁺ − n⁺(n⁺+1)/2) / (n⁺ n⁻)` with average ranks.
pub fn auc_roc(labels: &[u8], scores: &[f64]) -> Result<f64> {
    check_inputs(labels, scores)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(r, _)| r).sum();
    let np = n_pos as f64;
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// ROC vertices from the strictest threshold down, starting at (0, 0).
pub fn roc_curve(labels: &[u8], scores: &[f64]) -> Result<Vec<RocPoint>> {
    check_inputs(labels, scores)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (pos, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_tie = order.get(pos + 1).is_none_or(|&next| scores[next] != scores[i]);
        if last_of_tie {
            points.push(RocPoint {
                threshold: scores[i],
                fpr: fp as f64 / n_neg as f64,
                tpr: tp as f64 / n_pos as f64,
            });
        }
    }
    Ok(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub rmse: f64,
    pub mae: f64,
    /// `None` when the targets are constant.
    pub r2: Option<f64>,
}

pub fn regression_metrics(y: &[f64], y_hat: &[f64]) -> Result<RegressionMetrics> {
    if y.len() != y_hat.len() {
        return Err(Error::LengthMismatch { left: y.len(), right: y_hat.len() });
    }
    if y.len() < 2 {
        return Err(Error::EmptyInput("regression metrics need at least 2 rows"));
    }
    let n = y.len() as f64;
    let ss_res: f64 = y.iter().zip(y_hat).map(|(a, b)| (a - b).powi(2)).sum();
    let mae = y.iter().zip(y_hat).map(|(a, b)| (a - b).abs()).sum::<f64>() / n;
    let mean = y.iter().sum::<f64>() / n;
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(RegressionMetrics {
        rmse: (ss_res / n).sqrt(),
        mae,
        r2: (ss_tot > 0.0).then(|| 1.0 - ss_res / ss_tot),
    })
}

pub fn brier(labels: &[u8], probabilities: &[f64]) -> Result<f64> {
    check_inputs(labels, probabilities)?;
    if labels.is_empty() {
        return Err(Error::EmptyInput("brier score"));
    }
    Ok(labels
        .iter()
        .zip(probabilities)
        .map(|(&l, p)| (p - f64::from(l)).powi(2))
        .sum::<f64>()
        / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub point: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub iterations: usize,
    /// Single-class resamples that were redrawn.
    pub redraws: usize,
}

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap over (label, prediction) pairs. Resamples holding a
/// single class are redrawn; more than `10 · iterations` redraws in total
/// is an error.
pub fn bootstrap_ci<M>(metric: M, labels: &[u8], predictions: &[f64], iterations: usize, seed: u64) -> Result<ConfidenceInterval>
where
    M: Fn(&[u8], &[f64]) -> Result<f64> + Sync,
{
    check_inputs(labels, predictions)?;
    let n = labels.len();
    if n < 10 {
        return Err(Error::EmptyInput("bootstrap needs at least 10 pairs"));
    }
    if iterations == 0 {
        return Err(Error::invalid("iterations", "must be positive"));
    }
    let cap = 10 * iterations;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == n {
        // No redraw can ever hold both classes.
        return Err(Error::BootstrapCapExceeded { cap });
    }
    let point = metric(labels, predictions)?;
    let draws: Vec<Result<(f64, usize)>> = (0..iterations)
        .into_par_iter()
        .map(|it| {
            let it_seed = derive_index(seed, it as u64);
            let mut l = vec![0u8; n];
            let mut p = vec![0.0; n];
            for attempt in 0..=cap {
                let mut rng = substream(it_seed, attempt as u64);
                for k in 0..n {
                    let i = rng.random_range(0..n);
                    l[k] = labels[i];
                    p[k] = predictions[i];
                }
                let pos = l.iter().filter(|&&v| v == 1).count();
                if pos > 0 && pos < n {
                    return metric(&l, &p).map(|v| (v, attempt));
                }
            }
            Err(Error::BootstrapCapExceeded { cap })
        })
        .collect();
    let mut values = Vec::with_capacity(iterations);
    let mut redraws = 0;
    for d in draws {
        let (v, r) = d?;
        values.push(v);
        redraws += r;
    }
    if redraws > cap {
        return Err(Error::BootstrapCapExceeded { cap });
    }
    values.sort_by(f64::total_cmp);
    Ok(ConfidenceInterval {
        point,
        lo: percentile(&values, 0.025),
        hi: percentile(&values, 0.975),
        level: 0.95,
        iterations,
        redraws,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlattParams {
    pub a: f64,
    pub b: f64,
    pub iterations: usize,
}

pub const PLATT_MAX_ITERATIONS: usize = 200;
pub const PLATT_TOLERANCE: f64 = 1e-10;

fn platt_nll(scores: &[f64], targets: &[f64], a: f64, b: f64) -> f64 {
    scores
        .iter()
        .zip(targets)
        .map(|(&s, &t)| {
            let m = a * s + b;
            let softplus = if m > 0.0 { m + (-m).exp().ln_1p() } else { m.exp().ln_1p() };
            softplus - t * m
        })
        .sum()
}

/// Fits `p = sigmoid(a·s + b)` by damped Newton on the negative
/// log-likelihood against smoothed targets `(N⁺+1)/(N⁺+2)` and `1/(N⁻+2)`.
/// Converged when the mean gradient's ∞-norm is at most 1e-10.
pub fn fit_platt(scores: &[f64], labels: &[u8]) -> Result<PlattParams> {
    check_inputs(labels, scores)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let n_neg = labels.len() as f64 - n_pos;
    if n_pos == 0.0 || n_neg == 0.0 {
        return Err(Error::SingleClass);
    }
    let hi = (n_pos + 1.0) / (n_pos + 2.0);
    let lo = 1.0 / (n_neg + 2.0);
    let t: Vec<f64> = labels.iter().map(|&l| if l == 1 { hi } else { lo }).collect();
    let n = labels.len() as f64;
    let (mut a, mut b) = (0.0, ((n_pos + 1.0) / (n_neg + 1.0)).ln());
    let mut f = platt_nll(scores, &t, a, b);
    for it in 0..PLATT_MAX_ITERATIONS {
        let (mut ga, mut gb, mut haa, mut hab, mut hbb) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (&s, &ti) in scores.iter().zip(&t) {
            let p = sigmoid(a * s + b);
            let d = p - ti;
            let w = p * (1.0 - p);
            ga += d * s;
            gb += d;
            haa += w * s * s;
            hab += w * s;
            hbb += w;
        }
        if ga.abs().max(gb.abs()) / n <= PLATT_TOLERANCE {
            return Ok(PlattParams { a, b, iterations: it });
        }
        haa += 1e-12;
        hbb += 1e-12;
        let det = haa * hbb - hab * hab;
        let da = -(hbb * ga - hab * gb) / det;
        let db = -(haa * gb - hab * ga) / det;
        let mut step = 1.0;
        loop {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = platt_nll(scores, &t, na, nb);
            // Near the optimum the decrease falls below the rounding noise
            // of the summed objective; a step is then judged by its gradient.
            let noise = 64.0 * f64::EPSILON * f.abs().max(1.0);
            if nf <= f + 1e-4 * step * (ga * da + gb * db) || (step == 1.0 && nf <= f + noise) {
                a = na;
                b = nb;
                f = nf;
                break;
            }
            step /= 2.0;
            if step < 1e-10 {
                return Err(Error::NonConvergence { what: "Platt scaling line search", iterations: it + 1 });
            }
        }
    }
    Err(Error::NonConvergence { what: "Platt scaling", iterations: PLATT_MAX_ITERATIONS })
}

pub fn apply_platt(params: &PlattParams, scores: &[f64]) -> Vec<f64> {
    scores.iter().map(|&s| sigmoid(params.a * s + params.b)).collect()
}

/// Mean negative log-likelihood of probabilities, clamped away from 0 and 1.
pub fn log_loss(labels: &[u8], probabilities: &[f64]) -> Result<f64> {
    check_inputs(labels, probabilities)?;
    let eps = 1e-15;
    Ok(labels
        .iter()
        .zip(probabilities)
        .map(|(&l, &p)| {
            let p = p.clamp(eps, 1.0 - eps);
            if l == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / labels.len().max(1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `None` for an empty bin.
    pub mean_predicted: Option<f64>,
    pub frequency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityDiagram {
    pub bins: Vec<ReliabilityBin>,
}

impl ReliabilityDiagram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Count-weighted mean |mean predicted − frequency| over occupied bins.
    pub fn expected_calibration_error(&self) -> f64 {
        let n = self.total().max(1) as f64;
        self.bins
            .iter()
            .filter_map(|b| Some(b.count as f64 * (b.mean_predicted? - b.frequency?).abs()))
            .sum::<f64>()
            / n
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| map_csv(path, e))?;
        w.write_record(["lo", "hi", "count", "mean_predicted", "frequency"])?;
        for b in &self.bins {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            w.write_record([
                b.lo.to_string(),
                b.hi.to_string(),
                b.count.to_string(),
                opt(b.mean_predicted),
                opt(b.frequency),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn map_csv(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema { path: path.to_path_buf(), detail: format!("{other:?}") },
    }
}

pub fn write_roc_csv(points: &[RocPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| map_csv(path, e))?;
    w.write_record(["threshold", "fpr", "tpr"])?;
    for p in points {
        w.write_record([p.threshold.to_string(), p.fpr.to_string(), p.tpr.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Equal-width bins over `[0, 1]`; the last bin is closed.
pub fn reliability_bins(labels: &[u8], probabilities: &[f64], n_bins: usize) -> Result<ReliabilityDiagram> {
    check_inputs(labels, probabilities)?;
    if n_bins == 0 {
        return Err(Error::invalid("n_bins", "must be positive"));
    }
    let mut sum_p = vec![0.0; n_bins];
    let mut sum_y = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (&l, &p) in labels.iter().zip(probabilities) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::DegenerateInput(format!("probability {p} outside [0, 1]")));
        }
        let k = ((p * n_bins as f64).floor() as usize).min(n_bins - 1);
        sum_p[k] += p;
        sum_y[k] += f64::from(l);
        count[k] += 1;
    }
    let width = 1.0 / n_bins as f64;
    let bins = (0..n_bins)
        .map(|k| {
            let c = count[k] as f64;
            ReliabilityBin {
                lo: k as f64 * width,
                hi: (k + 1) as f64 * width,
                count: count[k],
                mean_predicted: (count[k] > 0).then(|| sum_p[k] / c),
                frequency: (count[k] > 0).then(|| sum_y[k] / c),
            }
        })
        .collect();
    Ok(ReliabilityDiagram { bins })
}

/// Sample standard deviation (n − 1 denominator); 0 for fewer than 2 values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};
    use rand_distr::{Distribution, Normal};

    fn pairwise_auc(labels: &[u8], scores: &[f64]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for i in 0..labels.len() {
            for j in 0..labels.len() {
                if labels[i] == 1 && labels[j] == 0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        wins += 1.0;
                    } else if scores[i] == scores[j] {
                        wins += 0.5;
                    }
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn symmetric_confusion() {
        let r = classification_report(&[1, 0, 1, 0], &[0.9, 0.8, 0.1, 0.2], 0.5).unwrap();
        assert_eq!(r.confusion, Confusion { tp: 1, fp: 1, fn_: 1, tn: 1 });
        assert_eq!(r.per_class[0].f1, 0.5);
        assert_eq!(r.per_class[1].f1, 0.5);
        assert_eq!(r.macro_f1, 0.5);
    }

    #[test]
    fn perfect_and_absent_class() {
        let r = classification_report(&[1, 0, 1], &[0.9, 0.1, 0.7], 0.5).unwrap();
        assert_eq!(r.macro_f1, 1.0);
        let r = classification_report(&[0, 0, 0], &[0.1, 0.2, 0.3], 0.5).unwrap();
        assert_eq!(r.per_class[1].f1, 0.0);
        assert!(r.macro_f1.is_finite());
        assert_eq!(r.auc, None);
        assert!(classification_report(&[0], &[0.1, 0.2], 0.5).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(auc_roc(&[1, 1, 0, 0], &[0.9, 0.8, 0.3, 0.1]).unwrap(), 1.0);
        assert_eq!(auc_roc(&[1, 0, 1, 0], &[0.5; 4]).unwrap(), 0.5);
        assert!(matches!(auc_roc(&[1, 1], &[0.2, 0.3]), Err(Error::SingleClass)));
    }

    #[test]
    fn auc_matches_pair_counting() {
        let mut rng = substream(11, 0);
        for _ in 0..200 {
            let n = rng.random_range(2..30);
            let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
            labels[0] = 0;
            labels[1] = 1;
            // Coarse scores force plenty of ties.
            let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..5u8)) / 4.0).collect();
            let a = auc_roc(&labels, &scores).unwrap();
            assert!((a - pairwise_auc(&labels, &scores)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn auc_rank_invariant(scores in proptest::collection::vec(-5.0f64..5.0, 4..40), seed in any::<u64>()) {
            let mut rng = substream(seed, 0);
            let mut labels: Vec<u8> = scores.iter().map(|_| rng.random_range(0..2)).collect();
            labels[0] = 0;
            labels[1] = 1;
            let transformed: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect();
            prop_assert!((auc_roc(&labels, &scores).unwrap() - auc_roc(&labels, &transformed).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn macro_f1_swap_invariant(probs in proptest::collection::vec(0.0f64..1.0, 1..40), seed in any::<u64>()) {
            let mut rng = substream(seed, 0);
            let labels: Vec<u8> = probs.iter().map(|_| rng.random_range(0..2)).collect();
            // Keep away from the threshold so complementing does not move a row across it.
            let probs: Vec<f64> = probs.iter().map(|&p| if (p - 0.5).abs() < 1e-9 { 0.4 } else { p }).collect();
            let swapped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
            let comp: Vec<f64> = probs.iter().map(|p| 1.0 - p).collect();
            prop_assert!((macro_f1(&labels, &probs).unwrap() - macro_f1(&swapped, &comp).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn brier_bounds(probs in proptest::collection::vec(0.0f64..=1.0, 1..30), seed in any::<u64>()) {
            let mut rng = substream(seed, 0);
            let labels: Vec<u8> = probs.iter().map(|_| rng.random_range(0..2)).collect();
            let b = brier(&labels, &probs).unwrap();
            prop_assert!((0.0..=1.0).contains(&b));
            let exact: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
            prop_assert_eq!(brier(&labels, &exact).unwrap(), 0.0);
        }
    }

    #[test]
    fn regression_examples() {
        let y = [1.0, 2.0, 4.0];
        let m = regression_metrics(&y, &y).unwrap();
        assert_eq!((m.rmse, m.mae, m.r2), (0.0, 0.0, Some(1.0)));
        let mean = [7.0 / 3.0; 3];
        assert!(regression_metrics(&y, &mean).unwrap().r2.unwrap().abs() < 1e-12);
        let m = regression_metrics(&[0.0, 365.0], &[10.0, 355.0]).unwrap();
        assert!((m.rmse - 10.0).abs() < 1e-12);
        assert!((m.mae - 10.0).abs() < 1e-12);
        assert!((m.r2.unwrap() - (1.0 - 200.0 / 66612.5)).abs() < 1e-12);
        assert_eq!(regression_metrics(&[3.0, 3.0], &[1.0, 2.0]).unwrap().r2, None);
        assert!(regression_metrics(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn brier_examples() {
        assert_eq!(brier(&[1, 0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(brier(&[1, 0, 1], &[0.5; 3]).unwrap(), 0.25);
        assert!((brier(&[1, 0], &[0.8, 0.4]).unwrap() - 0.10).abs() < 1e-15);
    }

    #[test]
    fn bootstrap_constant_metric_and_determinism() {
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i % 3 == 0)).collect();
        let perfect: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let ci = bootstrap_ci(macro_f1, &labels, &perfect, 200, 1).unwrap();
        assert_eq!((ci.lo, ci.point, ci.hi), (1.0, 1.0, 1.0));
        let mut rng = substream(4, 0);
        let noisy: Vec<f64> = labels.iter().map(|_| rng.random()).collect();
        assert_eq!(
            bootstrap_ci(auc_roc, &labels, &noisy, 300, 9).unwrap(),
            bootstrap_ci(auc_roc, &labels, &noisy, 300, 9).unwrap()
        );
    }

    #[test]
    fn bootstrap_cap_on_degenerate_data() {
        let p = vec![0.5; 200];
        assert!(matches!(bootstrap_ci(macro_f1, &[0; 200], &p, 100, 0), Err(Error::BootstrapCapExceeded { cap: 1000 })));
        // One positive among 200: about e⁻¹ of resamples miss it and are redrawn.
        let labels: Vec<u8> = (0..200).map(|i| u8::from(i == 0)).collect();
        let ci = bootstrap_ci(auc_roc, &labels, &p, 1000, 0).unwrap();
        let rate = ci.redraws as f64 / (ci.iterations + ci.redraws) as f64;
        assert!((rate - (-1.0f64).exp()).abs() < 0.05, "redraw rate {rate}");
        assert!(bootstrap_ci(auc_roc, &labels[..5], &p[..5], 100, 0).is_err());
    }

    #[test]
    fn bootstrap_ci_covers_point() {
        let mut covered = 0;
        for trial in 0..500u64 {
            let mut rng = substream(trial, 1);
            let labels: Vec<u8> = (0..60).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
            let scores: Vec<f64> = labels.iter().map(|&l| f64::from(l) * 0.5 + rng.random::<f64>()).collect();
            if labels.iter().all(|&l| l == labels[0]) {
                covered += 1;
                continue;
            }
            let ci = bootstrap_ci(auc_roc, &labels, &scores, 1000, trial).unwrap();
            if ci.lo <= ci.point && ci.point <= ci.hi {
                covered += 1;
            }
        }
        assert!(covered >= 495, "covered {covered}/500");
    }

    #[test]
    fn platt_recovers_identity() {
        let mut rng = substream(21, 0);
        let normal = Normal::new(0.0, 2.0).unwrap();
        let mut prev = f64::INFINITY;
        for &n in &[2_000usize, 50_000] {
            let scores: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            let labels: Vec<u8> = scores.iter().map(|&s| u8::from(rng.random::<f64>() < sigmoid(s))).collect();
            let p = fit_platt(&scores, &labels).unwrap();
            let err = (p.a - 1.0).abs().max(p.b.abs());
            assert!(err < 4.0 / (n as f64).sqrt() * 4.0, "n={n} a={} b={}", p.a, p.b);
            assert!(err < prev || err < 0.02);
            prev = err;
        }
    }

    #[test]
    fn platt_sign_and_monotonicity() {
        let scores: Vec<f64> = (0..100).map(|i| i as f64 / 10.0 - 5.0).collect();
        let mut rng = substream(3, 0);
        let labels: Vec<u8> = scores.iter().map(|&s| u8::from(rng.random::<f64>() < sigmoid(-s))).collect();
        let p = fit_platt(&scores, &labels).unwrap();
        assert!(p.a < 0.0);
        let inverted: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
        let q = fit_platt(&scores, &inverted).unwrap();
        assert!(q.a > 0.0);
        let out = apply_platt(&q, &scores);
        assert!(out.windows(2).all(|w| w[1] >= w[0]));
        assert!(matches!(fit_platt(&scores, &[1; 100]), Err(Error::SingleClass)));
    }

    #[test]
    fn platt_does_not_worsen_nll() {
        let mut rng = substream(8, 0);
        let scores: Vec<f64> = (0..500).map(|_| rng.random::<f64>() * 8.0 - 4.0).collect();
        let labels: Vec<u8> = scores.iter().map(|&s| u8::from(rng.random::<f64>() < sigmoid(0.3 * s + 1.0))).collect();
        let p = fit_platt(&scores, &labels).unwrap();
        let before = log_loss(&labels, &scores.iter().map(|&s| sigmoid(s)).collect::<Vec<_>>()).unwrap();
        let after = log_loss(&labels, &apply_platt(&p, &scores)).unwrap();
        assert!(after <= before);
    }

    #[test]
    fn reliability_examples() {
        let d = reliability_bins(&[1; 7], &[0.95; 7], 10).unwrap();
        let occupied: Vec<_> = d.bins.iter().filter(|b| b.count > 0).collect();
        assert_eq!(occupied.len(), 1);
        assert_eq!(occupied[0].count, 7);
        assert!((occupied[0].mean_predicted.unwrap() - 0.95).abs() < 1e-12);
        assert_eq!(occupied[0].frequency, Some(1.0));
        assert_eq!(d.bins[0].mean_predicted, None);
        let d = reliability_bins(&[0, 1, 1], &[0.0, 1.0, 0.1], 10).unwrap();
        assert_eq!(d.total(), 3);
        assert_eq!(d.bins[9].count, 1);
        assert_eq!(d.bins[1].count, 1);
    }

    #[test]
    fn calibrated_draws_converge() {
        let mut rng = substream(13, 0);
        let mut prev = f64::INFINITY;
        for &n in &[2_000usize, 200_000] {
            let probs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let labels: Vec<u8> = probs.iter().map(|&p| u8::from(rng.random::<f64>() < p)).collect();
            let ece = reliability_bins(&labels, &probs, 10).unwrap().expected_calibration_error();
            assert!(ece < prev);
            prev = ece;
        }
        assert!(prev < 0.01);
    }

    #[test]
    fn roc_curve_ends_at_one() {
        let pts = roc_curve(&[1, 0, 1, 0], &[0.9, 0.9, 0.4, 0.1]).unwrap();
        assert_eq!(pts.first().unwrap().fpr, 0.0);
        let last = pts.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert_eq!(pts.len(), 4);
    }

    #[test]
    fn std_helper() {
        assert!((sample_std(&[1.0, 2.0, 3.0, 4.0]) - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert_eq!(sample_std(&[2.0]), 0.0);
    }
}
