//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! The AI4I criteria read the file named by `AI4I_CSV` when it is set and
//! otherwise a rule-based surrogate generated in a temporary directory.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;

use ctxmaint_core::experiments::{
    DatasetSource, ExperimentReport, ExperimentSpec, Protocol, DEFAULT_SIGMAS,
};
use ctxmaint_core::explain::{expected_value, shap_matrix, tree_shap};
use ctxmaint_core::features::{FeatureGroup, FeatureMatrix};
use ctxmaint_core::learners::{
    fit_classifier, EnsembleMode, Growth, LearnerConfig, Loss, Model, ModelKind, Split, Tree, TreeEnsemble, TreeNode,
};
use ctxmaint_core::metrics::{auc_roc, bootstrap_ci, macro_f1, mean, sample_std};
use ctxmaint_core::resample::{smote, stratified_kfold, SmoteConfig, TrainPartition};
use ctxmaint_core::rng::substream;
use ctxmaint_core::synthgen::GeneratorConfig;
use ctxmaint_core::experiments::Dataset;
use ctxmaint_edgesim::{
    align_window, band_power, interpolate_at, latency_model, simulate_streams, LatencyMode, Scenario, Source,
    BAND_HZ, MODELLED_LABEL,
};

type Check = Result<String, String>;
type Criterion = (&'static str, fn(&mut Context) -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

struct Context {
    ai4i: PathBuf,
    reports: Vec<ExperimentReport>,
}

impl Context {
    fn run(&mut self, spec: ExperimentSpec) -> Result<ExperimentReport, String> {
        let r = spec.run().map_err(err)?;
        self.reports.push(r.clone());
        Ok(r)
    }

    fn ai4i(&self) -> DatasetSource {
        DatasetSource::Ai4i { path: self.ai4i.clone() }
    }
}

fn c1_ai4i_benchmark(ctx: &mut Context) -> Check {
    let start = Instant::now();
    let mut spec = ExperimentSpec::benchmark(ctx.ai4i(), Protocol::StratifiedCv);
    if let ExperimentSpec::Benchmark(b) = &mut spec {
        b.per_mode = true;
    }
    let r = ctx.run(spec)?;
    let secs = start.elapsed().as_secs_f64();
    let leaf = ModelKind::GbdtLeaf.display_name();
    let auc = r.mean_of(leaf, "auc");
    let f1 = r.mean_of(leaf, "f1");
    let auc_std = r.cell(leaf, "auc").map_or(f64::NAN, |c| c.std);
    let linear = r.mean_of(ModelKind::Logistic.display_name(), "f1");
    let others: Vec<f64> = ModelKind::ALL
        .iter()
        .filter(|&&k| k != ModelKind::Logistic)
        .map(|k| r.mean_of(k.display_name(), "f1"))
        .collect();
    let detail = format!(
        "leaf-wise AUC {auc:.4} (std {auc_std:.4}) F1 {f1:.4}; linear F1 {linear:.4}; other F1 {others:.4?}; {secs:.0}s incl. per-mode"
    );
    ensure(auc >= 0.95, format!("AUC below 0.95: {detail}"))?;
    ensure(f1 >= 0.70, format!("F1 below 0.70: {detail}"))?;
    ensure(others.iter().all(|&o| linear < o), format!("linear baseline not strictly lowest: {detail}"))?;
    ensure(secs <= 600.0, format!("runtime over 10 min: {detail}"))?;
    Ok(detail)
}

fn c2_per_mode(ctx: &mut Context) -> Check {
    let r = ctx
        .reports
        .iter()
        .find(|r| r.id == "benchmark")
        .ok_or("benchmark report missing")?;
    let leaf = ModelKind::GbdtLeaf.display_name();
    let hdf = r.mean_of(&format!("HDF ({leaf})"), "f1");
    let rnf = r.mean_of(&format!("RNF ({leaf})"), "f1");
    let detail = format!("HDF F1 {hdf:.4}, RNF F1 {rnf:.4}");
    ensure(hdf >= 0.85, format!("HDF F1 below 0.85: {detail}"))?;
    ensure(rnf <= 0.60, format!("RNF F1 above 0.60: {detail}"))?;
    Ok(detail)
}

fn c3_ablation(ctx: &mut Context) -> Check {
    let r = ctx.run(ExperimentSpec::ablation())?;
    let drop = |row: &str| r.mean_of(row, "drop");
    let a = drop("Without internal (A)");
    let b = drop("Without driver (B)");
    let c = drop("Without environmental (C)");
    let d = drop("Without interactions (D)");
    let a_only = drop("Internal only (A)");
    let full = r.mean_of("All features", "f1");
    let detail = format!(
        "drops A {a:.4} C {c:.4} B {b:.4} D {d:.4}; A-only deficit {a_only:.4}; full F1 {full:.4}"
    );
    ensure(a > c && c > b && b >= d && d >= 0.0, format!("ordering A > C > B >= D >= 0 violated: {detail}"))?;
    ensure(a_only > c, format!("A-only deficit not above C drop: {detail}"))?;
    ensure((0.80..=0.92).contains(&full), format!("full F1 outside [0.80, 0.92]: {detail}"))?;
    Ok(detail)
}

fn c4_noise(ctx: &mut Context) -> Check {
    let r = ctx.run(ExperimentSpec::noise_sweep())?;
    let rows: Vec<String> = DEFAULT_SIGMAS.iter().map(|s| format!("sigma={s}")).collect();
    let f1: Vec<f64> = rows.iter().map(|row| r.mean_of(row, "f1")).collect();
    let auc: Vec<f64> = rows.iter().map(|row| r.mean_of(row, "auc")).collect();
    let pooled = {
        let vars: Vec<f64> = rows
            .iter()
            .map(|row| sample_std(&r.cell(row, "f1").expect("cell").values).powi(2))
            .collect();
        mean(&vars).sqrt()
    };
    let last = f1.len() - 1;
    let f1_rel = (f1[0] - f1[last]) / f1[0];
    let auc_rel = (auc[0] - auc[last]) / auc[0];
    let detail = format!(
        "F1 {f1:.3?}; AUC {auc:.3?}; pooled std {pooled:.4}; relative loss F1 {f1_rel:.3} AUC {auc_rel:.3}"
    );
    ensure(f1.windows(2).all(|w| w[1] <= w[0] + pooled), format!("F1 rises by more than one pooled std: {detail}"))?;
    ensure(f1[0] - f1[last] >= 0.10, format!("F1(0) - F1(3) below 0.10: {detail}"))?;
    ensure(auc_rel < f1_rel, format!("AUC degrades faster than F1: {detail}"))?;
    Ok(detail)
}

fn c5_regression(ctx: &mut Context) -> Check {
    let r = ctx.run(ExperimentSpec::regression())?;
    let best = [ModelKind::Forest, ModelKind::GbdtLevel, ModelKind::GbdtLeaf]
        .into_iter()
        .max_by(|a, b| r.mean_of(a.display_name(), "r2").total_cmp(&r.mean_of(b.display_name(), "r2")))
        .expect("models");
    let r2 = r.mean_of(best.display_name(), "r2");
    let mae = r.mean_of(best.display_name(), "mae");
    let detail = format!("best {}: R2 {r2:.4}, MAE {mae:.2} days", best.display_name());
    ensure(r2 >= 0.98 && mae <= 6.0, detail.clone())?;
    Ok(detail)
}

fn c6_calibration(ctx: &mut Context) -> Check {
    let r = ctx.run(ExperimentSpec::calibration(DatasetSource::Synthetic(GeneratorConfig::default())))?;
    let before = r.mean_of("uncalibrated", "brier");
    let after = r.mean_of("platt", "brier");
    let detail = format!("held-out Brier {before:.4} -> {after:.4} after Platt");
    ensure(after <= before + 0.005, detail.clone())?;
    Ok(detail)
}

/// Path-dependent conditional expectation of one tree with the features in
/// `known` fixed to `x` and the others averaged by node cover.
fn conditional_value(tree: &Tree, node: usize, x: &[f64], known: u32) -> f64 {
    let n = &tree.nodes[node];
    match &n.split {
        None => n.value,
        Some(s) if known & (1 << s.feature) != 0 => {
            let next = if x[s.feature] <= s.threshold { s.left } else { s.right };
            conditional_value(tree, next, x, known)
        }
        Some(s) => {
            let (l, r) = (&tree.nodes[s.left], &tree.nodes[s.right]);
            (l.cover * conditional_value(tree, s.left, x, known) + r.cover * conditional_value(tree, s.right, x, known))
                / n.cover
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Shapley values by enumerating every coalition.
fn exhaustive_shapley(e: &TreeEnsemble, x: &[f64]) -> Vec<f64> {
    let m = e.n_features;
    let value = |s: u32| -> f64 { e.tree_weight() * e.trees.iter().map(|t| conditional_value(t, 0, x, s)).sum::<f64>() };
    (0..m)
        .map(|i| {
            (0u32..1 << m)
                .filter(|s| s & (1 << i) == 0)
                .map(|s| {
                    let k = s.count_ones() as usize;
                    factorial(k) * factorial(m - k - 1) / factorial(m) * (value(s | 1 << i) - value(s))
                })
                .sum()
        })
        .collect()
}

fn random_tree(rng: &mut impl Rng, n_features: usize, depth: usize, cover: f64, nodes: &mut Vec<TreeNode>) -> usize {
    let id = nodes.len();
    nodes.push(TreeNode { split: None, value: rng.random_range(-2.0..2.0), cover });
    if depth > 0 && rng.random_bool(0.8) {
        let share = rng.random_range(0.1..0.9);
        let feature = rng.random_range(0..n_features);
        let threshold = rng.random_range(0.0..1.0);
        let left = random_tree(rng, n_features, depth - 1, cover * share, nodes);
        let right = random_tree(rng, n_features, depth - 1, cover * (1.0 - share), nodes);
        nodes[id].split = Some(Split { feature, threshold, left, right, gain: 1.0 });
    }
    id
}

fn c7_shap(ctx: &mut Context) -> Check {
    let data = Dataset::load(&DatasetSource::Synthetic(GeneratorConfig::default())).map_err(err)?;
    let Model::Ensemble(model) = fit_classifier(&LearnerConfig::gbdt_leaf(), &data.x, &data.labels).map_err(err)?
    else {
        return Err("leaf-wise preset did not produce a tree ensemble".into());
    };
    let mut rng = substream(7, 0);
    let rows: Vec<usize> = (0..100).map(|_| rng.random_range(0..data.x.n_rows())).collect();
    let sub = data.x.select_rows(&rows);
    let mut worst_local = 0.0f64;
    for (i, s) in shap_matrix(&model, &sub).map_err(err)?.iter().enumerate() {
        worst_local = worst_local.max((s.total() - model.raw(sub.row(i))).abs());
    }
    ensure(worst_local <= 1e-6, format!("local accuracy error {worst_local:e}"))?;

    let mut worst_exact = 0.0f64;
    for case in 0..200 {
        let n_features = 1 + case % 4;
        let trees = (0..1 + case % 3)
            .map(|_| {
                let mut nodes = Vec::new();
                let cover = rng.random_range(10.0..100.0);
                random_tree(&mut rng, n_features, 3, cover, &mut nodes);
                Tree { nodes }
            })
            .collect();
        let e = TreeEnsemble {
            mode: EnsembleMode::Boosted,
            loss: Loss::Logistic,
            trees,
            base_score: Some(0.3),
            learning_rate: 0.5,
            growth: Growth::LevelWise { max_depth: 3 },
            n_features,
        };
        let x: Vec<f64> = (0..n_features).map(|_| rng.random_range(0.0..1.0)).collect();
        let fast = tree_shap(&e, &x).map_err(err)?;
        let slow = exhaustive_shapley(&e, &x);
        let base: f64 = 0.3 + 0.5 * e.trees.iter().map(expected_value).sum::<f64>();
        worst_exact = worst_exact.max((fast.base_value - base).abs());
        for (a, b) in fast.values.iter().zip(&slow) {
            worst_exact = worst_exact.max((a - b).abs());
        }
    }
    ensure(worst_exact <= 1e-9, format!("exhaustive Shapley mismatch {worst_exact:e}"))?;

    let r = ctx.run(ExperimentSpec::shap(DatasetSource::Synthetic(GeneratorConfig::default())))?;
    let top: Vec<&str> = r.cells.iter().map(|c| c.row.as_str()).collect();
    let groups = data.x.column_groups();
    let contextual = top
        .iter()
        .take(9)
        .filter(|name| {
            let j = data.x.column_index(name).expect("ranked column exists");
            matches!(groups[j], FeatureGroup::C | FeatureGroup::D)
        })
        .count();
    let detail = format!(
        "local accuracy {worst_local:.1e}; exhaustive max diff {worst_exact:.1e}; top 9 {:?} ({contextual} from C/D)",
        &top[..top.len().min(9)]
    );
    ensure(top.first() == Some(&"brake_thickness"), format!("brake_thickness not ranked first: {detail}"))?;
    ensure(contextual >= 3, format!("fewer than three C/D features in top 9: {detail}"))?;
    Ok(detail)
}

fn pair_count_auc(labels: &[u8], scores: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li == 1 && lj == 0 {
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

fn c8_metrics(_: &mut Context) -> Check {
    let mut rng = substream(8, 0);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n = rng.random_range(4..40);
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.4))).collect();
        labels[0] = 0;
        labels[1] = 1;
        let levels = if case % 2 == 0 { 4 } else { 1000 };
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..levels)) / levels as f64).collect();
        worst = worst.max((auc_roc(&labels, &scores).map_err(err)? - pair_count_auc(&labels, &scores)).abs());
    }
    ensure(worst <= 1e-12, format!("AUC differs from pair counting by {worst:e}"))?;

    // (labels, probabilities, expected macro F1) from hand-filled confusion matrices.
    let cases: [(&[u8], &[f64], f64); 4] = [
        (&[1, 1, 0, 0, 0], &[0.9, 0.2, 0.8, 0.1, 0.3], (0.5 + 2.0 / 3.0) / 2.0),
        (&[1, 0, 1, 0], &[0.7, 0.1, 0.6, 0.4], 1.0),
        (&[1, 0, 0, 0], &[0.9, 0.9, 0.9, 0.9], (0.4 + 0.0) / 2.0),
        (&[1, 1, 1, 0, 0, 0], &[0.9, 0.8, 0.1, 0.7, 0.2, 0.3], (2.0 / 3.0 + 2.0 / 3.0) / 2.0),
    ];
    for (labels, probs, expect) in cases {
        let got = macro_f1(labels, probs).map_err(err)?;
        ensure((got - expect).abs() < 1e-12, format!("macro F1 {got} vs hand-computed {expect}"))?;
    }

    let mut covered = 0;
    for t in 0..500u64 {
        let n = rng.random_range(30..150);
        let mut labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(0.3))).collect();
        labels[0] = 0;
        labels[1] = 1;
        let probs: Vec<f64> =
            labels.iter().map(|&l| (0.35 * f64::from(l) + rng.random_range(0.0..0.65)).min(1.0)).collect();
        let ci = bootstrap_ci(auc_roc, &labels, &probs, 200, t).map_err(err)?;
        if ci.lo <= ci.point && ci.point <= ci.hi {
            covered += 1;
        }
    }
    let rate = f64::from(covered) / 500.0;
    ensure(rate >= 0.99, format!("bootstrap CI contains the estimate in only {:.1}% of trials", 100.0 * rate))?;
    Ok(format!("AUC vs pair counting max diff {worst:.1e}; 4 hand-computed F1 cases; CI coverage of point {:.1}%", 100.0 * rate))
}

fn standardised(x: &FeatureMatrix) -> Vec<Vec<f64>> {
    let n = x.n_rows() as f64;
    let stats: Vec<(f64, f64)> = (0..x.n_cols())
        .map(|j| {
            let c = x.column(j);
            let m = c.iter().sum::<f64>() / n;
            let s = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            (m, if s > 0.0 { s } else { 1.0 })
        })
        .collect();
    x.rows().map(|r| r.iter().zip(&stats).map(|(v, (m, s))| (v - m) / s).collect()).collect()
}

fn c9_smote(ctx: &mut Context) -> Check {
    let data = Dataset::load(&DatasetSource::Synthetic(GeneratorConfig::default())).map_err(err)?;
    let plan = stratified_kfold(&data.labels, 5, 3).map_err(err)?;
    let k = 5;
    let mut checked = 0;
    let mut fold = 0;
    while checked < 1000 {
        let part = TrainPartition::from_fold(&data.x, &data.labels, &plan.folds[fold % 5]).map_err(err)?;
        let out = smote(&part, &SmoteConfig { k_neighbors: k, target_ratio: 1.0, seed: fold as u64 }).map_err(err)?;
        let x = part.matrix();
        let z = standardised(x);
        let minority: Vec<usize> = (0..part.labels().len()).filter(|&i| part.labels()[i] == 1).collect();
        let blocks = x.categorical_blocks();
        let in_block = |j: usize| blocks.iter().any(|b| b.contains(&j));
        for (s, o) in out.origins.iter().enumerate() {
            let row = out.matrix.row(x.n_rows() + s);
            let (a, b) = (x.row(o.base), x.row(o.neighbor));
            ensure((0.0..=1.0).contains(&o.lambda), format!("lambda {} outside [0, 1]", o.lambda))?;
            for j in 0..x.n_cols() {
                if in_block(j) {
                    continue;
                }
                let expect = a[j] + o.lambda * (b[j] - a[j]);
                ensure((row[j] - expect).abs() <= 1e-9 * (1.0 + expect.abs()), format!("synthetic row {s} column {j} is not on the segment"))?;
            }
            for block in blocks {
                let pick: Vec<f64> = block.iter().map(|&j| row[j]).collect();
                let from_a: Vec<f64> = block.iter().map(|&j| a[j]).collect();
                let from_b: Vec<f64> = block.iter().map(|&j| b[j]).collect();
                ensure(pick == from_a || pick == from_b, format!("synthetic row {s} one-hot block matches neither parent"))?;
            }
            ensure(part.labels()[o.base] == 1 && part.labels()[o.neighbor] == 1, "parent outside the minority class")?;
            let dist = |p: usize, q: usize| z[p].iter().zip(&z[q]).map(|(u, v)| (u - v).powi(2)).sum::<f64>();
            let d_nb = dist(o.base, o.neighbor);
            let closer = minority.iter().filter(|&&m| m != o.base && dist(o.base, m) < d_nb).count();
            ensure(closer < k, format!("neighbour of synthetic row {s} is not among the {k} nearest"))?;
            checked += 1;
        }
        fold += 1;
    }

    let r = ctx.run(ExperimentSpec::leakage(ctx.ai4i()))?;
    let clean = r.mean_of("SMOTE inside training folds", "f1");
    let leaky = r.mean_of("SMOTE before splitting (invalid for claims)", "f1");
    let detail = format!("{checked} synthetic rows verified; AI4I F1 clean {clean:.4} vs leaky {leaky:.4}");
    ensure(leaky >= clean, format!("leaky F1 below clean F1: {detail}"))?;
    Ok(detail)
}

fn c10_edge(_: &mut Context) -> Check {
    let sc = Scenario::default();
    let cloud = latency_model(&sc, LatencyMode::Cloud, 10_000, 1).map_err(err)?;
    let edge = latency_model(&sc, LatencyMode::Edge, 10_000, 1).map_err(err)?;
    ensure((cloud.mean - 3.5).abs() <= 0.5, format!("cloud mean {:.3} s", cloud.mean))?;
    ensure(edge.p95 < 1.0, format!("edge p95 {:.3} s", edge.p95))?;
    ensure(cloud.label == MODELLED_LABEL && edge.label == MODELLED_LABEL, "latency output lacks the modelled label")?;

    let mut rng = substream(10, 0);
    for seed in 0..20u64 {
        let sc = Scenario {
            api_loss_prob: rng.random_range(0.0..0.9),
            v2x_rate: rng.random_range(0.1..5.0),
            obd_jitter_s: rng.random_range(0.0..0.9),
            ..Scenario::default()
        };
        let duration = rng.random_range(30.0..400.0);
        let streams = simulate_streams(&sc, duration, seed).map_err(err)?;
        let frames = align_window(&streams, &sc).map_err(err)?;
        ensure(frames.len() == duration.floor() as usize, "frame count differs from floor(duration)")?;
        let series = streams.series(Source::Obd, "engine_temp");
        for f in &frames {
            let t = f.timestamp as f64;
            if let Some(i) = interpolate_at(&series, t) {
                let (lo, hi) = match i.next {
                    Some(n) => (i.prev.1.min(n.1), i.prev.1.max(n.1)),
                    None => (i.prev.1, i.prev.1),
                };
                ensure(i.value >= lo && i.value <= hi, "interpolated value outside its bracket")?;
                ensure(f.values.get("obd.engine_temp") == Some(&i.value), "frame value differs from interpolation")?;
            }
            for src in Source::ALL {
                let last = streams.source(src).iter().rev().find(|e| e.timestamp <= t).map(|e| e.timestamp);
                ensure(f.staleness.get(&src).copied() == last.map(|u| t - u), format!("staleness of {src:?} wrong"))?;
                let stale = last.is_some_and(|u| t - u > sc.staleness_threshold_s);
                ensure(f.is_stale(src) == stale, format!("stale flag of {src:?} wrong"))?;
            }
        }
    }

    let mut worst = 0.0f64;
    for (amp, freq) in [(0.5, 2.0), (1.0, 5.0), (2.0, 11.0), (0.3, 7.5)] {
        let x: Vec<f64> =
            (0..256).map(|k| amp * (std::f64::consts::TAU * freq * k as f64 / 50.0 + 0.3).sin()).collect();
        let expect = amp * amp / 2.0;
        worst = worst.max((band_power(&x, 50.0, BAND_HZ) - expect).abs() / expect);
    }
    ensure(worst <= 0.05, format!("tone band power off by {:.1}%", 100.0 * worst))?;
    Ok(format!(
        "cloud mean {:.3} s, edge p95 {:.3} s ({MODELLED_LABEL}); 20 random scenarios aligned; tone power error {:.2}%",
        cloud.mean,
        edge.p95,
        100.0 * worst
    ))
}

fn c11_determinism(ctx: &mut Context) -> Check {
    let mut n = 0;
    for original in &ctx.reports {
        let json = serde_json::to_string(&original.config).map_err(err)?;
        let spec: ExperimentSpec = serde_json::from_str(&json).map_err(err)?;
        let again = spec.run().map_err(err)?;
        ensure(again.same_results(original), format!("{} re-run differs from the original", original.id))?;
        n += 1;
    }

    let dir = tempfile::tempdir().map_err(err)?;
    let out = dir.path().join("leak");
    let data = dir.path().join("fleet.csv");
    let gen = common::run(&["generate", "--n", "400", "--out", data.to_str().unwrap()]);
    ensure(gen.status.success(), "generate failed")?;
    let run = common::run(&[
        "leakage-demo",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "5",
    ]);
    ensure(run.status.success(), format!("leakage-demo failed: {}", String::from_utf8_lossy(&run.stderr)))?;
    let verify = common::run(&["verify", out.join("manifest.json").to_str().unwrap()]);
    ensure(
        verify.status.success(),
        format!("CLI manifest re-run differs: {}", String::from_utf8_lossy(&verify.stdout)),
    )?;
    Ok(format!("{n} reports re-run from their specs with identical cells; CLI manifest re-run verified"))
}

fn ai4i_input(dir: &Path) -> (PathBuf, String) {
    match std::env::var_os("AI4I_CSV") {
        Some(p) => (PathBuf::from(&p), format!("AI4I file {}", PathBuf::from(p).display())),
        None => (
            common::write_surrogate(dir, 10_000, 2020),
            "rule-based AI4I surrogate (set AI4I_CSV to use the public file)".into(),
        ),
    }
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let (ai4i, ai4i_label) = ai4i_input(dir.path());
    println!("acceptance: AI4I source is the {ai4i_label}");
    let mut ctx = Context { ai4i, reports: Vec::new() };
    let criteria: [Criterion; 11] = [
        ("AI4I benchmark", c1_ai4i_benchmark),
        ("AI4I per-mode F1", c2_per_mode),
        ("ablation ordering", c3_ablation),
        ("noise sweep", c4_noise),
        ("service-days regression", c5_regression),
        ("Platt calibration", c6_calibration),
        ("SHAP correctness and ranking", c7_shap),
        ("metric oracles", c8_metrics),
        ("SMOTE properties and leakage", c9_smote),
        ("edge simulator", c10_edge),
        ("determinism", c11_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| check(&mut ctx)))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS [{name}] {detail} ({secs:.0}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL [{name}] {detail} ({secs:.0}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}
