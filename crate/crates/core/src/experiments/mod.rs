//! End-to-end experiment suites. Each one is a pure function of its
//! [`ExperimentSpec`] (plus the dataset file it names), and its report
//! echoes that spec so it can be re-run.

mod report;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use report::{Cell, ExperimentReport, Provenance, Table};

use crate::error::{Error, Result};
use crate::explain::mean_abs_shap;
use crate::features::{encode, select_groups, FeatureGroup, FeatureMatrix};
use crate::ingest::{ai4i_features, ai4i_labels, ai4i_mode_labels, load_ai4i, read_synthetic, Ai4iRecord, FailureMode};
use crate::learners::{fit, fit_classifier, LearnerConfig, Model, ModelKind};
use crate::metrics::{
    apply_platt, auc_roc, bootstrap_ci, brier, fit_platt, macro_f1, regression_metrics, reliability_bins, roc_curve,
    ReliabilityDiagram,
};
use crate::resample::{smote, stratified_kfold, time_split, Fold, FoldPlan, SmoteConfig, TrainPartition};
use crate::rng::{derive_index, derive_seed};
use crate::synthgen::{generate_fleet, GeneratorConfig, VehicleRecord};

/// Where an experiment's rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic(GeneratorConfig),
    /// A synthetic fleet previously written to CSV.
    SyntheticCsv { path: PathBuf },
    Ai4i { path: PathBuf },
}

/// A binary-labelled design matrix plus whatever else the suites need.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub x: FeatureMatrix,
    pub labels: Vec<u8>,
    pub timestamps: Vec<u32>,
    /// Days to service (synthetic only).
    pub service_days: Option<Vec<f64>>,
    pub ai4i: Option<Vec<Ai4iRecord>>,
    pub sha256: String,
}

impl Dataset {
    pub fn load(source: &DatasetSource) -> Result<Self> {
        match source {
            DatasetSource::Synthetic(cfg) => {
                let fleet = generate_fleet(cfg)?;
                let name = format!("synthetic(n={}, sigma={}, seed={})", cfg.n_records, cfg.noise_sigma, cfg.seed);
                Self::from_records(name, &fleet.records)
            }
            DatasetSource::SyntheticCsv { path } => {
                let records = read_synthetic(path)?;
                Self::from_records(path.display().to_string(), &records)
            }
            DatasetSource::Ai4i { path } => {
                let (records, _) = load_ai4i(path)?;
                if records.is_empty() {
                    return Err(Error::EmptyInput("AI4I file has no rows"));
                }
                let x = ai4i_features(&records)?;
                let labels = ai4i_labels(&records);
                let sha256 = hash_dataset(&x, &labels);
                Ok(Dataset {
                    name: "ai4i".into(),
                    timestamps: records.iter().map(|r| r.udi).collect(),
                    labels,
                    service_days: None,
                    ai4i: Some(records),
                    x,
                    sha256,
                })
            }
        }
    }
}

impl Dataset {
    fn from_records(name: String, records: &[VehicleRecord]) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyInput("synthetic dataset has no rows"));
        }
        let x = encode(records)?;
        let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
        let sha256 = hash_dataset(&x, &labels);
        Ok(Dataset {
            name,
            labels,
            timestamps: records.iter().map(|r| r.timestamp).collect(),
            service_days: Some(records.iter().map(|r| r.service_days).collect()),
            ai4i: None,
            x,
            sha256,
        })
    }
}

/// SHA-256 over column names, row-major little-endian values and labels.
pub fn hash_dataset(x: &FeatureMatrix, labels: &[u8]) -> String {
    let mut h = Sha256::new();
    for name in x.column_names() {
        h.update(name.as_bytes());
        h.update([0u8]);
    }
    h.update((x.n_rows() as u64).to_le_bytes());
    for v in x.values() {
        h.update(v.to_le_bytes());
    }
    h.update(labels);
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    /// Oversampling applied to each training partition; `None` disables it.
    pub smote: Option<SmoteConfig>,
    pub bootstrap_iterations: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: 5,
            seed: 7,
            smote: Some(SmoteConfig::default()),
            bootstrap_iterations: 1000,
        }
    }
}

/// Out-of-fold predictions and per-fold scores.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub fold_f1: Vec<f64>,
    pub fold_auc: Vec<f64>,
    pub oof_prob: Vec<f64>,
    pub oof_raw: Vec<f64>,
    /// Test fold of each row.
    pub fold_of: Vec<usize>,
}

struct SplitPredictions {
    prob: Vec<f64>,
    raw: Vec<f64>,
}

fn train_and_predict(
    partition: TrainPartition,
    test: &FeatureMatrix,
    learner: &LearnerConfig,
    smote_cfg: Option<SmoteConfig>,
) -> Result<SplitPredictions> {
    let (x, y) = match smote_cfg {
        Some(cfg) => {
            let out = smote(&partition, &cfg)?;
            (out.matrix, out.labels)
        }
        None => partition.into_parts(),
    };
    let model = fit_classifier(learner, &x, &y)?;
    Ok(SplitPredictions {
        prob: model.predict_proba(test)?,
        raw: model.predict_raw(test)?,
    })
}

fn fold_seeds(base: u64, fold: usize) -> (u64, u64) {
    (
        derive_index(derive_seed(base, "smote"), fold as u64),
        derive_index(derive_seed(base, "learner"), fold as u64),
    )
}

/// Runs `learner` over a fold plan. SMOTE, when enabled, touches only each
/// fold's training rows.
pub fn cross_validate_plan(
    x: &FeatureMatrix,
    labels: &[u8],
    plan: &FoldPlan,
    learner: &LearnerConfig,
    smote_cfg: Option<SmoteConfig>,
) -> Result<CvOutcome> {
    let n = labels.len();
    let per_fold: Vec<Result<SplitPredictions>> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let (smote_seed, learner_seed) = fold_seeds(plan.seed, f);
            let partition = TrainPartition::from_fold(x, labels, fold)?;
            let test = x.select_rows(fold.test());
            let cfg = smote_cfg.map(|c| SmoteConfig { seed: smote_seed, ..c });
            train_and_predict(partition, &test, &learner.clone().with_seed(learner_seed), cfg)
        })
        .collect();
    let mut out = CvOutcome {
        fold_f1: Vec::new(),
        fold_auc: Vec::new(),
        oof_prob: vec![f64::NAN; n],
        oof_raw: vec![f64::NAN; n],
        fold_of: vec![usize::MAX; n],
    };
    for (f, (fold, preds)) in plan.folds.iter().zip(per_fold).enumerate() {
        let preds = preds?;
        let y: Vec<u8> = fold.test().iter().map(|&i| labels[i]).collect();
        out.fold_f1.push(macro_f1(&y, &preds.prob)?);
        out.fold_auc.push(auc_roc(&y, &preds.prob)?);
        for (k, &i) in fold.test().iter().enumerate() {
            out.oof_prob[i] = preds.prob[k];
            out.oof_raw[i] = preds.raw[k];
            out.fold_of[i] = f;
        }
    }
    Ok(out)
}

pub fn cross_validate(x: &FeatureMatrix, labels: &[u8], learner: &LearnerConfig, opts: &CvOptions) -> Result<CvOutcome> {
    let plan = stratified_kfold(labels, opts.k, opts.seed)?;
    cross_validate_plan(x, labels, &plan, learner, opts.smote)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    StratifiedCv,
    TimeSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub dataset: GeneratorConfig,
    pub learner: LearnerConfig,
    pub cv: CvOptions,
    /// Independent k-fold plans; plan `r` uses fold seed `derive_index(cv.seed, r)`.
    pub repeats: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSweepSpec {
    pub dataset: GeneratorConfig,
    pub sigmas: Vec<f64>,
    pub seeds_per_sigma: usize,
    pub learner: LearnerConfig,
    pub cv: CvOptions,
}

pub const DEFAULT_ABLATION_REPEATS: usize = 10;

pub const DEFAULT_SIGMAS: [f64; 7] = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSpec {
    pub dataset: DatasetSource,
    pub models: Vec<ModelKind>,
    pub protocol: Protocol,
    pub train_fraction: f64,
    pub cv: CvOptions,
    /// Also evaluate each AI4I failure mode as its own binary target.
    pub per_mode: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub dataset: DatasetSource,
    pub learner: LearnerConfig,
    pub cv: CvOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSpec {
    pub dataset: GeneratorConfig,
    pub models: Vec<ModelKind>,
    pub train_fraction: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageSpec {
    pub dataset: DatasetSource,
    pub learner: LearnerConfig,
    pub cv: CvOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapSpec {
    pub dataset: DatasetSource,
    pub learner: LearnerConfig,
    pub top_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentSpec {
    Ablation(AblationSpec),
    NoiseSweep(NoiseSweepSpec),
    Benchmark(BenchmarkSpec),
    Calibration(CalibrationSpec),
    Regression(RegressionSpec),
    Leakage(LeakageSpec),
    Shap(ShapSpec),
}

impl ExperimentSpec {
    pub fn ablation() -> Self {
        ExperimentSpec::Ablation(AblationSpec {
            dataset: GeneratorConfig::default(),
            learner: LearnerConfig::gbdt_leaf(),
            cv: CvOptions::default(),
            repeats: DEFAULT_ABLATION_REPEATS,
        })
    }

    pub fn noise_sweep() -> Self {
        ExperimentSpec::NoiseSweep(NoiseSweepSpec {
            dataset: GeneratorConfig::default(),
            sigmas: DEFAULT_SIGMAS.to_vec(),
            seeds_per_sigma: 5,
            learner: LearnerConfig::gbdt_leaf(),
            cv: CvOptions::default(),
        })
    }

    pub fn benchmark(dataset: DatasetSource, protocol: Protocol) -> Self {
        let per_mode = matches!(dataset, DatasetSource::Ai4i { .. });
        ExperimentSpec::Benchmark(BenchmarkSpec {
            dataset,
            models: ModelKind::ALL.to_vec(),
            protocol,
            train_fraction: 0.7,
            cv: CvOptions::default(),
            per_mode,
        })
    }

    pub fn calibration(dataset: DatasetSource) -> Self {
        ExperimentSpec::Calibration(CalibrationSpec {
            dataset,
            learner: LearnerConfig::gbdt_leaf(),
            cv: CvOptions::default(),
        })
    }

    pub fn regression() -> Self {
        ExperimentSpec::Regression(RegressionSpec {
            dataset: GeneratorConfig { n_records: 1500, ..GeneratorConfig::default() },
            models: vec![ModelKind::Forest, ModelKind::GbdtLevel, ModelKind::GbdtLeaf],
            train_fraction: 0.7,
            seed: 7,
        })
    }

    pub fn leakage(dataset: DatasetSource) -> Self {
        ExperimentSpec::Leakage(LeakageSpec {
            dataset,
            learner: LearnerConfig::gbdt_leaf(),
            cv: CvOptions::default(),
        })
    }

    pub fn shap(dataset: DatasetSource) -> Self {
        ExperimentSpec::Shap(ShapSpec {
            dataset,
            learner: LearnerConfig::gbdt_leaf(),
            top_k: 15,
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::Ablation(_) => "ablation",
            Self::NoiseSweep(_) => "noise_sweep",
            Self::Benchmark(_) => "benchmark",
            Self::Calibration(_) => "calibration",
            Self::Regression(_) => "regression",
            Self::Leakage(_) => "leakage_demo",
            Self::Shap(_) => "shap_ranking",
        }
    }

    pub fn run(&self) -> Result<ExperimentReport> {
        let start = Instant::now();
        let mut report = match self {
            Self::Ablation(s) => run_ablation(s),
            Self::NoiseSweep(s) => run_noise_sweep(s),
            Self::Benchmark(s) => run_benchmark(s),
            Self::Calibration(s) => run_calibration(s),
            Self::Regression(s) => run_regression(s),
            Self::Leakage(s) => run_leakage_demo(s),
            Self::Shap(s) => run_shap_ranking(s),
        }?;
        report.wall_time_secs = start.elapsed().as_secs_f64();
        Ok(report)
    }
}

struct Draft {
    spec: ExperimentSpec,
    cells: Vec<Cell>,
    tables: std::collections::BTreeMap<String, Table>,
    notes: Vec<String>,
    hashes: Vec<String>,
}

impl Draft {
    fn new(spec: ExperimentSpec) -> Self {
        Draft {
            spec,
            cells: Vec::new(),
            tables: Default::default(),
            notes: Vec::new(),
            hashes: Vec::new(),
        }
    }

    fn finish(self) -> ExperimentReport {
        ExperimentReport {
            id: self.spec.id().to_string(),
            config: self.spec,
            cells: self.cells,
            tables: self.tables,
            notes: self.notes,
            provenance: Provenance {
                dataset_sha256: self.hashes,
                code_version: env!("CARGO_PKG_VERSION").to_string(),
            },
            wall_time_secs: 0.0,
        }
    }
}

/// Table rows in the order: full, then each group removed, then A alone.
pub fn ablation_configurations() -> Vec<(&'static str, Vec<FeatureGroup>)> {
    use FeatureGroup::*;
    vec![
        ("All features", vec![A, B, C, D]),
        ("Without internal (A)", vec![B, C, D]),
        ("Without driver (B)", vec![A, C, D]),
        ("Without environmental (C)", vec![A, B, D]),
        ("Without interactions (D)", vec![A, B, C]),
        ("Internal only (A)", vec![A]),
    ]
}

pub fn run_ablation(spec: &AblationSpec) -> Result<ExperimentReport> {
    if spec.repeats == 0 {
        return Err(Error::invalid("repeats", "must be at least 1"));
    }
    let data = Dataset::load(&DatasetSource::Synthetic(spec.dataset.clone()))?;
    let mut draft = Draft::new(ExperimentSpec::Ablation(spec.clone()));
    draft.hashes.push(data.sha256.clone());
    let plans = (0..spec.repeats)
        .map(|r| {
            let seed = if spec.repeats == 1 { spec.cv.seed } else { derive_index(spec.cv.seed, r as u64) };
            stratified_kfold(&data.labels, spec.cv.k, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut full_f1 = None;
    for (name, groups) in ablation_configurations() {
        let x = select_groups(&data.x, &groups)?;
        log::info!("ablation: {name} ({} columns)", x.n_cols());
        let mut f1 = Vec::new();
        let mut auc = Vec::new();
        for plan in &plans {
            let cv = cross_validate_plan(&x, &data.labels, plan, &spec.learner, spec.cv.smote)?;
            f1.extend(cv.fold_f1);
            auc.extend(cv.fold_auc);
        }
        let f1 = Cell::new(name, "f1", f1);
        let full = *full_f1.get_or_insert(f1.mean);
        draft.cells.push(Cell::new(name, "n_features", vec![x.n_cols() as f64]));
        draft.cells.push(Cell::new(name, "drop", vec![full - f1.mean]));
        draft.cells.push(f1);
        draft.cells.push(Cell::new(name, "auc", auc));
    }
    draft.notes.push(format!(
        "{}-fold stratified CV repeated {} times; SMOTE applied inside training folds only; every configuration shares the same fold plans",
        spec.cv.k, spec.repeats
    ));
    Ok(draft.finish())
}

pub fn run_noise_sweep(spec: &NoiseSweepSpec) -> Result<ExperimentReport> {
    if spec.seeds_per_sigma == 0 || spec.sigmas.is_empty() {
        return Err(Error::invalid("seeds_per_sigma", "need at least one σ level and one seed"));
    }
    let mut draft = Draft::new(ExperimentSpec::NoiseSweep(spec.clone()));
    for &sigma in &spec.sigmas {
        let runs: Vec<Result<(f64, f64, String)>> = (0..spec.seeds_per_sigma)
            .into_par_iter()
            .map(|s| {
                let seed = derive_index(spec.dataset.seed, s as u64);
                let cfg = GeneratorConfig { noise_sigma: sigma, seed, ..spec.dataset.clone() };
                let data = Dataset::load(&DatasetSource::Synthetic(cfg))?;
                let opts = CvOptions { seed: derive_index(spec.cv.seed, s as u64), ..spec.cv.clone() };
                let cv = cross_validate(&data.x, &data.labels, &spec.learner, &opts)?;
                Ok((crate::metrics::mean(&cv.fold_f1), crate::metrics::mean(&cv.fold_auc), data.sha256))
            })
            .collect();
        let mut f1 = Vec::new();
        let mut auc = Vec::new();
        for r in runs {
            let (a, b, h) = r?;
            f1.push(a);
            auc.push(b);
            draft.hashes.push(h);
        }
        log::info!("noise sweep: sigma {sigma} done");
        let row = format!("sigma={sigma}");
        draft.cells.push(Cell::new(row.clone(), "f1", f1));
        draft.cells.push(Cell::new(row, "auc", auc));
    }
    draft.notes.push("each value is the 5-fold CV mean for one generator seed".into());
    Ok(draft.finish())
}

fn roc_table(labels: &[u8], scores: &[f64]) -> Result<Table> {
    let mut t = Table::new(&["threshold", "fpr", "tpr"]);
    for p in roc_curve(labels, scores)? {
        t.push(vec![p.threshold.is_finite().then_some(p.threshold), Some(p.fpr), Some(p.tpr)]);
    }
    Ok(t)
}

fn reliability_table(d: &ReliabilityDiagram) -> Table {
    let mut t = Table::new(&["lo", "hi", "count", "mean_predicted", "frequency"]);
    for b in &d.bins {
        t.push(vec![Some(b.lo), Some(b.hi), Some(b.count as f64), b.mean_predicted, b.frequency]);
    }
    t
}

fn model_key(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Logistic => "logistic",
        ModelKind::Forest => "forest",
        ModelKind::GbdtLevel => "gbdt_level",
        ModelKind::GbdtLeaf => "gbdt_leaf",
    }
}

fn evaluate_model(
    data: &Dataset,
    labels: &[u8],
    learner: &LearnerConfig,
    spec: &BenchmarkSpec,
) -> Result<(Vec<f64>, Vec<f64>, Vec<u8>, Vec<f64>)> {
    match spec.protocol {
        Protocol::StratifiedCv => {
            let cv = cross_validate(&data.x, labels, learner, &spec.cv)?;
            Ok((cv.fold_f1, cv.fold_auc, labels.to_vec(), cv.oof_prob))
        }
        Protocol::TimeSplit => {
            let split = time_split(&data.timestamps, spec.train_fraction)?;
            let preds = evaluate_split(&data.x, labels, &split, learner, spec.cv.smote, spec.cv.seed)?;
            let y: Vec<u8> = split.test().iter().map(|&i| labels[i]).collect();
            Ok((vec![macro_f1(&y, &preds)?], vec![auc_roc(&y, &preds)?], y, preds))
        }
    }
}

fn evaluate_split(
    x: &FeatureMatrix,
    labels: &[u8],
    split: &Fold,
    learner: &LearnerConfig,
    smote_cfg: Option<SmoteConfig>,
    seed: u64,
) -> Result<Vec<f64>> {
    let (smote_seed, learner_seed) = fold_seeds(seed, 0);
    let partition = TrainPartition::from_fold(x, labels, split)?;
    let cfg = smote_cfg.map(|c| SmoteConfig { seed: smote_seed, ..c });
    let test = x.select_rows(split.test());
    Ok(train_and_predict(partition, &test, &learner.clone().with_seed(learner_seed), cfg)?.prob)
}

pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<ExperimentReport> {
    let data = Dataset::load(&spec.dataset)?;
    let mut draft = Draft::new(ExperimentSpec::Benchmark(spec.clone()));
    draft.hashes.push(data.sha256.clone());
    for &kind in &spec.models {
        log::info!("benchmark: {}", kind.display_name());
        let learner = LearnerConfig::preset(kind);
        let (f1, auc, y, p) = evaluate_model(&data, &data.labels, &learner, spec)?;
        let iters = spec.cv.bootstrap_iterations;
        let f1_ci = bootstrap_ci(macro_f1, &y, &p, iters, derive_seed(spec.cv.seed, "bootstrap-f1"))?;
        let auc_ci = bootstrap_ci(auc_roc, &y, &p, iters, derive_seed(spec.cv.seed, "bootstrap-auc"))?;
        let row = kind.display_name();
        draft.cells.push(Cell::new(row, "f1", f1).with_ci(f1_ci));
        draft.cells.push(Cell::new(row, "auc", auc).with_ci(auc_ci));
        draft.tables.insert(format!("roc_{}", model_key(kind)), roc_table(&y, &p)?);
    }
    if spec.per_mode {
        let records = data.ai4i.as_ref().ok_or(Error::invalid("per_mode", "failure modes need the AI4I dataset"))?;
        let learner = LearnerConfig::gbdt_leaf();
        for mode in FailureMode::ALL {
            log::info!("benchmark: per-mode {}", mode.code());
            let y = ai4i_mode_labels(records, mode);
            let (f1, auc, _, _) = evaluate_model(&data, &y, &learner, spec)?;
            let row = format!("{} ({})", mode.code(), ModelKind::GbdtLeaf.display_name());
            draft.cells.push(Cell::new(row.clone(), "f1", f1));
            draft.cells.push(Cell::new(row, "auc", auc));
        }
        draft.notes.push("per-mode rows treat each failure flag as an independent binary target".into());
    }
    let proto = match spec.protocol {
        Protocol::StratifiedCv => format!("{}-fold stratified CV", spec.cv.k),
        Protocol::TimeSplit => format!("time-ordered {:.0}/{:.0} split", spec.train_fraction * 100.0, (1.0 - spec.train_fraction) * 100.0),
    };
    draft.notes.push(format!(
        "{proto}; SMOTE {}; 95% CIs from {} percentile bootstrap resamples of pooled held-out predictions",
        if spec.cv.smote.is_some() { "inside training partitions only" } else { "off" },
        spec.cv.bootstrap_iterations
    ));
    Ok(draft.finish())
}

/// Platt scaling fitted on the last fold's held-out margins and judged on
/// the other folds' held-out margins.
pub fn run_calibration(spec: &CalibrationSpec) -> Result<ExperimentReport> {
    let data = Dataset::load(&spec.dataset)?;
    let mut draft = Draft::new(ExperimentSpec::Calibration(spec.clone()));
    draft.hashes.push(data.sha256.clone());
    let cv = cross_validate(&data.x, &data.labels, &spec.learner, &spec.cv)?;
    let calib_fold = spec.cv.k - 1;
    let (calib, eval): (Vec<usize>, Vec<usize>) = (0..data.labels.len()).partition(|&i| cv.fold_of[i] == calib_fold);
    let pick = |idx: &[usize], v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let pick_y = |idx: &[usize]| idx.iter().map(|&i| data.labels[i]).collect::<Vec<u8>>();
    let params = fit_platt(&pick(&calib, &cv.oof_raw), &pick_y(&calib))?;
    let y_eval = pick_y(&eval);
    let before = pick(&eval, &cv.oof_prob);
    let after = apply_platt(&params, &pick(&eval, &cv.oof_raw));
    draft.cells.push(Cell::new("uncalibrated", "brier", vec![brier(&y_eval, &before)?]));
    draft.cells.push(Cell::new("platt", "brier", vec![brier(&y_eval, &after)?]));
    draft.cells.push(Cell::new("platt", "a", vec![params.a]));
    draft.cells.push(Cell::new("platt", "b", vec![params.b]));
    draft.cells.push(Cell::new("calibration split", "rows", vec![calib.len() as f64]));
    draft.cells.push(Cell::new("evaluation split", "rows", vec![eval.len() as f64]));
    draft
        .tables
        .insert("reliability_uncalibrated".into(), reliability_table(&reliability_bins(&y_eval, &before, 10)?));
    draft
        .tables
        .insert("reliability_platt".into(), reliability_table(&reliability_bins(&y_eval, &after, 10)?));
    draft.notes.push(format!(
        "calibration split: held-out rows of fold {calib_fold} of {} (fold seed {}); evaluation: held-out rows of folds 0..{calib_fold}",
        spec.cv.k, spec.cv.seed
    ));
    Ok(draft.finish())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    crate::metrics::percentile(sorted, q)
}

pub fn run_regression(spec: &RegressionSpec) -> Result<ExperimentReport> {
    let data = Dataset::load(&DatasetSource::Synthetic(spec.dataset.clone()))?;
    let mut draft = Draft::new(ExperimentSpec::Regression(spec.clone()));
    draft.hashes.push(data.sha256.clone());
    let days = data.service_days.clone().expect("synthetic data carries service days");
    let split = time_split(&data.timestamps, spec.train_fraction)?;
    let x_train = data.x.select_rows(split.train());
    let x_test = data.x.select_rows(split.test());
    let y_train: Vec<f64> = split.train().iter().map(|&i| days[i]).collect();
    let y_test: Vec<f64> = split.test().iter().map(|&i| days[i]).collect();
    for &kind in &spec.models {
        if kind == ModelKind::Logistic {
            return Err(Error::invalid("models", "logistic regression cannot fit a continuous target"));
        }
        log::info!("regression: {}", kind.display_name());
        let cfg = LearnerConfig::regression_preset(kind).with_seed(derive_index(spec.seed, kind as u64));
        let model: Model = fit(&cfg, &x_train, &y_train)?;
        let pred: Vec<f64> = model.predict_raw(&x_test)?.into_iter().map(|v| v.clamp(0.0, 365.0)).collect();
        let m = regression_metrics(&y_test, &pred)?;
        let row = kind.display_name();
        draft.cells.push(Cell::new(row, "rmse", vec![m.rmse]));
        draft.cells.push(Cell::new(row, "mae", vec![m.mae]));
        draft.cells.push(Cell::new(row, "r2", vec![m.r2.unwrap_or(f64::NAN)]));
        let mut resid: Vec<f64> = y_test.iter().zip(&pred).map(|(a, p)| a - p).collect();
        let mut table = Table::new(&["actual", "predicted", "residual"]);
        for ((a, p), r) in y_test.iter().zip(&pred).zip(&resid) {
            table.push(vec![Some(*a), Some(*p), Some(*r)]);
        }
        draft.tables.insert(format!("residuals_{}", model_key(kind)), table);
        resid.sort_by(f64::total_cmp);
        draft.cells.push(Cell::new(row, "residual_median", vec![quantile(&resid, 0.5)]));
        draft
            .cells
            .push(Cell::new(row, "residual_iqr", vec![quantile(&resid, 0.75) - quantile(&resid, 0.25)]));
    }
    draft.notes.push(format!(
        "time-ordered {:.0}/{:.0} split; predictions clipped to [0, 365] days",
        spec.train_fraction * 100.0,
        (1.0 - spec.train_fraction) * 100.0
    ));
    Ok(draft.finish())
}

/// Same learner and fold seeds under two protocols: oversampling inside
/// each training fold, and oversampling the whole dataset before splitting.
pub fn run_leakage_demo(spec: &LeakageSpec) -> Result<ExperimentReport> {
    let data = Dataset::load(&spec.dataset)?;
    let mut draft = Draft::new(ExperimentSpec::Leakage(spec.clone()));
    draft.hashes.push(data.sha256.clone());
    let smote_cfg = spec.cv.smote.unwrap_or_default();
    let clean = cross_validate(&data.x, &data.labels, &spec.learner, &CvOptions { smote: Some(smote_cfg), ..spec.cv.clone() })?;
    let everything = TrainPartition::unchecked(data.x.clone(), data.labels.clone());
    let augmented = smote(&everything, &SmoteConfig { seed: derive_seed(spec.cv.seed, "leaky"), ..smote_cfg })?;
    let leaky = cross_validate(
        &augmented.matrix,
        &augmented.labels,
        &spec.learner,
        &CvOptions { smote: None, ..spec.cv.clone() },
    )?;
    let clean_f1 = Cell::new("SMOTE inside training folds", "f1", clean.fold_f1);
    let leaky_f1 = Cell::new("SMOTE before splitting (invalid for claims)", "f1", leaky.fold_f1);
    let inflation = leaky_f1.mean - clean_f1.mean;
    draft.cells.push(clean_f1);
    draft.cells.push(Cell::new("SMOTE inside training folds", "auc", clean.fold_auc));
    draft.cells.push(leaky_f1);
    draft.cells.push(Cell::new("SMOTE before splitting (invalid for claims)", "auc", leaky.fold_auc));
    draft.cells.push(Cell::new("leaky minus clean", "f1", vec![inflation]));
    draft.notes.push(
        "the leaky protocol places synthetic neighbours of test rows in training folds; its scores are invalid for claims"
            .into(),
    );
    draft.notes.push(format!("both protocols use fold seed {}", spec.cv.seed));
    Ok(draft.finish())
}

/// Fits on every row and ranks features by mean |SHAP| (margin units).
pub fn run_shap_ranking(spec: &ShapSpec) -> Result<ExperimentReport> {
    let data = Dataset::load(&spec.dataset)?;
    let mut draft = Draft::new(ExperimentSpec::Shap(spec.clone()));
    draft.hashes.push(data.sha256.clone());
    let model = fit_classifier(&spec.learner, &data.x, &data.labels)?;
    let Model::Ensemble(ensemble) = &model else {
        return Err(Error::invalid("learner", "SHAP ranking needs a tree ensemble"));
    };
    let ranked = mean_abs_shap(ensemble, &data.x)?;
    let mut table = Table::new(&["rank", "column", "mean_abs_shap"]);
    for (r, f) in ranked.iter().enumerate() {
        table.push(vec![Some((r + 1) as f64), Some(f.index as f64), Some(f.mean_abs_shap)]);
        if r < spec.top_k {
            draft.cells.push(Cell::new(f.name.clone(), "mean_abs_shap", vec![f.mean_abs_shap]));
        }
    }
    draft.tables.insert("shap_ranking".into(), table);
    draft.notes.push("attributions in log-odds units; model fitted on all rows".into());
    Ok(draft.finish())
}
