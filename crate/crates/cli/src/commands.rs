use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use clap::CommandFactory;
use log::info;
use serde::Serialize;

use ctxmaint_core::experiments::{
    hash_dataset, AblationSpec, CalibrationSpec, CvOptions, Dataset, DatasetSource, ExperimentSpec,
    LeakageSpec, NoiseSweepSpec, Protocol, RegressionSpec, ShapSpec,
};
use ctxmaint_core::explain::{rank_importance, shap_matrix, write_shap_csv};
use ctxmaint_core::features::encode;
use ctxmaint_core::ingest::{normalize_header, write_synthetic};
use ctxmaint_core::learners::{fit_classifier, LearnerConfig, Model, ModelDocument, ModelKind};
use ctxmaint_core::metrics::{brier, classification_report, ClassificationReport};
use ctxmaint_core::resample::SmoteConfig;
use ctxmaint_core::rng::derive_seed;
use ctxmaint_core::synthgen::{generate_fleet, GeneratorConfig};
use ctxmaint_edgesim::{
    align_window, latency_model, simulate_streams, write_frames_csv, write_latency_csv, LatencyMode, Scenario, Source,
    MODELLED_LABEL,
};

use crate::manifest::{digest_all, manifest_path, RunManifest, MANIFEST_VERSION};
use crate::{CliError, Cli, Command, CvArgs, DataArgs, Format, GenArgs, ProtocolArg};

/// Files a command read and wrote.
#[derive(Default)]
struct Record {
    out: Option<PathBuf>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    dataset_sha256: Vec<String>,
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    let seed = cli.seed;
    let record = match &cli.command {
        Command::Verify { manifest } => return verify(manifest, cli.format),
        Command::Generate { gen, out } => generate(cli, gen, out)?,
        Command::Train { data, model, out } => train(cli, data, *model, out)?,
        Command::Evaluate { model, data, threshold, out } => evaluate(cli, model, data, *threshold, out.as_deref())?,
        Command::Benchmark { data, protocol, models, train_fraction, cv, bootstrap, per_mode, out } => {
            let source = dataset_source(seed, data)?;
            let protocol = match protocol {
                ProtocolArg::StratifiedCv => Protocol::StratifiedCv,
                ProtocolArg::TimeSplit => Protocol::TimeSplit,
            };
            let mut spec = ExperimentSpec::benchmark(source, protocol);
            if let ExperimentSpec::Benchmark(b) = &mut spec {
                if let Some(m) = models {
                    b.models = m.clone();
                }
                b.train_fraction = *train_fraction;
                b.cv = CvOptions { bootstrap_iterations: *bootstrap, ..cv_options(seed, cv) };
                b.per_mode |= *per_mode;
            }
            experiment(cli, &spec, out.as_deref())?
        }
        Command::Ablate { gen, model, cv, repeats, out } => {
            let spec = ExperimentSpec::Ablation(AblationSpec {
                dataset: gen_config(seed, gen),
                learner: learner(*model, seed),
                cv: cv_options(seed, cv),
                repeats: *repeats,
            });
            experiment(cli, &spec, out.as_deref())?
        }
        Command::NoiseSweep { gen, sigmas, seeds_per_sigma, model, cv, out } => {
            let spec = ExperimentSpec::NoiseSweep(NoiseSweepSpec {
                dataset: gen_config(seed, gen),
                sigmas: sigmas.clone(),
                seeds_per_sigma: *seeds_per_sigma,
                learner: learner(*model, seed),
                cv: cv_options(seed, cv),
            });
            experiment(cli, &spec, out.as_deref())?
        }
        Command::Calibrate { data, model, cv, out } => {
            let spec = ExperimentSpec::Calibration(CalibrationSpec {
                dataset: dataset_source(seed, data)?,
                learner: learner(*model, seed),
                cv: cv_options(seed, cv),
            });
            experiment(cli, &spec, out.as_deref())?
        }
        Command::Regress { n, sigma, train_fraction, out } => {
            let ExperimentSpec::Regression(defaults) = ExperimentSpec::regression() else {
                unreachable!()
            };
            let spec = ExperimentSpec::Regression(RegressionSpec {
                dataset: GeneratorConfig { n_records: *n, noise_sigma: *sigma, seed, ..defaults.dataset },
                train_fraction: *train_fraction,
                seed: derive_seed(seed, "regression"),
                ..defaults
            });
            experiment(cli, &spec, out.as_deref())?
        }
        Command::LeakageDemo { data, model, cv, out } => {
            let spec = ExperimentSpec::Leakage(LeakageSpec {
                dataset: dataset_source(seed, data)?,
                learner: learner(*model, seed),
                cv: cv_options(seed, cv),
            });
            experiment(cli, &spec, out.as_deref())?
        }
        Command::Explain { data, model, top, shap_csv, out } => {
            explain(cli, data, model.as_deref(), *top, shap_csv.as_deref(), out.as_deref())?
        }
        Command::EdgeSim { scenario, duration, alerts, out } => {
            edge_sim(cli, scenario.as_deref(), *duration, *alerts, out.as_deref())?
        }
    };
    if let Some(out) = &record.out {
        write_manifest(cli, out, &record)?;
    }
    Ok(())
}

fn gen_config(seed: u64, gen: &GenArgs) -> GeneratorConfig {
    GeneratorConfig {
        n_records: gen.n,
        noise_sigma: gen.sigma,
        target_positive_rate: gen.positive_rate,
        seed,
        ..GeneratorConfig::default()
    }
}

fn cv_options(seed: u64, cv: &CvArgs) -> CvOptions {
    CvOptions {
        k: cv.folds,
        seed: derive_seed(seed, "cv"),
        smote: (!cv.no_smote).then(SmoteConfig::default),
        ..CvOptions::default()
    }
}

fn learner(kind: ModelKind, seed: u64) -> LearnerConfig {
    LearnerConfig::preset(kind).with_seed(derive_seed(seed, "learner"))
}

/// AI4I files are recognised by their `Machine failure` column; anything else
/// is read as a synthetic fleet.
fn dataset_source(seed: u64, data: &DataArgs) -> Result<DatasetSource, CliError> {
    let Some(path) = &data.data else {
        return Ok(DatasetSource::Synthetic(gen_config(seed, &data.gen)));
    };
    let file = std::fs::File::open(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let mut header = String::new();
    BufReader::new(file)
        .read_line(&mut header)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let is_ai4i = header.split(',').any(|h| normalize_header(h.trim_matches('"')) == "machine_failure");
    Ok(if is_ai4i {
        DatasetSource::Ai4i { path: path.clone() }
    } else {
        DatasetSource::SyntheticCsv { path: path.clone() }
    })
}

fn source_inputs(source: &DatasetSource) -> Vec<PathBuf> {
    match source {
        DatasetSource::Synthetic(_) => Vec::new(),
        DatasetSource::SyntheticCsv { path } | DatasetSource::Ai4i { path } => vec![path.clone()],
    }
}

fn spec_inputs(spec: &ExperimentSpec) -> Vec<PathBuf> {
    match spec {
        ExperimentSpec::Benchmark(s) => source_inputs(&s.dataset),
        ExperimentSpec::Calibration(s) => source_inputs(&s.dataset),
        ExperimentSpec::Leakage(s) => source_inputs(&s.dataset),
        ExperimentSpec::Shap(s) => source_inputs(&s.dataset),
        _ => Vec::new(),
    }
}

fn print<T: Serialize>(format: Format, value: &T, table: impl FnOnce() -> String) -> Result<(), CliError> {
    match format {
        Format::Json => {
            let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
            println!("{text}");
        }
        Format::Table => print!("{}", table()),
    }
    Ok(())
}

fn experiment(cli: &Cli, spec: &ExperimentSpec, out: Option<&Path>) -> Result<Record, CliError> {
    info!("running {}", spec.id());
    let report = spec.run()?;
    info!("{} finished in {:.1}s", spec.id(), report.wall_time_secs);
    print(cli.format, &report, || report.to_table())?;
    let mut record = Record {
        inputs: spec_inputs(spec),
        dataset_sha256: report.provenance.dataset_sha256.clone(),
        ..Record::default()
    };
    if let Some(dir) = out {
        record.outputs = report.write_outputs(dir)?;
        record.out = Some(dir.to_path_buf());
    }
    Ok(record)
}

fn create_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            std::fs::create_dir_all(p).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))
        }
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct GenerateSummary {
    path: PathBuf,
    n_records: usize,
    positive_rate: f64,
    threshold: f64,
    dataset_sha256: String,
}

fn generate(cli: &Cli, gen: &GenArgs, out: &Path) -> Result<Record, CliError> {
    let fleet = generate_fleet(&gen_config(cli.seed, gen))?;
    create_parent(out)?;
    write_synthetic(&fleet.records, out)?;
    let x = encode(&fleet.records)?;
    let summary = GenerateSummary {
        path: out.to_path_buf(),
        n_records: fleet.records.len(),
        positive_rate: fleet.positive_rate(),
        threshold: fleet.threshold,
        dataset_sha256: hash_dataset(&x, &fleet.labels()),
    };
    print(cli.format, &summary, || {
        format!(
            "wrote {} records to {} (positive rate {:.3}, threshold {:.4})\n",
            summary.n_records,
            out.display(),
            summary.positive_rate,
            summary.threshold
        )
    })?;
    Ok(Record {
        out: Some(out.to_path_buf()),
        outputs: vec![out.to_path_buf()],
        dataset_sha256: vec![summary.dataset_sha256],
        ..Record::default()
    })
}

fn train(cli: &Cli, data: &DataArgs, kind: ModelKind, out: &Path) -> Result<Record, CliError> {
    let source = dataset_source(cli.seed, data)?;
    let ds = Dataset::load(&source)?;
    let config = learner(kind, cli.seed);
    info!("fitting {} on {} rows", kind.display_name(), ds.labels.len());
    let model = fit_classifier(&config, &ds.x, &ds.labels)?;
    create_parent(out)?;
    ModelDocument::new(model, config, ds.x.column_names().to_vec()).save(out)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        model: &'a str,
        rows: usize,
        features: usize,
        path: &'a Path,
    }
    let s = Summary { model: kind.display_name(), rows: ds.labels.len(), features: ds.x.n_cols(), path: out };
    print(cli.format, &s, || {
        format!("trained {} on {} rows x {} features -> {}\n", s.model, s.rows, s.features, out.display())
    })?;
    Ok(Record {
        out: Some(out.to_path_buf()),
        inputs: source_inputs(&source),
        outputs: vec![out.to_path_buf()],
        dataset_sha256: vec![ds.sha256],
    })
}

#[derive(Serialize)]
struct Evaluation {
    model: ModelKind,
    dataset: String,
    dataset_sha256: String,
    rows: usize,
    brier: f64,
    report: ClassificationReport,
}

fn load_model(path: &Path, ds: &Dataset) -> Result<ModelDocument, CliError> {
    let doc = ModelDocument::load(path)?;
    if doc.feature_names != ds.x.column_names() {
        return Err(CliError::Validation(format!(
            "{} was trained on different columns than {}",
            path.display(),
            ds.name
        )));
    }
    Ok(doc)
}

fn evaluate(cli: &Cli, model: &Path, data: &DataArgs, threshold: f64, out: Option<&Path>) -> Result<Record, CliError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Validation(format!("--threshold must lie in [0, 1], got {threshold}")));
    }
    let source = dataset_source(cli.seed, data)?;
    let ds = Dataset::load(&source)?;
    let doc = load_model(model, &ds)?;
    let prob = doc.model.predict_proba(&ds.x)?;
    let eval = Evaluation {
        model: doc.config.kind,
        dataset: ds.name.clone(),
        dataset_sha256: ds.sha256.clone(),
        rows: ds.labels.len(),
        brier: brier(&ds.labels, &prob)?,
        report: classification_report(&ds.labels, &prob, threshold)?,
    };
    print(cli.format, &eval, || {
        let r = &eval.report;
        format!(
            "{} on {} ({} rows)\nmacro F1 {:.4}  AUC {}  Brier {:.4}\nprecision/recall/F1 (class 1): {:.4} / {:.4} / {:.4}\n",
            eval.model.display_name(),
            eval.dataset,
            eval.rows,
            r.macro_f1,
            r.auc.map_or_else(|| "n/a".into(), |a| format!("{a:.4}")),
            eval.brier,
            r.per_class[1].precision,
            r.per_class[1].recall,
            r.per_class[1].f1,
        )
    })?;
    let mut inputs = vec![model.to_path_buf()];
    inputs.extend(source_inputs(&source));
    let mut record = Record { inputs, dataset_sha256: vec![ds.sha256], ..Record::default() };
    if let Some(out) = out {
        create_parent(out)?;
        let text = serde_json::to_string_pretty(&eval).map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(out, text).map_err(|e| CliError::Validation(format!("{}: {e}", out.display())))?;
        record.outputs.push(out.to_path_buf());
        record.out = Some(out.to_path_buf());
    }
    Ok(record)
}

fn explain(
    cli: &Cli,
    data: &DataArgs,
    model: Option<&Path>,
    top: usize,
    shap_csv: Option<&Path>,
    out: Option<&Path>,
) -> Result<Record, CliError> {
    let source = dataset_source(cli.seed, data)?;
    let Some(model_path) = model else {
        let spec = ExperimentSpec::Shap(ShapSpec {
            dataset: source.clone(),
            learner: learner(ModelKind::GbdtLeaf, cli.seed),
            top_k: top,
        });
        let mut record = experiment(cli, &spec, out)?;
        if let Some(csv) = shap_csv {
            let ExperimentSpec::Shap(s) = &spec else { unreachable!() };
            let ds = Dataset::load(&source)?;
            let Model::Ensemble(e) = fit_classifier(&s.learner, &ds.x, &ds.labels)? else {
                unreachable!("leaf-wise preset is a tree ensemble")
            };
            create_parent(csv)?;
            write_shap_csv(&ds.x, &shap_matrix(&e, &ds.x)?, csv)?;
            record.outputs.push(csv.to_path_buf());
            record.out.get_or_insert_with(|| csv.to_path_buf());
        }
        return Ok(record);
    };

    let ds = Dataset::load(&source)?;
    let doc = load_model(model_path, &ds)?;
    let Model::Ensemble(ensemble) = &doc.model else {
        return Err(CliError::Validation("SHAP attributions need a tree ensemble model".into()));
    };
    let shaps = shap_matrix(ensemble, &ds.x)?;
    let mut ranked = rank_importance(&shaps, ds.x.column_names());
    ranked.truncate(top);
    print(cli.format, &ranked, || {
        let mut s = String::new();
        for (i, f) in ranked.iter().enumerate() {
            s.push_str(&format!("{:>3}  {:<32} {:.5}\n", i + 1, f.name, f.mean_abs_shap));
        }
        s
    })?;
    let mut inputs = vec![model_path.to_path_buf()];
    inputs.extend(source_inputs(&source));
    let mut record = Record { inputs, dataset_sha256: vec![ds.sha256.clone()], ..Record::default() };
    if let Some(out) = out {
        std::fs::create_dir_all(out).map_err(|e| CliError::Validation(format!("{}: {e}", out.display())))?;
        let p = out.join("shap_ranking.json");
        let text = serde_json::to_string_pretty(&ranked).map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(&p, text).map_err(|e| CliError::Validation(format!("{}: {e}", p.display())))?;
        record.outputs.push(p);
        record.out = Some(out.to_path_buf());
    }
    if let Some(csv) = shap_csv {
        create_parent(csv)?;
        write_shap_csv(&ds.x, &shaps, csv)?;
        record.outputs.push(csv.to_path_buf());
        record.out.get_or_insert_with(|| csv.to_path_buf());
    }
    Ok(record)
}

#[derive(Serialize)]
struct LatencyRow {
    mode: LatencyMode,
    mean: f64,
    p50: f64,
    p95: f64,
    max: f64,
    label: String,
}

#[derive(Serialize)]
struct EdgeSummary {
    duration_s: f64,
    frames: usize,
    complete_frames: usize,
    stale_frames: std::collections::BTreeMap<String, usize>,
    latency: Vec<LatencyRow>,
    label: &'static str,
}

fn edge_sim(
    cli: &Cli,
    scenario: Option<&Path>,
    duration: f64,
    alerts: usize,
    out: Option<&Path>,
) -> Result<Record, CliError> {
    let sc = match scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    let streams = simulate_streams(&sc, duration, derive_seed(cli.seed, "streams"))?;
    let frames = align_window(&streams, &sc)?;
    let lat_seed = derive_seed(cli.seed, "latency");
    let summaries = [LatencyMode::Edge, LatencyMode::Cloud]
        .into_iter()
        .map(|m| latency_model(&sc, m, alerts, lat_seed))
        .collect::<Result<Vec<_>, _>>()?;
    let summary = EdgeSummary {
        duration_s: duration,
        frames: frames.len(),
        complete_frames: frames.iter().filter(|f| f.is_complete()).count(),
        stale_frames: Source::ALL
            .iter()
            .map(|&s| (s.name().to_string(), frames.iter().filter(|f| f.is_stale(s)).count()))
            .collect(),
        latency: summaries
            .iter()
            .map(|s| LatencyRow { mode: s.mode, mean: s.mean, p50: s.p50, p95: s.p95, max: s.max, label: s.label.clone() })
            .collect(),
        label: MODELLED_LABEL,
    };
    print(cli.format, &summary, || {
        let mut s = format!(
            "{} frames over {duration} s, {} complete\nalert latency ({MODELLED_LABEL}):\n",
            summary.frames, summary.complete_frames
        );
        for l in &summary.latency {
            s.push_str(&format!(
                "  {:<5} mean {:.3} s  p50 {:.3} s  p95 {:.3} s  max {:.3} s\n",
                l.mode.name(),
                l.mean,
                l.p50,
                l.p95,
                l.max
            ));
        }
        s
    })?;
    let mut record = Record { inputs: scenario.map(Path::to_path_buf).into_iter().collect(), ..Record::default() };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Validation(format!("{}: {e}", dir.display())))?;
        let frames_csv = dir.join("frames.csv");
        write_frames_csv(&frames, &frames_csv)?;
        let latency_csv = dir.join("latency.csv");
        write_latency_csv(&summaries, &latency_csv)?;
        let summary_json = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(&summary_json, text).map_err(|e| CliError::Validation(format!("{}: {e}", summary_json.display())))?;
        record.outputs = vec![frames_csv, latency_csv, summary_json];
        record.out = Some(dir.to_path_buf());
    }
    Ok(record)
}

/// Command-line arguments with any `--out` value removed.
fn args_without_out() -> Vec<String> {
    let mut out = Vec::new();
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        if a == "--out" {
            args.next();
        } else if !a.starts_with("--out=") {
            out.push(a);
        }
    }
    out
}

fn subcommand_name() -> String {
    Cli::command()
        .try_get_matches_from(std::env::args_os())
        .ok()
        .and_then(|m| m.subcommand_name().map(str::to_string))
        .unwrap_or_default()
}

fn write_manifest(cli: &Cli, out: &Path, record: &Record) -> Result<(), CliError> {
    let cwd = std::env::current_dir().map_err(|e| CliError::Internal(e.to_string()))?;
    let args = args_without_out();
    let manifest = RunManifest {
        manifest_version: MANIFEST_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: subcommand_name(),
        args,
        out: Some(out.to_path_buf()),
        cwd,
        seed: cli.seed,
        threads: cli.threads,
        dataset_sha256: record.dataset_sha256.clone(),
        inputs: digest_all(&record.inputs)?,
        outputs: digest_all(&record.outputs)?,
    };
    let path = manifest_path(out);
    manifest.save(&path)?;
    info!("manifest written to {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct VerifyRow {
    path: PathBuf,
    expected: String,
    found: Option<String>,
    matches: bool,
}

/// Re-runs a manifest's invocation into a scratch directory and compares the
/// content hash of every recorded output.
fn verify(manifest_file: &Path, format: Format) -> Result<(), CliError> {
    let m = RunManifest::load(manifest_file)?;
    let Some(out) = &m.out else {
        return Err(CliError::Validation("manifest records no output location".into()));
    };
    for input in &m.inputs {
        let p = m.cwd.join(&input.path);
        let now = crate::manifest::content_digest(&p)
            .map_err(|_| CliError::Validation(format!("input {} is missing", p.display())))?;
        if now != input.sha256 {
            return Err(CliError::Validation(format!("input {} changed since the recorded run", p.display())));
        }
    }
    let scratch = std::env::temp_dir().join(format!("ctxmaint-verify-{}", std::process::id()));
    std::fs::create_dir_all(&scratch).map_err(|e| CliError::Internal(e.to_string()))?;
    let new_out = scratch.join(out.file_name().unwrap_or_else(|| "out".as_ref()));
    let exe = std::env::current_exe().map_err(|e| CliError::Internal(e.to_string()))?;
    let status = std::process::Command::new(exe)
        .args(&m.args)
        .arg("--out")
        .arg(&new_out)
        .current_dir(&m.cwd)
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    if !status.success() {
        let _ = std::fs::remove_dir_all(&scratch);
        return Err(CliError::Internal(format!("re-run exited with {status}")));
    }
    let rows: Vec<VerifyRow> = m
        .outputs
        .iter()
        .map(|o| {
            let rel = o.path.strip_prefix(out).ok().filter(|r| !r.as_os_str().is_empty());
            let candidate = rel.map_or_else(|| new_out.clone(), |r| new_out.join(r));
            let found = crate::manifest::content_digest(&m.cwd.join(&candidate)).ok();
            VerifyRow { path: o.path.clone(), matches: found.as_deref() == Some(o.sha256.as_str()), expected: o.sha256.clone(), found }
        })
        .collect();
    let _ = std::fs::remove_dir_all(&scratch);
    print(format, &rows, || {
        rows.iter()
            .map(|r| format!("{} {}\n", if r.matches { "ok      " } else { "MISMATCH" }, r.path.display()))
            .collect()
    })?;
    if rows.iter().all(|r| r.matches) {
        Ok(())
    } else {
        Err(CliError::Validation("re-run outputs differ from the manifest".into()))
    }
}
