use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Attached to every latency output.
pub const MODELLED_LABEL: &str = "modelled, not measured";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatencyMode {
    Edge,
    Cloud,
}

impl LatencyMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Edge => "edge",
            Self::Cloud => "cloud",
        }
    }
}

/// Delay distribution of one pipeline stage, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageDist {
    Fixed { value: f64 },
    /// Normal truncated to positive values by rejection.
    TruncatedNormal { mean: f64, sd: f64 },
    /// Log-normal parameterised by its mean and log-scale shape.
    LogNormal { mean: f64, sigma: f64 },
}

impl StageDist {
    pub fn validate(&self) -> Result<()> {
        let (centre, spread) = match *self {
            StageDist::Fixed { value } => (value, 0.0),
            StageDist::TruncatedNormal { mean, sd } => (mean, sd),
            StageDist::LogNormal { mean, sigma } => (mean, sigma),
        };
        if !(centre.is_finite() && centre > 0.0) {
            return Err(Error::invalid("stage", format!("delay centre must be finite and > 0, got {centre}")));
        }
        if !(spread.is_finite() && spread >= 0.0) {
            return Err(Error::invalid("stage", format!("delay spread must be finite and >= 0, got {spread}")));
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            StageDist::Fixed { value } => value,
            StageDist::TruncatedNormal { mean, sd } => {
                if sd == 0.0 {
                    return mean;
                }
                loop {
                    let z: f64 = StandardNormal.sample(rng);
                    let x = mean + sd * z;
                    if x > 0.0 {
                        return x;
                    }
                }
            }
            StageDist::LogNormal { mean, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                (mean.ln() - 0.5 * sigma * sigma + sigma * z).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub dist: StageDist,
}

impl Stage {
    pub fn new(name: &str, dist: StageDist) -> Self {
        Stage { name: name.to_string(), dist }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub mode: LatencyMode,
    /// End-to-end alert latency per simulated alert, seconds.
    pub samples: Vec<f64>,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
    pub label: String,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Samples `n` end-to-end latencies as the sum of the mode's stage delays.
pub fn latency_model(scenario: &Scenario, mode: LatencyMode, n: usize, seed: u64) -> Result<LatencySummary> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one alert"));
    }
    let stages = match mode {
        LatencyMode::Edge => &scenario.edge_stages,
        LatencyMode::Cloud => &scenario.cloud_stages,
    };
    if stages.is_empty() {
        return Err(Error::invalid("stages", "latency mode has no stages"));
    }
    for s in stages {
        s.dist.validate()?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mode as u64);
    let samples: Vec<f64> = (0..n).map(|_| stages.iter().map(|s| s.dist.sample(&mut rng)).sum()).collect();
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(LatencySummary {
        mode,
        mean: samples.iter().sum::<f64>() / n as f64,
        p50: quantile(&sorted, 0.5),
        p95: quantile(&sorted, 0.95),
        max: sorted[n - 1],
        samples,
        label: MODELLED_LABEL.to_string(),
    })
}

/// Writes `index, mode, latency_s, label` rows.
pub fn write_latency_csv(summaries: &[LatencySummary], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["index", "mode", "latency_s", "label"])?;
    for s in summaries {
        for (i, v) in s.samples.iter().enumerate() {
            w.write_record([i.to_string(), s.mode.name().to_string(), v.to_string(), s.label.clone()])?;
        }
    }
    w.flush().map_err(|e| Error::Io { path: path.into(), source: e })
}
