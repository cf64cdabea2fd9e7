use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::latency::{Stage, StageDist};
use crate::psd::RoughnessMap;

/// Every tunable of a simulation run. The defaults are placeholders chosen
/// for plausibility; none of them is a measured channel or hardware figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub obd_hz: f64,
    /// Each OBD sample lands up to this many seconds after its nominal tick.
    pub obd_jitter_s: f64,
    pub imu_hz: f64,
    /// Mean V2X messages per second (Poisson arrivals).
    pub v2x_rate: f64,
    pub api_period_s: f64,
    /// Probability that a scheduled weather/road API update is lost. The
    /// update at t = 0 is always delivered.
    pub api_loss_prob: f64,
    pub staleness_threshold_s: f64,
    /// Starting road roughness (IRI, m/km) and its per-second random-walk step.
    pub iri_start: f64,
    pub iri_step: f64,
    /// Vertical acceleration RMS (m/s²) per unit IRI.
    pub accel_per_iri: f64,
    pub imu_noise: f64,
    pub roughness_map: RoughnessMap,
    pub cloud_stages: Vec<Stage>,
    pub edge_stages: Vec<Stage>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            obd_hz: 1.0,
            obd_jitter_s: 0.2,
            imu_hz: 50.0,
            v2x_rate: 2.0,
            api_period_s: 60.0,
            api_loss_prob: 0.1,
            staleness_threshold_s: 60.0,
            iri_start: 3.0,
            iri_step: 0.05,
            accel_per_iri: 0.15,
            imu_noise: 0.02,
            roughness_map: RoughnessMap::default(),
            cloud_stages: vec![
                Stage::new("capture", StageDist::TruncatedNormal { mean: 0.1, sd: 0.02 }),
                Stage::new("uplink_rtt", StageDist::LogNormal { mean: 3.0, sigma: 0.4 }),
                Stage::new("cloud_inference", StageDist::TruncatedNormal { mean: 0.3, sd: 0.05 }),
                Stage::new("downlink", StageDist::TruncatedNormal { mean: 0.1, sd: 0.02 }),
            ],
            edge_stages: vec![
                Stage::new("capture", StageDist::TruncatedNormal { mean: 0.1, sd: 0.02 }),
                Stage::new("local_inference", StageDist::TruncatedNormal { mean: 0.4, sd: 0.1 }),
                Stage::new("decision", StageDist::TruncatedNormal { mean: 0.05, sd: 0.01 }),
            ],
        }
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be finite and >= 0, got {v}")))
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        positive("obd_hz", self.obd_hz)?;
        positive("imu_hz", self.imu_hz)?;
        positive("api_period_s", self.api_period_s)?;
        positive("staleness_threshold_s", self.staleness_threshold_s)?;
        non_negative("v2x_rate", self.v2x_rate)?;
        non_negative("iri_step", self.iri_step)?;
        non_negative("accel_per_iri", self.accel_per_iri)?;
        non_negative("imu_noise", self.imu_noise)?;
        non_negative("obd_jitter_s", self.obd_jitter_s)?;
        if self.obd_jitter_s >= 1.0 / self.obd_hz {
            return Err(Error::invalid("obd_jitter_s", "must be shorter than the OBD sample period"));
        }
        if !(0.0..=1.0).contains(&self.api_loss_prob) {
            return Err(Error::invalid("api_loss_prob", format!("must lie in [0, 1], got {}", self.api_loss_prob)));
        }
        if !(1.0..=20.0).contains(&self.iri_start) {
            return Err(Error::invalid("iri_start", "must lie in [1, 20] m/km"));
        }
        for stage in self.cloud_stages.iter().chain(&self.edge_stages) {
            stage.dist.validate()?;
        }
        if self.cloud_stages.is_empty() || self.edge_stages.is_empty() {
            return Err(Error::invalid("stages", "each latency mode needs at least one stage"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io { path: path.into(), source: e })?;
        let s: Scenario = serde_json::from_str(&text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::Io { path: path.into(), source: e })
    }
}
