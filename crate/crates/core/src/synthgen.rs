//! Synthetic contextual fleet generator.
//!
//! Each record is one vehicle-month. Features are drawn independently per
//! record from a ChaCha substream keyed by `(seed, record index)`, then a
//! latent risk is built from three additive, non-negative terms plus Gaussian
//! noise. Labels come from thresholding the noisy risk at the quantile that
//! hits the configured positive rate.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::substream;

/// Sampling ranges for the continuous fields. Wear-down quantities
/// (brake, tread, battery) are healthy at their upper bound.
pub mod ranges {
    pub const ENGINE_TEMP: (f64, f64) = (60.0, 130.0);
    pub const ENGINE_TEMP_MEAN: f64 = 95.0;
    pub const ENGINE_TEMP_STD: f64 = 10.0;
    pub const FUEL_LEVEL: (f64, f64) = (5.0, 100.0);
    pub const BATTERY_HEALTH: (f64, f64) = (40.0, 100.0);
    pub const BRAKE_THICKNESS: (f64, f64) = (1.0, 10.0);
    pub const TIRE_TREAD: (f64, f64) = (1.5, 8.0);
    pub const OIL_DEGRADATION: (f64, f64) = (0.0, 1.0);
    pub const MILEAGE: (f64, f64) = (0.0, 250_000.0);
    pub const VEHICLE_AGE: (f64, f64) = (0.0, 15.0);
    pub const SENSOR_FAULT_RATE: f64 = 0.05;

    pub const HARD_BRAKE_FREQ: (f64, f64) = (0.0, 8.0);
    pub const ACCEL_VARIANCE: (f64, f64) = (0.1, 4.0);
    pub const IDLE_RATIO: (f64, f64) = (0.05, 0.7);

    pub const AMBIENT_TEMP: (f64, f64) = (-10.0, 50.0);
    pub const ROAD_ROUGHNESS: (f64, f64) = (1.0, 10.0);
    pub const PRECIPITATION: (f64, f64) = (0.0, 300.0);
    pub const TRAFFIC_DENSITY: (f64, f64) = (0.0, 1.0);

    /// Deficit thresholds.
    pub const BRAKE_MIN_SAFE: f64 = 4.0;
    pub const TREAD_MIN_SAFE: f64 = 3.0;
    pub const BATTERY_MIN_SAFE: f64 = 75.0;
    pub const OIL_MAX_SAFE: f64 = 0.6;
    pub const MILEAGE_MAX_SAFE: f64 = 150_000.0;
    pub const AMBIENT_COMFORT: f64 = 20.0;
    pub const AMBIENT_SPAN: f64 = 30.0;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DrivingStyle {
    Aggressive,
    Smooth,
    StopAndGo,
}

impl DrivingStyle {
    pub const ALL: [DrivingStyle; 3] = [Self::Aggressive, Self::Smooth, Self::StopAndGo];

    pub fn name(self) -> &'static str {
        match self {
            Self::Aggressive => "Aggressive",
            Self::Smooth => "Smooth",
            Self::StopAndGo => "StopAndGo",
        }
    }

    /// Style-conditioned `(hard_brake_freq, accel_variance, idle_ratio)` sub-ranges.
    fn behaviour_ranges(self) -> [(f64, f64); 3] {
        match self {
            Self::Aggressive => [(3.6, 4.4), (2.2, 3.0), (0.05, 0.3)],
            Self::Smooth => [(3.2, 4.0), (1.4, 2.2), (0.05, 0.3)],
            Self::StopAndGo => [(3.4, 4.2), (1.8, 2.6), (0.3, 0.7)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RoadType {
    Highway,
    Urban,
    Rural,
}

impl RoadType {
    pub const ALL: [RoadType; 3] = [Self::Highway, Self::Urban, Self::Rural];

    pub fn name(self) -> &'static str {
        match self {
            Self::Highway => "Highway",
            Self::Urban => "Urban",
            Self::Rural => "Rural",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Weather {
    Clear,
    Rain,
    Snow,
}

impl Weather {
    pub const ALL: [Weather; 3] = [Self::Clear, Self::Rain, Self::Snow];

    pub fn name(self) -> &'static str {
        match self {
            Self::Clear => "Clear",
            Self::Rain => "Rain",
            Self::Snow => "Snow",
        }
    }
}

/// One vehicle-month observation. Field order is the CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub engine_temp: f64,
    pub fuel_level: f64,
    pub battery_health: f64,
    pub brake_thickness: f64,
    pub tire_tread: f64,
    pub oil_degradation: f64,
    pub mileage: f64,
    pub vehicle_age: f64,
    pub sensor_fault: u8,
    pub hard_brake_freq: f64,
    pub accel_variance: f64,
    pub idle_ratio: f64,
    pub driving_style: DrivingStyle,
    pub ambient_temp: f64,
    pub road_roughness: f64,
    pub precipitation: f64,
    pub traffic_density: f64,
    pub road_type: RoadType,
    pub weather_cond: Weather,
    pub timestamp: u32,
    pub label: u8,
    pub service_days: f64,
}

impl VehicleRecord {
    pub const COLUMNS: [&'static str; 22] = [
        "engine_temp",
        "fuel_level",
        "battery_health",
        "brake_thickness",
        "tire_tread",
        "oil_degradation",
        "mileage",
        "vehicle_age",
        "sensor_fault",
        "hard_brake_freq",
        "accel_variance",
        "idle_ratio",
        "driving_style",
        "ambient_temp",
        "road_roughness",
        "precipitation",
        "traffic_density",
        "road_type",
        "weather_cond",
        "timestamp",
        "label",
        "service_days",
    ];

    /// A record with every risk term at its minimum.
    pub fn healthy(timestamp: u32) -> Self {
        VehicleRecord {
            engine_temp: ranges::ENGINE_TEMP_MEAN,
            fuel_level: 50.0,
            battery_health: ranges::BATTERY_HEALTH.1,
            brake_thickness: ranges::BRAKE_THICKNESS.1,
            tire_tread: ranges::TIRE_TREAD.1,
            oil_degradation: ranges::OIL_DEGRADATION.0,
            mileage: 10_000.0,
            vehicle_age: 1.0,
            sensor_fault: 0,
            hard_brake_freq: ranges::HARD_BRAKE_FREQ.0,
            accel_variance: ranges::ACCEL_VARIANCE.0,
            idle_ratio: 0.1,
            driving_style: DrivingStyle::Smooth,
            ambient_temp: ranges::AMBIENT_COMFORT,
            road_roughness: ranges::ROAD_ROUGHNESS.0,
            precipitation: 0.0,
            traffic_density: 0.0,
            road_type: RoadType::Highway,
            weather_cond: Weather::Clear,
            timestamp,
            label: 0,
            service_days: 365.0,
        }
    }

    /// Copy with every environmental input moved to its minimal-risk value.
    pub fn with_benign_environment(&self) -> Self {
        VehicleRecord {
            ambient_temp: ranges::AMBIENT_COMFORT,
            road_roughness: ranges::ROAD_ROUGHNESS.0,
            traffic_density: 0.0,
            weather_cond: Weather::Clear,
            ..self.clone()
        }
    }
}

/// Additive risk decomposition. `total` always equals the sum of the four
/// parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskBreakdown {
    pub r_mech: f64,
    pub r_driver: f64,
    pub r_env: f64,
    pub noise: f64,
    pub total: f64,
}

impl RiskBreakdown {
    pub fn noise_free(&self) -> f64 {
        self.r_mech + self.r_driver + self.r_env
    }
}

/// Per-term risk weights. Every term is multiplied by `scale`, which sets the
/// signal-to-noise ratio against the label noise without changing the
/// relative importance of the terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskWeights {
    pub brake: f64,
    pub tire: f64,
    pub battery: f64,
    pub oil: f64,
    pub mileage: f64,
    pub sensor_fault: f64,
    pub braking: f64,
    pub accel: f64,
    pub style: f64,
    pub roughness: f64,
    pub weather: f64,
    pub ambient: f64,
    pub traffic: f64,
    pub scale: f64,
}

impl Default for RiskWeights {
    fn default() -> Self {
        RiskWeights {
            brake: 2.0,
            tire: 1.2,
            battery: 1.2,
            oil: 1.5,
            mileage: 0.8,
            sensor_fault: 0.6,
            braking: 0.5,
            accel: 0.4,
            style: 0.3,
            roughness: 0.5,
            weather: 0.4,
            ambient: 0.3,
            traffic: 0.3,
            scale: 5.0,
        }
    }
}

impl RiskWeights {
    fn as_array(&self) -> [(&'static str, f64); 14] {
        [
            ("brake", self.brake),
            ("tire", self.tire),
            ("battery", self.battery),
            ("oil", self.oil),
            ("mileage", self.mileage),
            ("sensor_fault", self.sensor_fault),
            ("braking", self.braking),
            ("accel", self.accel),
            ("style", self.style),
            ("roughness", self.roughness),
            ("weather", self.weather),
            ("ambient", self.ambient),
            ("traffic", self.traffic),
            ("scale", self.scale),
        ]
    }

    /// Largest attainable noise-free risk: every normalised term at 1.
    pub fn max_risk(&self) -> f64 {
        let mech = self.brake + self.tire + self.battery + self.oil + self.mileage + self.sensor_fault;
        let driver = self.braking + self.accel + self.style;
        let env = self.roughness + self.weather + self.ambient + self.traffic;
        self.scale * (mech + driver + env)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n_records: usize,
    pub noise_sigma: f64,
    pub target_positive_rate: f64,
    pub seed: u64,
    pub weights: RiskWeights,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            n_records: 2000,
            noise_sigma: 1.0,
            target_positive_rate: 0.30,
            seed: 42,
            weights: RiskWeights::default(),
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma", "must be finite and >= 0"));
        }
        if !(self.target_positive_rate > 0.0 && self.target_positive_rate < 1.0) {
            return Err(Error::invalid("target_positive_rate", "must lie strictly between 0 and 1"));
        }
        for (name, w) in self.weights.as_array() {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid("weights", format!("`{name}` must be finite and >= 0")));
            }
        }
        if self.weights.scale <= 0.0 {
            return Err(Error::invalid("weights", "`scale` must be > 0"));
        }
        Ok(())
    }
}

/// Output of [`generate_fleet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    pub config: GeneratorConfig,
    pub records: Vec<VehicleRecord>,
    pub breakdowns: Vec<RiskBreakdown>,
    pub threshold: f64,
    pub max_risk: f64,
}

impl Fleet {
    pub fn labels(&self) -> Vec<u8> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn positive_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records.iter().filter(|r| r.label == 1).count() as f64 / self.records.len() as f64
    }
}

/// Result of [`calibrate_threshold`]; `degenerate` is set when ties made the
/// target rate unreachable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub value: f64,
    pub degenerate: bool,
}

fn uniform<R: Rng>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn pick<R: Rng, T: Copy>(rng: &mut R, items: &[T], probs: &[f64]) -> T {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (item, p) in items.iter().zip(probs) {
        acc += p;
        if u < acc {
            return *item;
        }
    }
    *items.last().expect("non-empty choice set")
}

pub const STYLE_PROBS: [f64; 3] = [0.25, 0.50, 0.25];
pub const ROAD_TYPE_PROBS: [f64; 3] = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];

pub const WEATHER_PROBS: [f64; 3] = [0.48, 0.04, 0.48];

/// Draws the raw features of record `index` and its standard-normal noise
/// variate. Label and service days are left at placeholders.
pub fn sample_record(seed: u64, index: usize) -> (VehicleRecord, f64) {
    let mut rng = substream(seed, index as u64);
    let style = pick(&mut rng, &DrivingStyle::ALL, &STYLE_PROBS);
    let [brake_r, accel_r, idle_r] = style.behaviour_ranges();
    let engine = Normal::new(ranges::ENGINE_TEMP_MEAN, ranges::ENGINE_TEMP_STD).expect("valid normal");
    let record = VehicleRecord {
        engine_temp: engine.sample(&mut rng).clamp(ranges::ENGINE_TEMP.0, ranges::ENGINE_TEMP.1),
        fuel_level: uniform(&mut rng, ranges::FUEL_LEVEL),
        battery_health: uniform(&mut rng, ranges::BATTERY_HEALTH),
        brake_thickness: uniform(&mut rng, ranges::BRAKE_THICKNESS),
        tire_tread: uniform(&mut rng, ranges::TIRE_TREAD),
        oil_degradation: uniform(&mut rng, ranges::OIL_DEGRADATION),
        mileage: uniform(&mut rng, ranges::MILEAGE),
        vehicle_age: uniform(&mut rng, ranges::VEHICLE_AGE),
        sensor_fault: u8::from(rng.random_bool(ranges::SENSOR_FAULT_RATE)),
        hard_brake_freq: uniform(&mut rng, brake_r),
        accel_variance: uniform(&mut rng, accel_r),
        idle_ratio: uniform(&mut rng, idle_r),
        driving_style: style,
        ambient_temp: uniform(&mut rng, ranges::AMBIENT_TEMP),
        road_roughness: uniform(&mut rng, ranges::ROAD_ROUGHNESS),
        precipitation: uniform(&mut rng, ranges::PRECIPITATION),
        traffic_density: uniform(&mut rng, ranges::TRAFFIC_DENSITY),
        road_type: pick(&mut rng, &RoadType::ALL, &ROAD_TYPE_PROBS),
        weather_cond: pick(&mut rng, &Weather::ALL, &WEATHER_PROBS),
        timestamp: index as u32,
        label: 0,
        service_days: 0.0,
    };
    let z: f64 = StandardNormal.sample(&mut rng);
    (record, z)
}

/// Generates the full labelled fleet. Output is identical for a given config
/// regardless of the rayon pool size.
pub fn generate_fleet(config: &GeneratorConfig) -> Result<Fleet> {
    config.validate()?;
    let max_risk = config.weights.max_risk();
    if config.n_records == 0 {
        return Ok(Fleet {
            config: config.clone(),
            records: Vec::new(),
            breakdowns: Vec::new(),
            threshold: 0.0,
            max_risk,
        });
    }
    let drawn: Vec<(VehicleRecord, RiskBreakdown)> = (0..config.n_records)
        .into_par_iter()
        .map(|i| {
            let (record, z) = sample_record(config.seed, i);
            let breakdown = risk_score(&record, &config.weights, config.noise_sigma * z);
            (record, breakdown)
        })
        .collect();
    let totals: Vec<f64> = drawn.iter().map(|(_, b)| b.total).collect();
    let threshold = calibrate_threshold(&totals, config.target_positive_rate)?;
    let (mut records, breakdowns): (Vec<_>, Vec<_>) = drawn.into_iter().unzip();
    for (record, breakdown) in records.iter_mut().zip(&breakdowns) {
        let (label, days) = assign_targets(breakdown, threshold.value, max_risk);
        record.label = label;
        record.service_days = days;
    }
    Ok(Fleet {
        config: config.clone(),
        records,
        breakdowns,
        threshold: threshold.value,
        max_risk,
    })
}

fn wear_down(x: f64, threshold: f64, floor: f64) -> f64 {
    ((threshold - x) / (threshold - floor)).clamp(0.0, 1.0)
}

fn wear_up(x: f64, threshold: f64, ceiling: f64) -> f64 {
    ((x - threshold) / (ceiling - threshold)).clamp(0.0, 1.0)
}

fn unit(x: f64, (lo, hi): (f64, f64)) -> f64 {
    ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
}

pub fn style_severity(style: DrivingStyle) -> f64 {
    match style {
        DrivingStyle::Aggressive => 1.0,
        DrivingStyle::StopAndGo => 0.6,
        DrivingStyle::Smooth => 0.0,
    }
}

pub fn weather_severity(weather: Weather) -> f64 {
    match weather {
        Weather::Snow => 1.0,
        Weather::Rain => 0.6,
        Weather::Clear => 0.0,
    }
}

/// Mechanical deficits in `[0, 1]`, in weight order
/// (brake, tire, battery, oil, mileage, sensor fault).
pub fn mechanical_deficits(r: &VehicleRecord) -> [f64; 6] {
    [
        wear_down(r.brake_thickness, ranges::BRAKE_MIN_SAFE, ranges::BRAKE_THICKNESS.0),
        wear_down(r.tire_tread, ranges::TREAD_MIN_SAFE, ranges::TIRE_TREAD.0),
        wear_down(r.battery_health, ranges::BATTERY_MIN_SAFE, ranges::BATTERY_HEALTH.0),
        wear_up(r.oil_degradation, ranges::OIL_MAX_SAFE, ranges::OIL_DEGRADATION.1),
        wear_up(r.mileage, ranges::MILEAGE_MAX_SAFE, ranges::MILEAGE.1),
        f64::from(r.sensor_fault.min(1)),
    ]
}

pub fn risk_score(r: &VehicleRecord, w: &RiskWeights, noise_draw: f64) -> RiskBreakdown {
    let [brake, tire, battery, oil, mileage, fault] = mechanical_deficits(r);
    let r_mech = w.scale
        * (w.brake * brake + w.tire * tire + w.battery * battery + w.oil * oil + w.mileage * mileage + w.sensor_fault * fault);
    let r_driver = w.scale
        * (w.braking * unit(r.hard_brake_freq, ranges::HARD_BRAKE_FREQ)
            + w.accel * unit(r.accel_variance, ranges::ACCEL_VARIANCE)
            + w.style * style_severity(r.driving_style));
    let ambient_dev = ((r.ambient_temp - ranges::AMBIENT_COMFORT).abs() / ranges::AMBIENT_SPAN).min(1.0);
    let r_env = w.scale
        * (w.roughness * unit(r.road_roughness, ranges::ROAD_ROUGHNESS)
            + w.weather * weather_severity(r.weather_cond)
            + w.ambient * ambient_dev
            + w.traffic * unit(r.traffic_density, ranges::TRAFFIC_DENSITY));
    RiskBreakdown {
        r_mech,
        r_driver,
        r_env,
        noise: noise_draw,
        total: r_mech + r_driver + r_env + noise_draw,
    }
}

/// Picks `τ` so that `round(target_rate · n)` risks lie strictly above it:
/// the midpoint between the two order statistics straddling the cut.
pub fn calibrate_threshold(risks: &[f64], target_rate: f64) -> Result<Threshold> {
    if risks.is_empty() {
        return Err(Error::EmptyInput("risk scores"));
    }
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(Error::invalid("target_rate", "must lie strictly between 0 and 1"));
    }
    let mut sorted = risks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((target_rate * n as f64).round() as usize).min(n);
    let value = if k == 0 {
        sorted[n - 1]
    } else if k == n {
        sorted[0] - 1.0
    } else {
        0.5 * (sorted[n - k - 1] + sorted[n - k])
    };
    let achieved = sorted.iter().filter(|&&r| r > value).count();
    let degenerate = achieved.abs_diff(k) > 1;
    if degenerate {
        log::warn!("threshold calibration degenerate: wanted {k} positives above tau, got {achieved} (ties)");
    }
    Ok(Threshold { value, degenerate })
}

/// Label from the noisy risk; service days from the noise-free risk so the
/// regression target is a deterministic function of the features.
pub fn assign_targets(breakdown: &RiskBreakdown, threshold: f64, max_risk: f64) -> (u8, f64) {
    let label = u8::from(breakdown.total > threshold);
    let risk = breakdown.noise_free().max(0.0);
    let days = (365.0 * (1.0 - risk / max_risk)).clamp(0.0, 365.0);
    (label, days)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worst_case() -> VehicleRecord {
        VehicleRecord {
            battery_health: ranges::BATTERY_HEALTH.0,
            brake_thickness: ranges::BRAKE_THICKNESS.0,
            tire_tread: ranges::TIRE_TREAD.0,
            oil_degradation: 1.0,
            mileage: ranges::MILEAGE.1,
            sensor_fault: 1,
            hard_brake_freq: ranges::HARD_BRAKE_FREQ.1,
            accel_variance: ranges::ACCEL_VARIANCE.1,
            driving_style: DrivingStyle::Aggressive,
            ambient_temp: ranges::AMBIENT_TEMP.1,
            road_roughness: ranges::ROAD_ROUGHNESS.1,
            traffic_density: 1.0,
            weather_cond: Weather::Snow,
            ..VehicleRecord::healthy(0)
        }
    }

    #[test]
    fn healthy_record_has_zero_risk() {
        let b = risk_score(&VehicleRecord::healthy(0), &RiskWeights::default(), 0.0);
        assert_eq!(b.total, 0.0);
        let b = risk_score(&VehicleRecord::healthy(0), &RiskWeights::default(), 0.7);
        assert_eq!(b.total, 0.7);
        assert_eq!(b.noise, 0.7);
    }

    #[test]
    fn worst_case_matches_hand_summed_maximum() {
        // Spreadsheet-style sum of every default weight, times the scale.
        let hand = 5.0 * (2.0 + 1.2 + 1.2 + 1.5 + 0.8 + 0.6 + 0.5 + 0.4 + 0.3 + 0.5 + 0.4 + 0.3 + 0.3);
        let b = risk_score(&worst_case(), &RiskWeights::default(), 0.0);
        assert!((b.total - hand).abs() < 1e-12, "{} vs {hand}", b.total);
        assert!((RiskWeights::default().max_risk() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn threshold_on_tiny_set() {
        let t = calibrate_threshold(&[1.0, 2.0, 3.0, 4.0], 0.25).unwrap();
        assert!(t.value > 3.0 && t.value < 4.0);
        assert!(!t.degenerate);
    }

    #[test]
    fn tied_risks_give_degenerate_threshold() {
        let t = calibrate_threshold(&[2.0; 10], 0.3).unwrap();
        assert!(t.degenerate);
        assert_eq!([2.0; 10].iter().filter(|&&r| r > t.value).count(), 0);
    }

    #[test]
    fn threshold_on_standard_normal_draws() {
        let mut rng = substream(11, 0);
        let draws: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let t = calibrate_threshold(&draws, 0.30).unwrap();
        // Oracle: sort and index, and the normal 0.70 quantile 0.5244.
        let mut sorted = draws.clone();
        sorted.sort_by(f64::total_cmp);
        assert!(t.value > sorted[6999] && t.value < sorted[7000]);
        assert!((t.value - 0.5244).abs() < 0.04, "tau = {}", t.value);
        assert_eq!(draws.iter().filter(|&&d| d > t.value).count(), 3000);
    }

    #[test]
    fn empty_risks_rejected() {
        assert!(matches!(calibrate_threshold(&[], 0.3), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn target_boundaries() {
        let at = |total: f64| RiskBreakdown { r_mech: total, r_driver: 0.0, r_env: 0.0, noise: 0.0, total };
        assert_eq!(assign_targets(&at(1.5), 1.5, 25.0).0, 0);
        assert_eq!(assign_targets(&at(1.6), 1.5, 25.0).0, 1);
        assert_eq!(assign_targets(&at(-0.5), 1.5, 25.0).1, 365.0);
        assert_eq!(assign_targets(&at(0.0), 1.5, 25.0).1, 365.0);
        assert_eq!(assign_targets(&at(25.0), 1.5, 25.0).1, 0.0);
    }

    #[test]
    fn generates_requested_fleet() {
        let fleet = generate_fleet(&GeneratorConfig::default()).unwrap();
        assert_eq!(fleet.records.len(), 2000);
        assert!((fleet.positive_rate() - 0.30).abs() <= 0.03);
        for (i, r) in fleet.records.iter().enumerate() {
            assert_eq!(r.timestamp as usize, i);
            assert!((ranges::ENGINE_TEMP.0..=ranges::ENGINE_TEMP.1).contains(&r.engine_temp));
            assert!((0.0..=365.0).contains(&r.service_days));
        }
    }

    #[test]
    fn empty_fleet() {
        let cfg = GeneratorConfig { n_records: 0, ..Default::default() };
        assert!(generate_fleet(&cfg).unwrap().records.is_empty());
    }

    #[test]
    fn generation_is_deterministic_across_pool_sizes() {
        let cfg = GeneratorConfig { n_records: 300, ..Default::default() };
        let a = generate_fleet(&cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| generate_fleet(&cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_config_names_field() {
        let cfg = GeneratorConfig { target_positive_rate: 1.0, ..Default::default() };
        match generate_fleet(&cfg) {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "target_positive_rate"),
            other => panic!("unexpected {other:?}"),
        }
        let cfg = GeneratorConfig { noise_sigma: -1.0, ..Default::default() };
        assert!(matches!(generate_fleet(&cfg), Err(Error::InvalidConfig { field: "noise_sigma", .. })));
    }

    #[test]
    fn benign_environment_lowers_mean_risk() {
        let fleet = generate_fleet(&GeneratorConfig { n_records: 500, ..Default::default() }).unwrap();
        let w = RiskWeights::default();
        let before: f64 = fleet.records.iter().map(|r| risk_score(r, &w, 0.0).total).sum();
        let after: f64 = fleet.records.iter().map(|r| risk_score(&r.with_benign_environment(), &w, 0.0).total).sum();
        assert!(after < before);
        for r in &fleet.records {
            assert_eq!(risk_score(&r.with_benign_environment(), &w, 0.0).r_env, 0.0);
        }
    }

    #[test]
    fn redrawn_noise_flips_some_labels() {
        let fleet = generate_fleet(&GeneratorConfig { n_records: 1000, ..Default::default() }).unwrap();
        let mut rng = substream(999, 0);
        let flips = fleet
            .records
            .iter()
            .zip(&fleet.breakdowns)
            .filter(|(r, b)| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let redrawn = RiskBreakdown { noise: z, total: b.noise_free() + z, ..**b };
                assign_targets(&redrawn, fleet.threshold, fleet.max_risk).0 != r.label
            })
            .count();
        assert!(flips > 0);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn breakdown_is_additive(seed in any::<u64>(), idx in 0usize..10_000, noise in -5.0f64..5.0) {
            let (r, _) = sample_record(seed, idx);
            let b = risk_score(&r, &RiskWeights::default(), noise);
            prop_assert_eq!(b.total, b.r_mech + b.r_driver + b.r_env + noise);
            prop_assert!(b.r_mech >= 0.0 && b.r_driver >= 0.0 && b.r_env >= 0.0);
        }

        #[test]
        fn thinner_brakes_never_lower_mechanical_risk(seed in any::<u64>(), a in 1.0f64..12.0, b in 1.0f64..12.0) {
            let (r, _) = sample_record(seed, 0);
            let (thin, thick) = if a < b { (a, b) } else { (b, a) };
            let w = RiskWeights::default();
            let lo = risk_score(&VehicleRecord { brake_thickness: thick, ..r.clone() }, &w, 0.0).r_mech;
            let hi = risk_score(&VehicleRecord { brake_thickness: thin, ..r }, &w, 0.0).r_mech;
            prop_assert!(hi >= lo);
        }
    }
}
