use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Source {
    Obd,
    Imu,
    V2x,
    WeatherApi,
    RoadApi,
}

impl Source {
    pub const ALL: [Source; 5] = [Self::Obd, Self::Imu, Self::V2x, Self::WeatherApi, Self::RoadApi];

    pub fn name(self) -> &'static str {
        match self {
            Self::Obd => "obd",
            Self::Imu => "imu",
            Self::V2x => "v2x",
            Self::WeatherApi => "weather",
            Self::RoadApi => "road",
        }
    }

    /// Payload fields each source reports (for the IMU, the derived roughness
    /// fields of a fused frame).
    pub fn fields(self) -> &'static [&'static str] {
        match self {
            Self::Obd => &["engine_temp", "tire_pressure", "brake_wear", "vibration", "battery_soh"],
            Self::Imu => &["band_power", "iri_proxy"],
            Self::V2x => &["traffic_density", "hazard"],
            Self::WeatherApi => &["ambient_temp", "precipitation"],
            Self::RoadApi => &["road_roughness"],
        }
    }

    /// API-style sources carry slowly changing context that is forward-filled
    /// rather than interpolated.
    pub fn is_context(self) -> bool {
        matches!(self, Self::V2x | Self::WeatherApi | Self::RoadApi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamEvent {
    pub source: Source,
    /// Seconds on the simulation clock.
    pub timestamp: f64,
    pub payload: BTreeMap<String, f64>,
}

impl StreamEvent {
    fn new(source: Source, timestamp: f64, payload: &[(&str, f64)]) -> Self {
        StreamEvent {
            source,
            timestamp,
            payload: payload.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

/// One simulated run. Each source's events are in strictly increasing time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Streams {
    pub duration: f64,
    pub events: BTreeMap<Source, Vec<StreamEvent>>,
    /// Ground-truth roughness (IRI) for each whole second of the run.
    pub true_iri: Vec<f64>,
}

impl Streams {
    pub fn source(&self, s: Source) -> &[StreamEvent] {
        self.events.get(&s).map_or(&[], Vec::as_slice)
    }

    /// `(timestamp, value)` pairs of one payload field.
    pub fn series(&self, s: Source, field: &str) -> Vec<(f64, f64)> {
        self.source(s)
            .iter()
            .filter_map(|e| e.payload.get(field).map(|&v| (e.timestamp, v)))
            .collect()
    }
}

fn source_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Road excitation tones (Hz) and their share of the acceleration variance.
const ROAD_TONES: [(f64, f64); 3] = [(2.0, 0.5), (5.0, 0.3), (11.0, 0.2)];

/// Simulates every source over `[0, duration)`.
pub fn simulate_streams(scenario: &Scenario, duration: f64, seed: u64) -> Result<Streams> {
    scenario.validate()?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid("duration", format!("must be finite and > 0, got {duration}")));
    }
    let seconds = duration.ceil() as usize;

    let mut rng = source_rng(seed, 100);
    let mut iri = Vec::with_capacity(seconds + 1);
    let mut level = scenario.iri_start;
    for _ in 0..=seconds {
        iri.push(level);
        level = (level + scenario.iri_step * gauss(&mut rng)).clamp(1.0, 20.0);
    }

    let mut events = BTreeMap::new();
    events.insert(Source::Obd, simulate_obd(scenario, duration, &iri, seed));
    events.insert(Source::Imu, simulate_imu(scenario, duration, &iri, seed));
    events.insert(Source::V2x, simulate_v2x(scenario, duration, seed));
    let (weather, road) = simulate_apis(scenario, duration, &iri, seed);
    events.insert(Source::WeatherApi, weather);
    events.insert(Source::RoadApi, road);
    iri.truncate(seconds);
    Ok(Streams { duration, events, true_iri: iri })
}

fn ticks(rate: f64, duration: f64) -> impl Iterator<Item = f64> {
    (0u64..).map(move |k| k as f64 / rate).take_while(move |&t| t < duration)
}

fn simulate_obd(s: &Scenario, duration: f64, iri: &[f64], seed: u64) -> Vec<StreamEvent> {
    let mut rng = source_rng(seed, Source::Obd as u64);
    let mut engine: f64 = 90.0;
    let mut pressure: f64 = 32.0;
    let mut wear = 0.0;
    let mut soh: f64 = 92.0;
    ticks(s.obd_hz, duration)
        .map(|t0| {
            let t = t0 + s.obd_jitter_s * rng.random::<f64>();
            engine = (engine + 0.3 * gauss(&mut rng) + 0.02 * (90.0 - engine)).clamp(60.0, 130.0);
            pressure = (pressure - 0.001 + 0.02 * gauss(&mut rng)).max(15.0);
            wear += 0.0005 * rng.random::<f64>();
            soh = (soh - 0.0002).max(0.0);
            let vibration = s.accel_per_iri * iri[t as usize] * (1.0 + 0.05 * gauss(&mut rng));
            StreamEvent::new(
                Source::Obd,
                t,
                &[
                    ("engine_temp", engine),
                    ("tire_pressure", pressure),
                    ("brake_wear", wear),
                    ("vibration", vibration.max(0.0)),
                    ("battery_soh", soh),
                ],
            )
        })
        .collect()
}

fn simulate_imu(s: &Scenario, duration: f64, iri: &[f64], seed: u64) -> Vec<StreamEvent> {
    let mut rng = source_rng(seed, Source::Imu as u64);
    let phases: Vec<f64> = ROAD_TONES.iter().map(|_| TAU * rng.random::<f64>()).collect();
    ticks(s.imu_hz, duration)
        .map(|t| {
            let rms = s.accel_per_iri * iri[t as usize];
            let road: f64 = ROAD_TONES
                .iter()
                .zip(&phases)
                .map(|(&(f, share), &ph)| rms * (2.0 * share).sqrt() * (TAU * f * t + ph).sin())
                .sum();
            StreamEvent::new(Source::Imu, t, &[("accel_z", road + s.imu_noise * gauss(&mut rng))])
        })
        .collect()
}

fn simulate_v2x(s: &Scenario, duration: f64, seed: u64) -> Vec<StreamEvent> {
    let mut out = Vec::new();
    if s.v2x_rate == 0.0 {
        return out;
    }
    let mut rng = source_rng(seed, Source::V2x as u64);
    let gap = Exp::new(s.v2x_rate).expect("rate validated positive");
    let mut traffic: f64 = 0.3;
    let mut t = gap.sample(&mut rng);
    while t < duration {
        traffic = (traffic + 0.02 * gauss(&mut rng)).clamp(0.0, 1.0);
        let hazard = f64::from(u8::from(rng.random_bool(0.05)));
        out.push(StreamEvent::new(Source::V2x, t, &[("traffic_density", traffic), ("hazard", hazard)]));
        let next = t + gap.sample(&mut rng);
        // A tiny exponential draw can vanish in the sum; keep timestamps strictly increasing.
        t = if next > t { next } else { f64::from_bits(t.to_bits() + 1) };
    }
    out
}

fn simulate_apis(s: &Scenario, duration: f64, iri: &[f64], seed: u64) -> (Vec<StreamEvent>, Vec<StreamEvent>) {
    let mut wrng = source_rng(seed, Source::WeatherApi as u64);
    let mut rrng = source_rng(seed, Source::RoadApi as u64);
    let mut ambient = 15.0 + 5.0 * gauss(&mut wrng);
    let mut weather = Vec::new();
    let mut road = Vec::new();
    for (j, t) in ticks(1.0 / s.api_period_s, duration).enumerate() {
        ambient += 0.5 * gauss(&mut wrng);
        let precipitation = (2.0 * gauss(&mut wrng)).max(0.0);
        if j == 0 || !wrng.random_bool(s.api_loss_prob) {
            weather.push(StreamEvent::new(
                Source::WeatherApi,
                t,
                &[("ambient_temp", ambient), ("precipitation", precipitation)],
            ));
        }
        let lost = j > 0 && rrng.random_bool(s.api_loss_prob);
        if !lost {
            road.push(StreamEvent::new(Source::RoadApi, t, &[("road_roughness", iri[t as usize])]));
        }
    }
    (weather, road)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_arithmetic() {
        let s = simulate_streams(&Scenario::default(), 10.0, 1).unwrap();
        assert_eq!(s.source(Source::Obd).len(), 10);
        assert_eq!(s.source(Source::Imu).len(), 500);
        assert_eq!(s.source(Source::WeatherApi).len(), 1);
        assert_eq!(s.true_iri.len(), 10);
    }

    #[test]
    fn timestamps_strictly_increase_per_source() {
        let s = simulate_streams(&Scenario { v2x_rate: 20.0, ..Scenario::default() }, 300.0, 9).unwrap();
        for src in Source::ALL {
            let ev = s.source(src);
            assert!(!ev.is_empty(), "{src:?}");
            assert!(ev.windows(2).all(|w| w[0].timestamp < w[1].timestamp), "{src:?}");
            assert!(ev.iter().all(|e| e.source == src && e.timestamp >= 0.0 && e.timestamp < 300.0));
        }
    }

    #[test]
    fn total_loss_keeps_only_initial_update() {
        let s = simulate_streams(&Scenario { api_loss_prob: 1.0, ..Scenario::default() }, 600.0, 3).unwrap();
        assert_eq!(s.source(Source::WeatherApi).len(), 1);
        assert_eq!(s.source(Source::RoadApi).len(), 1);
        assert_eq!(s.source(Source::RoadApi)[0].timestamp, 0.0);
    }

    #[test]
    fn no_loss_delivers_every_period() {
        let s = simulate_streams(&Scenario { api_loss_prob: 0.0, ..Scenario::default() }, 600.0, 3).unwrap();
        let t: Vec<f64> = s.source(Source::RoadApi).iter().map(|e| e.timestamp).collect();
        assert_eq!(t, (0..10).map(|j| 60.0 * j as f64).collect::<Vec<_>>());
    }

    #[test]
    fn poisson_count_within_three_sigma() {
        // Count ~ Poisson(rate · T): mean 2000, sd √2000.
        let s = simulate_streams(&Scenario::default(), 1000.0, 11).unwrap();
        let n = s.source(Source::V2x).len() as f64;
        assert!((n - 2000.0).abs() <= 3.0 * 2000f64.sqrt(), "{n}");
    }

    #[test]
    fn deterministic_per_seed() {
        let a = simulate_streams(&Scenario::default(), 120.0, 5).unwrap();
        assert_eq!(a, simulate_streams(&Scenario::default(), 120.0, 5).unwrap());
        assert_ne!(a, simulate_streams(&Scenario::default(), 120.0, 6).unwrap());
    }

    #[test]
    fn rejects_bad_duration() {
        for d in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(simulate_streams(&Scenario::default(), d, 0).is_err());
        }
    }
}
