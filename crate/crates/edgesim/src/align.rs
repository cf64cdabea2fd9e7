use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::psd::{roughness_psd, PSD_WINDOW};
use crate::scenario::Scenario;
use crate::streams::{Source, Streams};

/// One second of fused context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedFrame {
    /// Grid time in whole seconds.
    pub timestamp: u64,
    /// Values keyed `source.field`; absent until a source first reports.
    pub values: BTreeMap<String, f64>,
    /// Seconds since each source's latest update at or before `timestamp`.
    pub staleness: BTreeMap<Source, f64>,
    /// Sources whose staleness exceeds the scenario threshold. Their values
    /// are retained.
    pub stale: Vec<Source>,
    /// Expected `source.field` keys with no value yet.
    pub missing: Vec<String>,
}

impl FusedFrame {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn is_stale(&self, s: Source) -> bool {
        self.stale.contains(&s)
    }
}

/// A series value at some time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interpolated {
    pub value: f64,
    /// Latest sample at or before `t`.
    pub prev: (f64, f64),
    /// First sample after `t`, when one exists and the value was interpolated.
    pub next: Option<(f64, f64)>,
}

/// Linear interpolation between the samples bracketing `t`, forward fill
/// past the last sample, `None` before the first. `samples` must be sorted by
/// strictly increasing time.
pub fn interpolate_at(samples: &[(f64, f64)], t: f64) -> Option<Interpolated> {
    let idx = samples.partition_point(|s| s.0 <= t);
    let prev = *samples.get(idx.checked_sub(1)?)?;
    if prev.0 == t {
        return Some(Interpolated { value: prev.1, prev, next: None });
    }
    match samples.get(idx) {
        Some(&next) => {
            let w = (t - prev.0) / (next.0 - prev.0);
            let value = (prev.1 + w * (next.1 - prev.1)).clamp(prev.1.min(next.1), prev.1.max(next.1));
            Some(Interpolated { value, prev, next: Some(next) })
        }
        None => Some(Interpolated { value: prev.1, prev, next: None }),
    }
}

/// Latest sample at or before `t`.
fn forward_fill(samples: &[(f64, f64)], t: f64) -> Option<(f64, f64)> {
    let idx = samples.partition_point(|s| s.0 <= t);
    idx.checked_sub(1).map(|i| samples[i])
}

/// Aligns all streams onto a 1 s grid covering `[0, ⌊duration⌋)`.
///
/// OBD signals are linearly interpolated; V2X and API context is forward
/// filled; the IMU contributes band power and IRI proxy from the 256 most
/// recent samples at or before each grid time.
pub fn align_window(streams: &Streams, scenario: &Scenario) -> Result<Vec<FusedFrame>> {
    scenario.validate()?;
    if !(streams.duration.is_finite() && streams.duration > 0.0) {
        return Err(Error::invalid("duration", "streams must cover a positive duration"));
    }
    let n_frames = streams.duration.floor() as u64;
    let mut series: BTreeMap<(Source, &str), Vec<(f64, f64)>> = BTreeMap::new();
    for src in [Source::Obd, Source::V2x, Source::WeatherApi, Source::RoadApi] {
        for &field in src.fields() {
            series.insert((src, field), streams.series(src, field));
        }
    }
    let update_times: BTreeMap<Source, Vec<f64>> = Source::ALL
        .iter()
        .map(|&s| (s, streams.source(s).iter().map(|e| e.timestamp).collect()))
        .collect();
    let imu = streams.series(Source::Imu, "accel_z");
    let imu_values: Vec<f64> = imu.iter().map(|s| s.1).collect();

    let mut frames = Vec::with_capacity(n_frames as usize);
    for ts in 0..n_frames {
        let t = ts as f64;
        let mut frame = FusedFrame {
            timestamp: ts,
            values: BTreeMap::new(),
            staleness: BTreeMap::new(),
            stale: Vec::new(),
            missing: Vec::new(),
        };
        for (&(src, field), samples) in &series {
            let v = if src.is_context() {
                forward_fill(samples, t).map(|s| s.1)
            } else {
                interpolate_at(samples, t).map(|i| i.value)
            };
            match v {
                Some(v) => {
                    frame.values.insert(format!("{}.{field}", src.name()), v);
                }
                None => frame.missing.push(format!("{}.{field}", src.name())),
            }
        }
        let end = imu.partition_point(|s| s.0 <= t);
        if end >= PSD_WINDOW {
            let est = roughness_psd(&imu_values[end - PSD_WINDOW..end], scenario.imu_hz, &scenario.roughness_map)?;
            frame.values.insert("imu.band_power".into(), est.band_power);
            frame.values.insert("imu.iri_proxy".into(), est.iri_proxy);
        } else {
            frame.missing.extend(Source::Imu.fields().iter().map(|f| format!("imu.{f}")));
        }
        for (&src, times) in &update_times {
            let idx = times.partition_point(|&u| u <= t);
            if let Some(i) = idx.checked_sub(1) {
                let age = t - times[i];
                frame.staleness.insert(src, age);
                if age > scenario.staleness_threshold_s {
                    frame.stale.push(src);
                }
            }
        }
        frame.missing.sort();
        frames.push(frame);
    }
    Ok(frames)
}

/// Writes frames as CSV: timestamp, completeness, every value column, then
/// per-source staleness and stale flag. Absent entries are empty.
pub fn write_frames_csv(frames: &[FusedFrame], path: &Path) -> Result<()> {
    let mut value_cols: Vec<String> = Source::ALL
        .iter()
        .flat_map(|s| s.fields().iter().map(move |f| format!("{}.{f}", s.name())))
        .collect();
    value_cols.sort();
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["timestamp".to_string(), "complete".to_string()];
    header.extend(value_cols.iter().cloned());
    for s in Source::ALL {
        header.push(format!("{}.staleness_s", s.name()));
        header.push(format!("{}.stale", s.name()));
    }
    w.write_record(&header)?;
    for f in frames {
        let mut row = vec![f.timestamp.to_string(), u8::from(f.is_complete()).to_string()];
        row.extend(value_cols.iter().map(|c| f.values.get(c).map(|v| v.to_string()).unwrap_or_default()));
        for s in Source::ALL {
            row.push(f.staleness.get(&s).map(|v| v.to_string()).unwrap_or_default());
            row.push(u8::from(f.is_stale(s)).to_string());
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Io { path: path.into(), source: e })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::simulate_streams;

    #[test]
    fn midpoint_interpolation() {
        let i = interpolate_at(&[(0.0, 0.0), (2.0, 2.0)], 1.0).unwrap();
        assert_eq!(i.value, 1.0);
        assert_eq!(i.prev, (0.0, 0.0));
        assert_eq!(i.next, Some((2.0, 2.0)));
    }

    #[test]
    fn interpolation_edges() {
        let s = [(1.0, 5.0), (3.0, 7.0)];
        assert!(interpolate_at(&s, 0.5).is_none());
        assert_eq!(interpolate_at(&s, 1.0).unwrap().value, 5.0);
        assert_eq!(interpolate_at(&s, 3.0).unwrap().value, 7.0);
        let after = interpolate_at(&s, 10.0).unwrap();
        assert_eq!((after.value, after.next), (7.0, None));
    }

    #[test]
    fn frame_count_is_floor_of_duration() {
        for d in [1.0, 10.0, 10.5, 59.9] {
            let s = simulate_streams(&Scenario::default(), d, 2).unwrap();
            assert_eq!(align_window(&s, &Scenario::default()).unwrap().len(), d.floor() as usize);
        }
    }

    #[test]
    fn frozen_api_goes_stale_after_threshold() {
        let sc = Scenario { api_loss_prob: 1.0, ..Scenario::default() };
        let s = simulate_streams(&sc, 200.0, 4).unwrap();
        let frames = align_window(&s, &sc).unwrap();
        let first = frames[0].values["road.road_roughness"];
        for f in &frames {
            let t = f.timestamp as f64;
            assert_eq!(f.staleness[&Source::RoadApi], t);
            assert_eq!(f.values["road.road_roughness"], first);
            assert_eq!(f.is_stale(Source::RoadApi), t > 60.0);
            assert_eq!(f.is_stale(Source::WeatherApi), t > 60.0);
        }
    }

    #[test]
    fn early_frames_flag_missing_imu_window() {
        let s = simulate_streams(&Scenario::default(), 30.0, 4).unwrap();
        let frames = align_window(&s, &Scenario::default()).unwrap();
        // 256 samples at 50 Hz need t >= 5.1 s.
        assert!(frames[5].missing.contains(&"imu.iri_proxy".to_string()));
        assert!(!frames[6].missing.iter().any(|m| m.starts_with("imu.")));
        assert!(frames[29].values.contains_key("imu.iri_proxy"));
    }

    #[test]
    fn csv_has_one_row_per_frame() {
        let s = simulate_streams(&Scenario::default(), 20.0, 4).unwrap();
        let frames = align_window(&s, &Scenario::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("frames.csv");
        write_frames_csv(&frames, &p).unwrap();
        let mut r = csv::Reader::from_path(&p).unwrap();
        assert_eq!(r.records().count(), 20);
        assert!(r.headers().unwrap().iter().any(|h| h == "road.stale"));
    }
}
