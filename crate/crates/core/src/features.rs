//! Feature encoding.
//!
//! Column layout of [`encode`] (29 columns):
//!
//! | group | columns |
//! |-------|---------|
//! | A | engine_temp, fuel_level, battery_health, brake_thickness, tire_tread, oil_degradation, mileage, vehicle_age, sensor_fault |
//! | B | hard_brake_freq, accel_variance, idle_ratio, driving_style_{Aggressive,Smooth,StopAndGo} |
//! | C | ambient_temp, road_roughness, precipitation, traffic_density, road_type_{Highway,Urban,Rural}, weather_cond_{Clear,Rain,Snow} |
//! | D | engine_thermal_load, brake_stress_idx, traffic_road_impact, engine_battery_ratio |
//!
//! Group D is always computed from the raw record, so dropping group B or C
//! from the model input leaves the interaction columns intact.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthgen::{ranges, DrivingStyle, RoadType, VehicleRecord, Weather};

/// New-pad thickness (mm) that normalises `brake_stress_idx`.
pub const BRAKE_NOMINAL_MM: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    /// Internal mechanical state.
    A,
    /// Driver behaviour.
    B,
    /// Environmental / V2X context.
    C,
    /// Engineered interactions.
    D,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] = [Self::A, Self::B, Self::C, Self::D];

    pub fn label(self) -> &'static str {
        match self {
            Self::A => "Internal Mechanical",
            Self::B => "Driver Behaviour",
            Self::C => "Environmental (V2X)",
            Self::D => "Engineered Interactions",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

/// Dense row-major design matrix with one group tag per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    n_rows: usize,
    column_names: Vec<String>,
    column_groups: Vec<FeatureGroup>,
    /// Column indices of each one-hot block.
    categorical_blocks: Vec<Vec<usize>>,
    standardization: Option<Vec<Standardization>>,
}

impl FeatureMatrix {
    pub fn new(
        column_names: Vec<String>,
        column_groups: Vec<FeatureGroup>,
        categorical_blocks: Vec<Vec<usize>>,
    ) -> Result<Self> {
        if column_names.len() != column_groups.len() {
            return Err(Error::LengthMismatch {
                left: column_names.len(),
                right: column_groups.len(),
            });
        }
        let d = column_names.len();
        if let Some(&bad) = categorical_blocks.iter().flatten().find(|&&c| c >= d) {
            return Err(Error::DegenerateInput(format!("categorical block references column {bad} >= {d}")));
        }
        Ok(FeatureMatrix {
            values: Vec::new(),
            n_rows: 0,
            column_names,
            column_groups,
            categorical_blocks,
            standardization: None,
        })
    }

    /// Unnamed matrix, every column tagged A. Handy for tests and ad hoc data.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let names = (0..d).map(|j| format!("x{j}")).collect();
        let mut m = FeatureMatrix::new(names, vec![FeatureGroup::A; d], Vec::new())?;
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m)
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.n_cols() {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols(),
                found: row.len(),
            });
        }
        self.values.extend_from_slice(row);
        self.n_rows += 1;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.column_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows == 0
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.values[i * d..(i + 1) * d]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols() + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn column_groups(&self) -> &[FeatureGroup] {
        &self.column_groups
    }

    pub fn categorical_blocks(&self) -> &[Vec<usize>] {
        &self.categorical_blocks
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }

    pub fn standardization(&self) -> Option<&[Standardization]> {
        self.standardization.as_deref()
    }

    /// Per-column mean and (population) standard deviation of the current rows.
    pub fn column_stats(&self) -> Vec<Standardization> {
        let n = self.n_rows.max(1) as f64;
        (0..self.n_cols())
            .map(|j| {
                let mean = (0..self.n_rows).map(|i| self.get(i, j)).sum::<f64>() / n;
                let var = (0..self.n_rows).map(|i| (self.get(i, j) - mean).powi(2)).sum::<f64>() / n;
                Standardization { mean, std: var.sqrt() }
            })
            .collect()
    }

    pub fn with_standardization(mut self) -> Self {
        self.standardization = Some(self.column_stats());
        self
    }

    pub fn group_counts(&self) -> BTreeMap<FeatureGroup, usize> {
        let mut counts = BTreeMap::new();
        for g in &self.column_groups {
            *counts.entry(*g).or_insert(0) += 1;
        }
        counts
    }

    /// Rows in the given order; column metadata is kept.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let d = self.n_cols();
        let mut values = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            values,
            n_rows: indices.len(),
            column_names: self.column_names.clone(),
            column_groups: self.column_groups.clone(),
            categorical_blocks: self.categorical_blocks.clone(),
            standardization: None,
        }
    }

    /// Keeps the listed columns (in ascending order); blocks are remapped and
    /// dropped when any of their columns is removed.
    pub fn select_columns(&self, keep: &[usize]) -> FeatureMatrix {
        let mut keep = keep.to_vec();
        keep.sort_unstable();
        keep.dedup();
        let remap: BTreeMap<usize, usize> = keep.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let mut values = Vec::with_capacity(self.n_rows * keep.len());
        for i in 0..self.n_rows {
            let row = self.row(i);
            values.extend(keep.iter().map(|&j| row[j]));
        }
        let categorical_blocks = self
            .categorical_blocks
            .iter()
            .filter_map(|b| b.iter().map(|c| remap.get(c).copied()).collect::<Option<Vec<_>>>())
            .collect();
        FeatureMatrix {
            values,
            n_rows: self.n_rows,
            column_names: keep.iter().map(|&j| self.column_names[j].clone()).collect(),
            column_groups: keep.iter().map(|&j| self.column_groups[j]).collect(),
            categorical_blocks,
            standardization: self
                .standardization
                .as_ref()
                .map(|s| keep.iter().map(|&j| s[j]).collect()),
        }
    }

    /// Appends the rows of `other`, which must share the column layout.
    pub fn append(&mut self, other: &FeatureMatrix) -> Result<()> {
        if other.column_names != self.column_names {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols(),
                found: other.n_cols(),
            });
        }
        self.values.extend_from_slice(&other.values);
        self.n_rows += other.n_rows;
        self.standardization = None;
        Ok(())
    }

    /// Writes the matrix as CSV plus a `<path>.columns.json` sidecar listing
    /// column names, group tags and one-hot blocks.
    pub fn export(&self, csv_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(csv_path)?;
        w.write_record(&self.column_names)?;
        for row in self.rows() {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(csv_path, e))?;
        let sidecar = csv_path.with_extension("columns.json");
        let doc = serde_json::json!({
            "columns": self.column_names.iter().zip(&self.column_groups)
                .map(|(n, g)| serde_json::json!({"name": n, "group": g}))
                .collect::<Vec<_>>(),
            "categorical_blocks": self.categorical_blocks,
        });
        let mut f = std::fs::File::create(&sidecar).map_err(|e| Error::io(&sidecar, e))?;
        serde_json::to_writer_pretty(&mut f, &doc)?;
        f.write_all(b"\n").map_err(|e| Error::io(&sidecar, e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionFeatures {
    pub engine_thermal_load: f64,
    pub brake_stress_idx: f64,
    pub traffic_road_impact: f64,
    pub engine_battery_ratio: f64,
}

fn min_max(x: f64, (lo, hi): (f64, f64)) -> f64 {
    (x - lo) / (hi - lo)
}

pub fn engineer_interactions(r: &VehicleRecord) -> Result<InteractionFeatures> {
    if r.battery_health <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "battery_health = {} (engine_battery_ratio undefined)",
            r.battery_health
        )));
    }
    if r.brake_thickness <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "brake_thickness = {} (brake_stress_idx undefined)",
            r.brake_thickness
        )));
    }
    let engine = min_max(r.engine_temp, ranges::ENGINE_TEMP);
    let ambient = min_max(r.ambient_temp, ranges::AMBIENT_TEMP);
    let braking = min_max(r.hard_brake_freq, ranges::HARD_BRAKE_FREQ);
    let rough = min_max(r.road_roughness, ranges::ROAD_ROUGHNESS);
    Ok(InteractionFeatures {
        engine_thermal_load: engine * (1.0 + r.traffic_density) * (1.0 + ambient),
        brake_stress_idx: braking * rough / (r.brake_thickness / BRAKE_NOMINAL_MM),
        traffic_road_impact: r.traffic_density * rough,
        engine_battery_ratio: r.engine_temp / r.battery_health,
    })
}

fn one_hot<T: PartialEq + Copy>(value: T, levels: &[T]) -> impl Iterator<Item = f64> + '_ {
    levels.iter().map(move |l| if *l == value { 1.0 } else { 0.0 })
}

/// Column names and groups of [`encode`], in order.
pub fn encoded_columns() -> (Vec<String>, Vec<FeatureGroup>, Vec<Vec<usize>>) {
    use FeatureGroup::*;
    let mut names: Vec<String> = Vec::new();
    let mut groups = Vec::new();
    let mut blocks = Vec::new();
    let push = |name: String, g: FeatureGroup, names: &mut Vec<String>, groups: &mut Vec<FeatureGroup>| {
        names.push(name);
        groups.push(g);
        names.len() - 1
    };
    for c in [
        "engine_temp",
        "fuel_level",
        "battery_health",
        "brake_thickness",
        "tire_tread",
        "oil_degradation",
        "mileage",
        "vehicle_age",
        "sensor_fault",
    ] {
        push(c.into(), A, &mut names, &mut groups);
    }
    for c in ["hard_brake_freq", "accel_variance", "idle_ratio"] {
        push(c.into(), B, &mut names, &mut groups);
    }
    blocks.push(
        DrivingStyle::ALL
            .iter()
            .map(|s| push(format!("driving_style_{}", s.name()), B, &mut names, &mut groups))
            .collect(),
    );
    for c in ["ambient_temp", "road_roughness", "precipitation", "traffic_density"] {
        push(c.into(), C, &mut names, &mut groups);
    }
    blocks.push(
        RoadType::ALL
            .iter()
            .map(|s| push(format!("road_type_{}", s.name()), C, &mut names, &mut groups))
            .collect(),
    );
    blocks.push(
        Weather::ALL
            .iter()
            .map(|s| push(format!("weather_cond_{}", s.name()), C, &mut names, &mut groups))
            .collect(),
    );
    for c in ["engine_thermal_load", "brake_stress_idx", "traffic_road_impact", "engine_battery_ratio"] {
        push(c.into(), D, &mut names, &mut groups);
    }
    (names, groups, blocks)
}

pub fn encode_row(r: &VehicleRecord) -> Result<Vec<f64>> {
    let ix = engineer_interactions(r)?;
    let mut row = vec![
        r.engine_temp,
        r.fuel_level,
        r.battery_health,
        r.brake_thickness,
        r.tire_tread,
        r.oil_degradation,
        r.mileage,
        r.vehicle_age,
        f64::from(r.sensor_fault),
        r.hard_brake_freq,
        r.accel_variance,
        r.idle_ratio,
    ];
    row.extend(one_hot(r.driving_style, &DrivingStyle::ALL));
    row.extend([r.ambient_temp, r.road_roughness, r.precipitation, r.traffic_density]);
    row.extend(one_hot(r.road_type, &RoadType::ALL));
    row.extend(one_hot(r.weather_cond, &Weather::ALL));
    row.extend([
        ix.engine_thermal_load,
        ix.brake_stress_idx,
        ix.traffic_road_impact,
        ix.engine_battery_ratio,
    ]);
    Ok(row)
}

pub fn encode(records: &[VehicleRecord]) -> Result<FeatureMatrix> {
    if records.is_empty() {
        return Err(Error::EmptyInput("records to encode"));
    }
    let (names, groups, blocks) = encoded_columns();
    let mut m = FeatureMatrix::new(names, groups, blocks)?;
    m.values.reserve(records.len() * m.n_cols());
    for r in records {
        m.push_row(&encode_row(r)?)?;
    }
    Ok(m)
}

pub fn select_groups(matrix: &FeatureMatrix, keep: &[FeatureGroup]) -> Result<FeatureMatrix> {
    if keep.is_empty() {
        return Err(Error::invalid("keep", "at least one feature group is required"));
    }
    let cols: Vec<usize> = (0..matrix.n_cols())
        .filter(|&j| keep.contains(&matrix.column_groups[j]))
        .collect();
    if cols.is_empty() {
        return Err(Error::DegenerateInput(format!("groups {keep:?} select no columns")));
    }
    Ok(matrix.select_columns(&cols))
}
