//! AI4I 2020 loader and the synthetic dataset CSV format.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureGroup, FeatureMatrix};
use crate::synthgen::VehicleRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MachineType {
    L,
    M,
    H,
}

impl MachineType {
    pub const ALL: [MachineType; 3] = [Self::L, Self::M, Self::H];

    fn parse(s: &str) -> Option<Self> {
        match s {
            "L" => Some(Self::L),
            "M" => Some(Self::M),
            "H" => Some(Self::H),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ai4iRecord {
    pub udi: u32,
    pub product_id: String,
    pub machine_type: MachineType,
    /// Kelvin.
    pub air_temp: f64,
    pub process_temp: f64,
    /// rpm.
    pub rot_speed: f64,
    /// Nm.
    pub torque: f64,
    /// Minutes.
    pub tool_wear: f64,
    pub machine_failure: u8,
    pub twf: u8,
    pub hdf: u8,
    pub pwf: u8,
    pub osf: u8,
    pub rnf: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureMode {
    Twf,
    Hdf,
    Pwf,
    Osf,
    Rnf,
}

impl FailureMode {
    pub const ALL: [FailureMode; 5] = [Self::Twf, Self::Hdf, Self::Pwf, Self::Osf, Self::Rnf];

    pub fn code(self) -> &'static str {
        match self {
            Self::Twf => "TWF",
            Self::Hdf => "HDF",
            Self::Pwf => "PWF",
            Self::Osf => "OSF",
            Self::Rnf => "RNF",
        }
    }
}

impl Ai4iRecord {
    pub fn flag(&self, mode: FailureMode) -> u8 {
        match mode {
            FailureMode::Twf => self.twf,
            FailureMode::Hdf => self.hdf,
            FailureMode::Pwf => self.pwf,
            FailureMode::Osf => self.osf,
            FailureMode::Rnf => self.rnf,
        }
    }

    /// Aggregate label disagrees with the mode flags.
    pub fn is_inconsistent(&self) -> bool {
        let any = FailureMode::ALL.iter().any(|&m| self.flag(m) == 1);
        any != (self.machine_failure == 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ai4iSummary {
    pub n_rows: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub mode_counts: BTreeMap<String, usize>,
    /// Rows whose aggregate label disagrees with the mode flags (kept).
    pub inconsistent_rows: usize,
}

pub fn summarize_ai4i(records: &[Ai4iRecord]) -> Ai4iSummary {
    let failures = records.iter().filter(|r| r.machine_failure == 1).count();
    let mode_counts = FailureMode::ALL
        .iter()
        .map(|&m| (m.code().to_string(), records.iter().filter(|r| r.flag(m) == 1).count()))
        .collect();
    Ai4iSummary {
        n_rows: records.len(),
        failures,
        failure_rate: if records.is_empty() { 0.0 } else { failures as f64 / records.len() as f64 },
        mode_counts,
        inconsistent_rows: records.iter().filter(|r| r.is_inconsistent()).count(),
    }
}

/// `"Air temperature [K]"` becomes `"air_temperature"`.
pub fn normalize_header(raw: &str) -> String {
    let base = match raw.find('[') {
        Some(i) => &raw[..i],
        None => raw,
    };
    base.trim()
        .trim_start_matches('\u{feff}')
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join("_")
}

const AI4I_COLUMNS: [&str; 14] = [
    "udi",
    "product_id",
    "type",
    "air_temperature",
    "process_temperature",
    "rotational_speed",
    "torque",
    "tool_wear",
    "machine_failure",
    "twf",
    "hdf",
    "pwf",
    "osf",
    "rnf",
];

pub fn load_ai4i(path: &Path) -> Result<(Vec<Ai4iRecord>, Ai4iSummary)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_ai4i(file, path)
}

/// Parses AI4I CSV from any reader; `path` only labels errors.
pub fn read_ai4i<R: Read>(reader: R, path: &Path) -> Result<(Vec<Ai4iRecord>, Ai4iSummary)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(normalize_header).collect();
    let missing: Vec<&str> = AI4I_COLUMNS.iter().copied().filter(|c| !headers.iter().any(|h| h == c)).collect();
    if !missing.is_empty() {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            detail: format!("missing columns: {}", missing.join(", ")),
        });
    }
    let idx: Vec<usize> = AI4I_COLUMNS
        .iter()
        .map(|c| headers.iter().position(|h| h == c).expect("checked above"))
        .collect();
    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        // Line 1 is the header.
        let line = i + 2;
        let row = row?;
        let field = |k: usize| -> Result<&str> {
            row.get(idx[k]).map(str::trim).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                column: AI4I_COLUMNS[k].to_string(),
                detail: "missing field".into(),
            })
        };
        let bad = |k: usize, detail: String| Error::Parse {
            path: path.to_path_buf(),
            row: line,
            column: AI4I_COLUMNS[k].to_string(),
            detail,
        };
        let num = |k: usize| -> Result<f64> {
            let s = field(k)?;
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(k, format!("`{s}` is not a number")))
        };
        let flag = |k: usize| -> Result<u8> {
            match field(k)? {
                "0" => Ok(0),
                "1" => Ok(1),
                s => Err(bad(k, format!("`{s}` is not 0 or 1"))),
            }
        };
        let udi_text = field(0)?;
        let type_text = field(2)?;
        records.push(Ai4iRecord {
            udi: udi_text.parse().map_err(|_| bad(0, format!("`{udi_text}` is not an id")))?,
            product_id: field(1)?.to_string(),
            machine_type: MachineType::parse(type_text).ok_or_else(|| bad(2, format!("unknown type `{type_text}`")))?,
            air_temp: num(3)?,
            process_temp: num(4)?,
            rot_speed: num(5)?,
            torque: num(6)?,
            tool_wear: num(7)?,
            machine_failure: flag(8)?,
            twf: flag(9)?,
            hdf: flag(10)?,
            pwf: flag(11)?,
            osf: flag(12)?,
            rnf: flag(13)?,
        });
    }
    let summary = summarize_ai4i(&records);
    if summary.inconsistent_rows > 0 {
        log::info!("{} rows have mode flags that disagree with machine_failure", summary.inconsistent_rows);
    }
    Ok((records, summary))
}

/// Writes records in the AI4I layout (with the source's unit suffixes).
pub fn write_ai4i(records: &[Ai4iRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "UDI",
        "Product ID",
        "Type",
        "Air temperature [K]",
        "Process temperature [K]",
        "Rotational speed [rpm]",
        "Torque [Nm]",
        "Tool wear [min]",
        "Machine failure",
        "TWF",
        "HDF",
        "PWF",
        "OSF",
        "RNF",
    ])?;
    for r in records {
        let t = match r.machine_type {
            MachineType::L => "L",
            MachineType::M => "M",
            MachineType::H => "H",
        };
        w.write_record([
            r.udi.to_string(),
            r.product_id.clone(),
            t.to_string(),
            r.air_temp.to_string(),
            r.process_temp.to_string(),
            r.rot_speed.to_string(),
            r.torque.to_string(),
            r.tool_wear.to_string(),
            r.machine_failure.to_string(),
            r.twf.to_string(),
            r.hdf.to_string(),
            r.pwf.to_string(),
            r.osf.to_string(),
            r.rnf.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Five continuous columns followed by a one-hot machine type.
pub fn ai4i_features(records: &[Ai4iRecord]) -> Result<FeatureMatrix> {
    let names: Vec<String> = [
        "air_temperature",
        "process_temperature",
        "rotational_speed",
        "torque",
        "tool_wear",
        "type_L",
        "type_M",
        "type_H",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut m = FeatureMatrix::new(names, vec![FeatureGroup::A; 8], vec![vec![5, 6, 7]])?;
    for r in records {
        let onehot = |t: MachineType| f64::from(u8::from(r.machine_type == t));
        m.push_row(&[
            r.air_temp,
            r.process_temp,
            r.rot_speed,
            r.torque,
            r.tool_wear,
            onehot(MachineType::L),
            onehot(MachineType::M),
            onehot(MachineType::H),
        ])?;
    }
    Ok(m)
}

pub fn ai4i_labels(records: &[Ai4iRecord]) -> Vec<u8> {
    records.iter().map(|r| r.machine_failure).collect()
}

pub fn ai4i_mode_labels(records: &[Ai4iRecord], mode: FailureMode) -> Vec<u8> {
    records.iter().map(|r| r.flag(mode)).collect()
}

pub fn write_synthetic(records: &[VehicleRecord], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    w.write_record(VehicleRecord::COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_synthetic(path: &Path) -> Result<Vec<VehicleRecord>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.iter().map(String::as_str).ne(VehicleRecord::COLUMNS) {
        let unknown: Vec<&str> = headers
            .iter()
            .map(String::as_str)
            .filter(|h| !VehicleRecord::COLUMNS.contains(h))
            .collect();
        let missing: Vec<&str> = VehicleRecord::COLUMNS
            .iter()
            .copied()
            .filter(|c| !headers.iter().any(|h| h == c))
            .collect();
        let detail = if unknown.is_empty() && missing.is_empty() {
            "columns out of order".to_string()
        } else {
            format!("unknown columns [{}]; missing columns [{}]", unknown.join(", "), missing.join(", "))
        };
        return Err(Error::Schema { path: path.to_path_buf(), detail });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<VehicleRecord>().enumerate() {
        out.push(row.map_err(|e| {
            let column = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err
                    .field()
                    .and_then(|f| VehicleRecord::COLUMNS.get(f as usize))
                    .map_or_else(String::new, |c| c.to_string()),
                _ => String::new(),
            };
            Error::Parse { path: path.to_path_buf(), row: i + 2, column, detail: e.to_string() }
        })?);
    }
    Ok(out)
}
