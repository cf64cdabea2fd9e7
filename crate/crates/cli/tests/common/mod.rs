//! Shared helpers for the CLI integration and acceptance tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use ctxmaint_core::ingest::{write_ai4i, Ai4iRecord, MachineType};
use ctxmaint_core::rng::substream;

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ctxmaint"))
}

pub fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn ctxmaint")
}

/// Random walk rescaled to the given mean and standard deviation.
fn normalised_walk(rng: &mut impl Rng, n: usize, mean: f64, sd: f64) -> Vec<f64> {
    let mut level = 0.0;
    let walk: Vec<f64> = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            level += z;
            level
        })
        .collect();
    let m = walk.iter().sum::<f64>() / n as f64;
    let s = (walk.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
    walk.iter().map(|v| mean + sd * (v - m) / s).collect()
}

/// Surrogate for the public AI4I 2020 file, built with the generating rules
/// documented alongside that dataset: product quality mix L/M/H 50/30/20,
/// random-walk temperatures, anti-correlated speed and torque, quality
/// dependent tool wear, and the five rule-based failure modes. RNF fires at
/// the rate observed in the public file (19 in 10,000).
pub fn ai4i_surrogate(n: usize, seed: u64) -> Vec<Ai4iRecord> {
    let mut rng = substream(seed, 0);
    let air = normalised_walk(&mut rng, n, 300.0, 2.0);
    let offset = normalised_walk(&mut rng, n, 10.0, 1.0);
    let mut wear = 0.0;
    let mut replace_at = rng.random_range(200.0..=240.0);
    (0..n)
        .map(|i| {
            let u: f64 = rng.random();
            let (machine_type, wear_step, osf_limit, prefix) = if u < 0.5 {
                (MachineType::L, 5.0, 11_000.0, 'L')
            } else if u < 0.8 {
                (MachineType::M, 3.0, 12_000.0, 'M')
            } else {
                (MachineType::H, 2.0, 13_000.0, 'H')
            };
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            let rot_speed = (1540.0 + 180.0 * z1).round().max(1100.0);
            let torque = ((40.0 + 10.0 * (-0.88 * z1 + 0.475 * z2)).max(3.0) * 10.0).round() / 10.0;
            let air_temp = (air[i] * 10.0).round() / 10.0;
            let process_temp = ((air[i] + offset[i]) * 10.0).round() / 10.0;

            let mut twf = 0;
            wear += wear_step;
            if wear >= replace_at {
                twf = u8::from(rng.random_bool(0.4));
                wear = 0.0;
                replace_at = rng.random_range(200.0..=240.0);
            }
            let power = torque * rot_speed * std::f64::consts::TAU / 60.0;
            let hdf = u8::from(process_temp - air_temp < 8.6 && rot_speed < 1380.0);
            let pwf = u8::from(!(3500.0..=9000.0).contains(&power));
            let osf = u8::from(wear * torque > osf_limit);
            let rnf = u8::from(rng.random_bool(0.0019));
            let machine_failure = u8::from(twf + hdf + pwf + osf + rnf > 0);
            Ai4iRecord {
                udi: i as u32 + 1,
                product_id: format!("{prefix}{}", 10_000 + i),
                machine_type,
                air_temp,
                process_temp,
                rot_speed,
                torque,
                tool_wear: wear,
                machine_failure,
                twf,
                hdf,
                pwf,
                osf,
                rnf,
            }
        })
        .collect()
}

pub fn write_surrogate(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let p = dir.join("ai4i_surrogate.csv");
    write_ai4i(&ai4i_surrogate(n, seed), &p).expect("write surrogate");
    p
}
