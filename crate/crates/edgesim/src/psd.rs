use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// IMU samples per roughness estimate (5.12 s at 50 Hz).
pub const PSD_WINDOW: usize = 256;

/// Vertical-acceleration band integrated for the roughness proxy, in Hz.
pub const BAND_HZ: (f64, f64) = (0.5, 20.0);

/// Affine map from band power ((m/s²)²) to IRI-proxy units. The defaults are
/// non-physical placeholders, not a calibration against measured IRI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoughnessMap {
    pub gain: f64,
    pub offset: f64,
}

impl Default for RoughnessMap {
    fn default() -> Self {
        RoughnessMap { gain: 1.0, offset: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoughnessEstimate {
    pub band_power: f64,
    pub iri_proxy: f64,
}

/// One-sided periodogram of the mean-removed signal as `(frequency, power)`
/// pairs for bins `0..=n/2`. Powers sum to the signal's (population) variance.
pub fn periodogram(x: &[f64], fs: f64) -> Vec<(f64, f64)> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let norm = (n * n) as f64;
    (0..=n / 2)
        .map(|k| {
            let two_sided = k != 0 && !(n % 2 == 0 && k == n / 2);
            let p = buf[k].norm_sqr() / norm * if two_sided { 2.0 } else { 1.0 };
            (k as f64 * fs / n as f64, p)
        })
        .collect()
}

/// Sum of periodogram power over bins with frequency in `[lo, hi]`.
pub fn band_power(x: &[f64], fs: f64, (lo, hi): (f64, f64)) -> f64 {
    periodogram(x, fs)
        .into_iter()
        .filter(|&(f, _)| f >= lo && f <= hi)
        .map(|(_, p)| p)
        .sum()
}

/// Roughness proxy from one 256-sample window of vertical acceleration.
pub fn roughness_psd(window: &[f64], fs: f64, map: &RoughnessMap) -> Result<RoughnessEstimate> {
    if window.len() != PSD_WINDOW {
        return Err(Error::WindowLength { expected: PSD_WINDOW, found: window.len() });
    }
    if let Some(i) = window.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let band_power = band_power(window, fs, BAND_HZ);
    Ok(RoughnessEstimate { band_power, iri_proxy: map.offset + map.gain * band_power })
}
