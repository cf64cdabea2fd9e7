//! Discrete-time simulation of an in-vehicle fusion node: multi-rate sensor
//! and V2X streams, a staleness-aware 1 s alignment grid, IMU road roughness
//! from a periodogram, and an edge-versus-cloud alert latency model.
//!
//! All latency figures produced here are modelled, not measured.

pub mod align;
pub mod error;
pub mod latency;
pub mod psd;
pub mod scenario;
pub mod streams;

pub use align::{align_window, interpolate_at, write_frames_csv, FusedFrame, Interpolated};
pub use error::{Error, Result};
pub use latency::{latency_model, write_latency_csv, LatencyMode, LatencySummary, Stage, StageDist, MODELLED_LABEL};
pub use psd::{band_power, periodogram, roughness_psd, RoughnessEstimate, RoughnessMap, BAND_HZ, PSD_WINDOW};
pub use scenario::Scenario;
pub use streams::{simulate_streams, Source, StreamEvent, Streams};
