//! Risk-labelled synthetic fleet generation, from-scratch tree and linear
//! learners, resampling, metrics, TreeSHAP attributions and the experiment
//! suites built on them.

pub mod error;
pub mod experiments;
pub mod explain;
pub mod features;
pub mod ingest;
pub mod learners;
pub mod metrics;
pub mod resample;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};
