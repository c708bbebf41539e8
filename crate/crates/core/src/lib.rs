//! Validation toolkit for long-term EEG seizure detectors.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod edf;
pub mod error;
pub mod experiment;
pub mod features;
pub mod metrics;
pub mod partition;
pub mod postprocess;
pub mod predictor;
pub mod recording;
mod seed;
pub mod synth;
pub mod timeline;

pub use error::{Error, Result};
