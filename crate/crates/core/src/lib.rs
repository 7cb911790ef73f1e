//! Benchmarking Bayes error rate (BER) estimators on data with unknown BER.
//!
//! Labels are resampled uniformly at random with probability `rho`, which moves
//! the true BER along a known affine path. Estimators are run on a grid of noise
//! levels and scored by how far their bounds leave the envelope of values that
//! path allows.

pub mod bounds;
pub mod data;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod mst;
pub mod neighbors;
pub mod scoring;
pub mod seed;

pub use bounds::{ClassCount, EnvelopeCurve, ErrorRate, EstimateInterval, NoiseLevel};
pub use error::{Error, Result};
