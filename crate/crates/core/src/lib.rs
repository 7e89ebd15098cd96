//! Massive-MIMO uplink simulation under polynomial hardware non-linearities.
//!
//! The crate covers the signal model (constellations, UMi scenario drops,
//! BS and UE polynomial distortion), closed-form Bussgang effective channels
//! and distortion correlations, LMMSE and learned estimators, distortion-aware
//! combiners, and a Monte-Carlo experiment harness.

pub mod bussgang;
pub mod constellation;
pub mod distortion;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod linalg;
pub mod neural;
pub mod receivers;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
