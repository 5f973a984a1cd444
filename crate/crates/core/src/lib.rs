//! Behavioral simulator for a fully memristive reservoir computer.
//!
//! Volatile short-term-memory devices form the reservoir: each node turns a
//! 4-bit pulse stream into four read currents through a precomputed lookup
//! table. Nonvolatile analog synapses form a feedforward readout, trained
//! with sign-only (Manhattan) updates whose step size is one device pulse.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which the experiment runners use.

pub mod audio;
pub mod config;
pub mod device;
pub mod energy;
pub mod error;
pub mod readout;
pub mod report;
pub mod reservoir;
pub mod scalar;
pub mod sclc;
pub mod seed;
pub mod selftest;
pub mod tasks;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type VolatileDeviceParams = device::VolatileDeviceParams<f64>;
pub type VolatileState = device::VolatileState<f64>;
pub type SynapseParams = device::SynapseParams<f64>;
pub type ReservoirLookup = reservoir::ReservoirLookup<f64>;
pub type ReadoutNetwork = readout::ReadoutNetwork<f64>;
pub type TrainConfig = readout::TrainConfig<f64>;
pub type AudioClip = audio::AudioClip<f64>;
pub type IvTrace = sclc::IvTrace<f64>;
pub type RegionFit = sclc::RegionFit<f64>;

pub type VolatileDeviceParams32 = device::VolatileDeviceParams<f32>;
pub type SynapseParams32 = device::SynapseParams<f32>;
pub type ReadoutNetwork32 = readout::ReadoutNetwork<f32>;

/// Version stamped into every emitted artifact.
pub const FORMAT_VERSION: &str = env!("CARGO_PKG_VERSION");
