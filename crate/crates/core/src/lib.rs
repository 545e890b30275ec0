//! Device-calibrated neuromorphic simulation.
//!
//! The crate is organised bottom-up:
//!
//! - [`device`]: closed-form sub-threshold CMOS equations for the neuron's
//!   integration mirror, spike-generation inverters and reset path.
//! - [`neuron`]: the discrete leaky integrate-and-fire update, f-I sweeps and
//!   a spike generator driven by a fitted activation.
//! - [`calibration`]: measurement ingestion, chip averaging, activation
//!   fitting (Levenberg-Marquardt), leakage onset and energy per spike.
//! - [`network`]: a dense feed-forward spiking network trained with
//!   surrogate-gradient backpropagation through time.
//! - [`quant`]: symmetric per-tensor 4-bit post-training quantization.
//! - [`energy`]: spike-count energy accounting.
//! - [`dataio`]: IDX parsing and the 28x28 to 20x20 area resize.
//! - [`exec`]: data-parallel helpers with a sequential fallback.
//!
//! All physical quantities are carried in SI base units (A, V, s, F, K, J).

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod config;
pub mod dataio;
pub mod device;
pub mod energy;
pub mod error;
pub mod exec;
pub mod network;
pub mod neuron;
pub mod quant;

pub use error::{Error, Result};
