//! Joint active/passive beamforming for RIS-assisted multi-user downlinks,
//! driven by symbol error rate.
//!
//! The crate covers the channel generators, the 16-QAM modem, the SINR/SER
//! link math with linear precoders, a Monte-Carlo downlink simulator, the
//! real-valued encoding of beamformers, an adaptive differential evolution
//! optimizer with its baselines, and an experiment harness.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod channel;
pub mod cvec;
pub mod encode;
pub mod error;
pub mod exec;
pub mod harness;
pub mod linkmath;
pub mod modem;
pub mod optim;
pub mod rng;
pub mod simulate;

pub use error::{Error, Result};
pub use exec::Execution;
