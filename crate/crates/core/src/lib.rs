//! Robust transceiver and discrete RIS phase design for RIS-aided MIMO links
//! under transceiver hardware impairments, RIS phase noise and statistical
//! CSI errors.
//!
//! The crate is organised bottom-up: [`model`] and [`channels`] describe the
//! system, [`mse`] evaluates the averaged MSE objective, [`precoder_opt`],
//! [`ris_mm`] and [`ris_rga`] provide the block updates, [`solver`] runs the
//! alternating optimization, [`analysis`] holds closed-form special cases and
//! [`bench`] drives Monte-Carlo sweeps. [`selftest`] collects brute-force
//! oracles.

pub mod analysis;
pub mod bench;
pub mod channels;
pub mod error;
pub mod linalg;
pub mod model;
pub mod mse;
pub mod precoder_opt;
pub mod ris_mm;
pub mod ris_rga;
pub mod selftest;
pub mod solver;

pub use error::{Error, Result};
