//! Simulation and metrology for covariance magnetometry with pairs of NV centers.
//!
//! The crate covers the two-qubit gate algebra used to prepare and read out Bell
//! pairs, classical noise and decoherence models, photon-counting readout,
//! NV–¹³C conditional dynamics, end-to-end Monte Carlo protocols with analytic
//! oracles, and closed-form SNR and sensitivity calculators.
//!
//! Basis order for every two-qubit object is `(|1,1⟩, |1,0⟩, |0,1⟩, |0,0⟩)`,
//! with the first label belonging to NV a.

// Domain checks are written `!(x > 0.0)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod carbon13;
pub mod cli;
pub mod config;
pub mod error;
pub mod gates;
pub mod hilbert;
pub mod io;
pub mod metrology;
pub mod noisefield;
pub mod protocols;
pub mod readout;
pub mod rng;
pub mod selftest;
pub mod stats;
pub mod tolerances;

pub use error::{Error, Result};
