//! Simulation and parameter optimization for a deterministic single-ion fountain.
//!
//! A single ion is extracted from a linear Paul trap by switching the endcap and
//! focusing electrodes negative, flies along the trap axis, is turned around by a
//! weakly positive reflector, and is recaptured when the extraction pulse ends at
//! the instant it comes back to rest at the trap centre.
//!
//! The crate is organised bottom-up:
//!
//! - [`fields`]: axial potential as a superposition of per-electrode unit potentials.
//! - [`waveforms`]: time-dependent electrode voltages and the RF drive envelope.
//! - [`dynamics`]: velocity-Verlet integration of the axial motion.
//! - [`recapture`]: the recapture test and residual motional energy.
//! - [`transverse`]: paraxial transfer-matrix model of steering and reflection.
//! - [`experiments`]: sweeps, Monte-Carlo runs, pulse-window search and calibrations.
//! - [`config`] and [`cli`]: unit-aware run configuration and the `fountain` binary.
//!
//! See the `examples/` directory for one runnable program per capability.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod fields;
pub mod plot;
pub mod recapture;
pub mod scenario;
pub mod transverse;
pub mod units;
pub mod waveforms;

pub use error::{Error, Result};
pub use scenario::Scenario;
