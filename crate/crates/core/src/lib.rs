//! Core simulation and analysis library for a pulsed, resonantly driven
//! quantum-dot–micropillar single-photon source.
//!
//! The crate is organised around the stages of such an experiment:
//!
//! * [`hilbert`] — truncated Jaynes–Cummings Hilbert space and operator algebra,
//! * [`model`] — physical parameters, units, and the drive pulse,
//! * [`evolve`] — Lindblad master-equation propagation (adaptive Runge–Kutta),
//! * [`trajectory`] — quantum-jump Monte Carlo unravelling producing photon clicks,
//! * [`emission`] — pulsed-excitation experiments: Rabi curves, lifetime traces,
//!   detuning series, and full click-stream generation with a detector model,
//! * [`stats`] — Hanbury Brown–Twiss splitting, coincidence histograms, g²(0),
//! * [`formulas`] — closed-form cavity-QED design and efficiency relations,
//! * [`fit`] — Levenberg–Marquardt fitting of the standard model families.
//!
//! The crate is `no_std`-compatible (requires `alloc`); all file formats and
//! the command-line runner live in the companion `pillarsim-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod emission;
pub mod error;
pub mod evolve;
pub mod fit;
pub mod formulas;
pub mod hilbert;
pub mod linalg;
pub mod model;
pub mod stats;
pub mod trajectory;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = core::result::Result<T, Error>;
