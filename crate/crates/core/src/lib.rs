//! Multi-curve Ramsey simulation for the higher levels of a transmon under
//! time-correlated `1/f^α` charge noise and quasiparticle parity switching.
//!
//! The crate is organised as a pipeline:
//!
//! * [`noise`] synthesises unit-variance power-law charge traces and estimates
//!   their spectra, including the `A = c_α·a²` amplitude conversion.
//! * [`model`] holds the closed-form dispersion and Ramsey population model.
//! * [`schedule`] maps every single shot of an interleaved multi-level
//!   acquisition onto the noise trace and assembles curve sets.
//! * [`lindblad`] is an independent 4-level density-matrix solver used to
//!   cross-check the closed-form model.
//! * [`analysis`] extracts envelopes, fits corrected and canonical `T2*`, and
//!   runs the `(α, a)` grid search.
//! * [`io`] and [`cli`] provide configuration, file formats and the command
//!   line front end.

pub mod analysis;
pub mod cli;
pub mod error;
pub mod io;
pub mod lindblad;
pub mod model;
pub mod noise;
pub mod schedule;

pub use error::{Error, Result};
