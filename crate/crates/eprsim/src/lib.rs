//! Event-based simulator for two-channel polarization and spin correlation
//! experiments.
//!
//! The crate is organized as a pipeline:
//!
//! * [`sources`] emit seed-reproducible streams of correlated pairs tagged
//!   with their hidden per-event state;
//! * [`optics`] splits each arm at a two-channel analyzer and carries the
//!   closed-form coincidence laws of every model;
//! * [`detection`] turns channel intensities into time-tagged clicks and
//!   pairs them across stations within a coincidence window;
//! * [`statistics`] estimates correlations from outcomes, intensities, or
//!   counts and evaluates the associated inequality bounds;
//! * [`analysis`] probes dichotomic step functions on the circle, whose
//!   shifted products are piecewise linear and never harmonic;
//! * [`experiment`] binds the layers into named, reproducible experiments
//!   behind the `eprsim` command-line tool.

pub mod analysis;
pub mod detection;
pub mod error;
pub mod experiment;
pub mod model;
pub mod optics;
pub mod rng;
pub mod sources;
pub mod statistics;

pub use error::{Error, Result};
pub use model::Model;
