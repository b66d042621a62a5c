//! Parallel drivers, verification suites, file formats and the command line
//! built on `sigspike-core`.
//!
//! * [`ensemble`]: seeded Monte Carlo of spiked eigenvalues, empirical
//!   characteristic functions, rate and nonuniversality studies.
//! * [`locallaw`]: numerical checks of resolvent deterministic equivalents.
//! * [`hetero`]: critical-value calibration and size/power experiments.
//! * [`config`], [`output`], [`histogram`]: configuration and emitted data.
//!
//! Every driver is deterministic given its master seed, whatever the number
//! of worker threads.

pub mod cli;
pub mod config;
pub mod ensemble;
pub mod error;
pub mod hetero;
pub mod histogram;
pub mod locallaw;
pub mod output;

pub use sigspike_core as core;
