//! Deterministic spectral theory for signal-plus-noise matrices `S + Σ^{1/2} X`.
//!
//! The crate is `no_std` (with `alloc`) and contains everything that does not
//! need threads or files:
//!
//! * [`spectra`]: population covariance recipes, their spectra and square roots.
//! * [`stieltjes`]: the self-consistent equation on the real axis, the
//!   critical point `w₊`, the edge `λ₊` and the spike map `θ(σ̃)`.
//! * [`spikes`]: deformed population, supercritical spikes and every
//!   deterministic quantity of the spike fluctuation law.
//! * [`noise`]: standardized entry laws with exact cumulants and
//!   characteristic functions.
//! * [`sampling`]: single-replication samplers (data, top eigenvalues,
//!   coupled nonuniversal components, mixture signals).
//! * [`resolvent`]: resolvents of the linearized matrix, their deterministic
//!   equivalents and the master matrices used to locate spikes.
//! * [`hetero`]: eigenvalue-ratio statistics for mean heterogeneity.
//! * [`stats`]: small statistics helpers (quantiles, KS distances, sums).
//!
//! Parallel drivers, file formats and the command line live in the `sigspike`
//! crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod error;
pub mod hetero;
pub mod linalg;
pub(crate) mod math;
pub mod noise;
pub mod resolvent;
pub mod rng;
pub mod sampling;
pub mod spectra;
pub mod spikes;
pub mod stats;
pub mod stieltjes;

pub use error::{Error, Result};
pub use nalgebra::{DMatrix, DVector};
pub use num_complex::Complex64;
