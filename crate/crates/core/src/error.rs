use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e}")]
    NotPsd { eigenvalue: f64 },

    #[error("matrix is not symmetric: max asymmetry {asymmetry:e}")]
    NotSymmetric { asymmetry: f64 },

    #[error("pole of f at w = {w}: 1 + s·w vanishes for atom s = {atom}")]
    Pole { w: f64, atom: f64 },

    #[error("no sign change of f' found on (-1/σ₁, 0) over {} grid points", grid.len())]
    NoBracket { grid: Vec<(f64, f64)> },

    #[error("spectral parameter {z} must exceed {bound}")]
    OutsideDomain { z: f64, bound: f64 },

    #[error("σ̃ = {sigma} is not supercritical (threshold {threshold})")]
    Subcritical { sigma: f64, threshold: f64 },

    #[error("σ̃ = {sigma} is numerically on top of population eigenvalue {eigenvalue}")]
    NearPole { sigma: f64, eigenvalue: f64 },

    #[error("signal matrix has rank zero")]
    RankZeroSignal,

    #[error("signal rank {rank} exceeds the supported maximum {max}")]
    RankTooLarge { rank: usize, max: usize },

    #[error("no supercritical spike (K0 = 0)")]
    NoSupercriticalSpikes,

    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    #[error("requested {requested} eigenvalues, only {available} available")]
    RankOutOfRange { requested: usize, available: usize },

    #[error("invalid noise law: {0}")]
    InvalidLaw(String),

    #[error("operation requires the identity covariance recipe")]
    NotIdentity,

    #[error("numerical failure: {0}")]
    Numerical(String),
}
