//! JSON run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sigspike_core::linalg::EigenMethod;
use sigspike_core::noise::{NoiseKind, NoiseLaw};
use sigspike_core::sampling::{self, Assignment, Model};
use sigspike_core::spectra::{CovarianceModel, CovarianceRecipe};
use sigspike_core::spikes::SignalModel;
use sigspike_core::DMatrix;

use crate::error::{AppError, AppResult};
use crate::output::DEFAULT_DIGITS;

/// Low-rank signal `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    /// `S = Σ_k d_k e_k e_kᵀ`.
    Localized { d: Vec<f64> },
    /// Explicit factors: `u` is `M × K` and `v` is `N × K`, both row-major.
    Factors { u: Vec<Vec<f64>>, d: Vec<f64>, v: Vec<Vec<f64>> },
    /// Explicit `M × N` matrix, row-major.
    Dense { rows: Vec<Vec<f64>> },
    /// Cluster centers with an assignment of the `N` columns.
    Mixture { centers: Vec<Vec<f64>>, assignment: Assignment },
}

fn row_major(rows: &[Vec<f64>], what: &str) -> AppResult<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(AppError::Config(format!("{what}: ragged rows")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

impl SignalSpec {
    pub fn build(&self, m: usize, n: usize) -> AppResult<SignalModel> {
        let s = match self {
            SignalSpec::Localized { d } => {
                if d.len() > m.min(n) {
                    return Err(AppError::Config(format!("{} localized spikes exceed min(M, N)", d.len())));
                }
                let mut sorted = d.clone();
                sorted.sort_by(|a, b| b.total_cmp(a));
                let k = sorted.len();
                let u = DMatrix::from_fn(m, k, |i, j| if i == j { 1.0 } else { 0.0 });
                let v = DMatrix::from_fn(n, k, |i, j| if i == j { 1.0 } else { 0.0 });
                SignalModel::from_factors(u, sorted, v)?
            }
            SignalSpec::Factors { u, d, v } => {
                SignalModel::from_factors(row_major(u, "signal.u")?, d.clone(), row_major(v, "signal.v")?)?
            }
            SignalSpec::Dense { rows } => SignalModel::from_dense(&row_major(rows, "signal.rows")?)?,
            SignalSpec::Mixture { centers, assignment } => sampling::mixture_signal(centers, assignment, n)?.signal,
        };
        if s.m() != m || s.n() != n {
            return Err(AppError::Config(format!("signal is {}×{}, expected {m}×{n}", s.m(), s.n())));
        }
        Ok(s)
    }
}

fn default_tau() -> f64 {
    0.05
}

fn gaussian() -> NoiseKind {
    NoiseKind::Gaussian
}

/// Population, dimensions, signal and entry law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub sigma: CovarianceRecipe,
    pub m: usize,
    pub n: usize,
    pub signal: Option<SignalSpec>,
    #[serde(default = "gaussian")]
    pub law: NoiseKind,
    #[serde(default = "default_tau")]
    pub tau: f64,
}

impl ModelSpec {
    /// `Σ = I` with a single localized spike.
    pub fn localized_identity(m: usize, n: usize, d: f64, law: NoiseKind) -> Self {
        Self {
            sigma: CovarianceRecipe::Identity,
            m,
            n,
            signal: Some(SignalSpec::Localized { d: vec![d] }),
            law,
            tau: default_tau(),
        }
    }

    pub fn covariance(&self) -> AppResult<CovarianceModel> {
        if self.m == 0 || self.n == 0 {
            return Err(AppError::Config("dimensions must be positive".into()));
        }
        Ok(CovarianceModel::new(self.sigma.clone(), self.m)?)
    }

    pub fn noise(&self) -> AppResult<NoiseLaw> {
        NoiseLaw::new(self.law.clone()).map_err(|e| AppError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    #[serde(default)]
    pub model: Model,
    #[serde(default)]
    pub couple_theta: bool,
    /// Eigenvalues recorded per replication; defaults to the signal rank.
    pub eigenvalues: Option<usize>,
    #[serde(default)]
    pub method: EigenMethod,
}

fn default_laws() -> Vec<NoiseKind> {
    vec![NoiseKind::Gaussian, NoiseKind::ThreePoint, NoiseKind::FourPoint]
}

fn default_max_bins() -> usize {
    80
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NonuniversalitySpec {
    #[serde(default = "default_laws")]
    pub laws: Vec<NoiseKind>,
    #[serde(default = "default_max_bins")]
    pub max_bins: usize,
}

impl Default for NonuniversalitySpec {
    fn default() -> Self {
        Self { laws: default_laws(), max_bins: default_max_bins() }
    }
}

fn default_k_star() -> usize {
    4
}

fn default_n_star() -> usize {
    100
}

fn default_quantile() -> f64 {
    0.95
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateSpec {
    #[serde(default = "default_k_star")]
    pub k_star: usize,
    #[serde(default = "default_n_star")]
    pub n_star: usize,
    #[serde(default = "default_quantile")]
    pub quantile: f64,
}

impl Default for CalibrateSpec {
    fn default() -> Self {
        Self { k_star: default_k_star(), n_star: default_n_star(), quantile: default_quantile() }
    }
}

/// Hypothesis test on a user data matrix (CSV, one observation per column).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestSpec {
    pub data: PathBuf,
    #[serde(default)]
    pub calibration: CalibrateSpec,
    /// Critical values `(DS, RS)`; calibrated when absent.
    pub critical_values: Option<(f64, f64)>,
    /// Subtract each variable's mean before testing.
    #[serde(default)]
    pub center: bool,
}

fn default_verify_n() -> usize {
    200
}

fn default_seeds() -> usize {
    50
}

fn default_phi() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    /// Smaller size; the scaling protocol also runs at `4n`.
    #[serde(default = "default_verify_n")]
    pub n: usize,
    #[serde(default = "default_seeds")]
    pub seeds: usize,
    #[serde(default = "default_phi")]
    pub phi: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self { n: default_verify_n(), seeds: default_seeds(), phi: default_phi() }
    }
}

fn default_digits() -> usize {
    DEFAULT_DIGITS
}

/// Full configuration file. Command-line flags override the top-level fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub master_seed: u64,
    pub reps: Option<usize>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(default = "default_digits")]
    pub digits: usize,
    pub model: Option<ModelSpec>,
    pub simulate: Option<SimulateSpec>,
    pub nonuniversality: Option<NonuniversalitySpec>,
    pub calibrate: Option<CalibrateSpec>,
    pub test: Option<TestSpec>,
    pub verify: Option<VerifySpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            reps: None,
            out: None,
            threads: None,
            digits: DEFAULT_DIGITS,
            model: None,
            simulate: None,
            nonuniversality: None,
            calibrate: None,
            test: None,
            verify: None,
        }
    }
}

impl RunConfig {
    /// Parses JSON; errors carry line and column.
    pub fn from_json(text: &str) -> AppResult<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| AppError::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            AppError::Config(msg) => AppError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> AppResult<()> {
        if self.digits == 0 || self.digits > 17 {
            return Err(AppError::Config(format!("digits must be in 1..=17, got {}", self.digits)));
        }
        if self.threads == Some(0) {
            return Err(AppError::Config("threads must be positive".into()));
        }
        if let Some(m) = &self.model {
            if m.m == 0 || m.n == 0 {
                return Err(AppError::Config("model dimensions must be positive".into()));
            }
            if !(m.tau > 0.0) {
                return Err(AppError::Config("tau must be positive".into()));
            }
        }
        if let Some(c) = &self.calibrate {
            validate_calibration(c)?;
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

pub fn validate_calibration(c: &CalibrateSpec) -> AppResult<()> {
    if c.k_star < 1 || sigspike_core::hetero::required_eigenvalues(c.k_star) > c.n_star {
        return Err(AppError::Config(format!("K* = {} needs N* ≥ {}", c.k_star, 2 * c.k_star - 1)));
    }
    if !(c.quantile > 0.0 && c.quantile < 1.0) {
        return Err(AppError::Config(format!("quantile must lie in (0, 1), got {}", c.quantile)));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let ok = r#"{"master_seed": 3, "model": {"sigma": {"kind": "identity"}, "m": 4, "n": 8,
                    "signal": {"kind": "localized", "d": [2.0]}}}"#;
        let cfg = RunConfig::from_json(ok).unwrap();
        assert_eq!(cfg.master_seed, 3);
        assert_eq!(cfg.model.unwrap().law, NoiseKind::Gaussian);
        let bad = r#"{"master_seed": 3, "colour": 1}"#;
        assert!(matches!(RunConfig::from_json(bad), Err(AppError::Config(_))));
        let nested = r#"{"model": {"sigma": {"kind": "identity", "rho": 1}, "m": 4, "n": 8}}"#;
        assert!(RunConfig::from_json(nested).is_err());
    }

    #[test]
    fn parse_errors_report_location() {
        let err = RunConfig::from_json("{\n  \"master_seed\": ,\n}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn localized_signal_is_sorted() {
        let s = SignalSpec::Localized { d: vec![1.0, 3.0] }.build(5, 6).unwrap();
        assert_eq!(s.d(), &[3.0, 1.0]);
    }
}
