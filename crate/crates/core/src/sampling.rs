//! Single-replication samplers.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenMethod};
use crate::math;
use crate::noise::NoiseLaw;
use crate::rng::{self, domains};
use crate::spectra::CovarianceModel;
use crate::spikes::{SignalModel, SpikeTheory};

/// Which sample matrix the eigenvalues come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    /// `Q̃_a = ỸỸᵀ` with `Ỹ = S + Σ^{1/2}X`.
    #[default]
    Additive,
    /// `Q̃_m = Σ̃^{1/2}XXᵀΣ̃^{1/2}` with `Σ̃ = Σ + SSᵀ`.
    Multiplicative,
}

impl Model {
    pub fn label(&self) -> &'static str {
        match self {
            Model::Additive => "additive",
            Model::Multiplicative => "multiplicative",
        }
    }
}

/// `X` with i.i.d. entries `law / √N`, filled column by column.
pub fn sample_noise<R: Rng + ?Sized>(m: usize, n: usize, law: &NoiseLaw, rng: &mut R) -> DMatrix<f64> {
    law.sample_matrix(m, n, 1.0 / math::sqrt(n as f64), rng)
}

/// `(X, Ỹ)` with `Ỹ = S + Σ^{1/2}X`.
pub fn sample_data<R: Rng + ?Sized>(
    sigma: &CovarianceModel,
    signal: Option<&SignalModel>,
    n: usize,
    law: &NoiseLaw,
    rng: &mut R,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = sigma.dim();
    if let Some(s) = signal {
        if s.m() != m {
            return Err(Error::DimensionMismatch { what: "rows of S", expected: m, found: s.m() });
        }
        if s.n() != n {
            return Err(Error::DimensionMismatch { what: "columns of S", expected: n, found: s.n() });
        }
    }
    let x = sample_noise(m, n, law, rng);
    let mut y = sigma.sqrt_mul(&x);
    if let Some(s) = signal {
        y += s.dense();
    }
    Ok((x, y))
}

/// `Σ̃^{1/2} = (Σ + UD²Uᵀ)^{1/2}`.
pub fn tilde_sqrt(sigma: &CovarianceModel, signal: &SignalModel) -> DMatrix<f64> {
    let full = sigma.matrix().into_owned() + signal.outer_gram();
    let eig = linalg::sym_eigen_desc((&full + full.transpose()) * 0.5);
    linalg::spectral_matrix(&eig.values, &eig.vectors, |s| math::sqrt(s.max(0.0)))
}

/// The `r` largest eigenvalues of `ZZᵀ`.
pub fn top_eigs(z: &DMatrix<f64>, r: usize, method: EigenMethod) -> Result<Vec<f64>> {
    linalg::top_eigenvalues(z, r, method)
}

/// `Θ_k = 2√N θ′_k (Σ^{1/2}ψ_k)ᵀ X (Sᵀψ_k)` for every supercritical spike.
pub fn coupled_theta(x: &DMatrix<f64>, theory: &SpikeTheory) -> Vec<f64> {
    let rn = math::sqrt(x.ncols() as f64);
    theory
        .spikes
        .iter()
        .map(|sp| {
            let xb = x * linalg::to_dvector(&sp.s_top_psi);
            2.0 * rn * sp.theta_prime * linalg::dot(&sp.sqrt_sigma_psi, xb.as_slice())
        })
        .collect()
}

/// How columns are assigned to clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Assignment {
    /// One label in `0..K` per column.
    Labels { labels: Vec<usize> },
    /// Contiguous blocks of sizes `⌊Nα_k⌋`, remainder given to the largest
    /// fractional parts (ties to the lowest index).
    Exact { alpha: Vec<f64> },
    /// I.i.d. labels drawn from `α`.
    Random { alpha: Vec<f64>, seed: u64 },
}

/// Cluster sizes for [`Assignment::Exact`].
pub fn exact_counts(n: usize, alpha: &[f64]) -> Result<Vec<usize>> {
    validate_alpha(alpha)?;
    let raw: Vec<f64> = alpha.iter().map(|a| a * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|&r| math::floor(r) as usize).collect();
    let mut rest = n.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..alpha.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - math::floor(raw[b])).total_cmp(&(raw[a] - math::floor(raw[a]))).then(a.cmp(&b)));
    for &k in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        counts[k] += 1;
        rest -= 1;
    }
    Ok(counts)
}

/// Labels `0,…,0,1,…,1,…` with [`exact_counts`] block sizes.
pub fn exact_labels(n: usize, alpha: &[f64]) -> Result<Vec<usize>> {
    let counts = exact_counts(n, alpha)?;
    Ok(counts.iter().enumerate().flat_map(|(k, &c)| core::iter::repeat_n(k, c)).collect())
}

fn validate_alpha(alpha: &[f64]) -> Result<()> {
    if alpha.is_empty() || alpha.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
        return Err(Error::InvalidInput("cluster proportions must be non-negative".into()));
    }
    let total: f64 = alpha.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(alloc::format!("cluster proportions sum to {total}, not 1")));
    }
    Ok(())
}

fn resolve_labels(assignment: &Assignment, k: usize, n: usize) -> Result<Vec<usize>> {
    let labels = match assignment {
        Assignment::Labels { labels } => labels.clone(),
        Assignment::Exact { alpha } => {
            if alpha.len() != k {
                return Err(Error::DimensionMismatch { what: "cluster proportions", expected: k, found: alpha.len() });
            }
            exact_labels(n, alpha)?
        }
        Assignment::Random { alpha, seed } => {
            if alpha.len() != k {
                return Err(Error::DimensionMismatch { what: "cluster proportions", expected: k, found: alpha.len() });
            }
            validate_alpha(alpha)?;
            let mut cum = Vec::with_capacity(k);
            let mut acc = 0.0;
            for &a in alpha {
                acc += a;
                cum.push(acc);
            }
            let mut r = rng::stream(rng::derive_seed(*seed, domains::ASSIGNMENT, n as u64));
            (0..n)
                .map(|_| {
                    let u: f64 = r.random::<f64>() * acc;
                    cum.partition_point(|&c| c <= u).min(k - 1)
                })
                .collect()
        }
    };
    if labels.len() != n {
        return Err(Error::DimensionMismatch { what: "cluster labels", expected: n, found: labels.len() });
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::InvalidInput(alloc::format!("label {bad} out of range for {k} clusters")));
    }
    Ok(labels)
}

/// Mixture signal together with its cluster bookkeeping.
#[derive(Debug, Clone)]
pub struct Mixture {
    pub signal: SignalModel,
    /// `N̂_k`, including empty clusters.
    pub counts: Vec<usize>,
    pub labels: Vec<usize>,
}

/// `S = (1/√N) [c₁,…,c_K] Jᵀ` with `J` the `N × K` membership indicator.
///
/// With `α̂_k = N̂_k/N`, `S = (C diag(√α̂)) (J diag(1/√N̂))ᵀ` and the right
/// factor has orthonormal columns, so the SVD reduces to the `M × K` matrix
/// `C diag(√α̂)`. Empty clusters contribute nothing.
pub fn mixture_signal(centers: &[Vec<f64>], assignment: &Assignment, n: usize) -> Result<Mixture> {
    let k = centers.len();
    if k == 0 {
        return Err(Error::RankZeroSignal);
    }
    let m = centers[0].len();
    if let Some(c) = centers.iter().find(|c| c.len() != m) {
        return Err(Error::DimensionMismatch { what: "center length", expected: m, found: c.len() });
    }
    let labels = resolve_labels(assignment, k, n)?;
    let mut counts = vec![0usize; k];
    for &l in &labels {
        counts[l] += 1;
    }
    let active: Vec<usize> = (0..k).filter(|&j| counts[j] > 0).collect();
    let mut b = DMatrix::zeros(m, active.len());
    let mut jhat = DMatrix::zeros(n, active.len());
    for (col, &j) in active.iter().enumerate() {
        let w = math::sqrt(counts[j] as f64 / n as f64);
        for i in 0..m {
            b[(i, col)] = centers[j][i] * w;
        }
        let inv = 1.0 / math::sqrt(counts[j] as f64);
        for (mu, &l) in labels.iter().enumerate() {
            if l == j {
                jhat[(mu, col)] = inv;
            }
        }
    }
    let core = SignalModel::from_dense(&b)?;
    let v = &jhat * core.v();
    let signal = SignalModel::from_factors(core.u().clone(), core.d().to_vec(), v)?;
    Ok(Mixture { signal, counts, labels })
}

/// Dense `S` with column `μ` equal to `c_{label(μ)}/√N`.
pub fn mixture_dense(centers: &[Vec<f64>], labels: &[usize]) -> DMatrix<f64> {
    let n = labels.len();
    let m = centers.first().map_or(0, Vec::len);
    let scale = 1.0 / math::sqrt(n as f64);
    DMatrix::from_fn(m, n, |i, mu| centers[labels[mu]][i] * scale)
}
