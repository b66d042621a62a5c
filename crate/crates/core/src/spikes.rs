//! Deformed population `Σ̃ = Σ + SSᵀ`, supercritical spikes and the
//! deterministic quantities governing their fluctuations.
//!
//! For each supercritical spike `k` with population eigenpair `(σ̃_k, ψ_k)`:
//!
//! * `θ_k = θ(σ̃_k)` is the almost-sure limit of the sample spike `λ_k`,
//! * `L_k` is the asymptotic mean of `√N(λ_k − θ_k)`,
//! * `V = V⁽⁰¹⁰⁾ + V⁽¹²⁰⁾` is the covariance of the universal part `Φ`,
//! * `W` is the covariance between `Φ` and the nonuniversal part `Θ`,
//!
//! where `Θ_k = 2√N θ′_k ψ_kᵀ Σ^{1/2} X Sᵀ ψ_k` is linear in the noise and has an
//! exact characteristic function ([`theta_component_cf`]).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::math;
use crate::noise::NoiseLaw;
use crate::spectra::CovarianceModel;
use crate::stats::NeumaierSum;
use crate::stieltjes::SelfConsistent;

pub const MAX_RANK: usize = 64;
const ORTHONORMAL_TOLERANCE: f64 = 1e-10;
const RANK_TOLERANCE: f64 = 1e-10;

/// `S = U D Vᵀ` with `U: M × K`, `V: N × K` column-orthonormal and `d₁ ≥ … ≥ d_K > 0`.
#[derive(Debug, Clone)]
pub struct SignalModel {
    u: DMatrix<f64>,
    d: Vec<f64>,
    v: DMatrix<f64>,
}

impl SignalModel {
    pub fn from_factors(u: DMatrix<f64>, d: Vec<f64>, v: DMatrix<f64>) -> Result<Self> {
        let k = d.len();
        if k == 0 {
            return Err(Error::RankZeroSignal);
        }
        if k > MAX_RANK {
            return Err(Error::RankTooLarge { rank: k, max: MAX_RANK });
        }
        if u.ncols() != k {
            return Err(Error::DimensionMismatch { what: "columns of U", expected: k, found: u.ncols() });
        }
        if v.ncols() != k {
            return Err(Error::DimensionMismatch { what: "columns of V", expected: k, found: v.ncols() });
        }
        if d.iter().any(|&x| !(x > 0.0) || !x.is_finite()) || d.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput("singular values must be positive and non-increasing".into()));
        }
        for (name, q) in [("U", &u), ("V", &v)] {
            let defect = linalg::orthonormality_defect(q);
            if defect > ORTHONORMAL_TOLERANCE {
                return Err(Error::InvalidInput(alloc::format!(
                    "{name} is not column-orthonormal (defect {defect:e})"
                )));
            }
        }
        Ok(Self { u, d, v })
    }

    /// Rank-`K` SVD of a dense `M × N` matrix; singular values below
    /// `10⁻¹⁰·d₁` are dropped.
    pub fn from_dense(s: &DMatrix<f64>) -> Result<Self> {
        let svd = s.clone().svd(true, true);
        let (u_full, vt_full) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
        let sv = svd.singular_values;
        let mut order: Vec<usize> = (0..sv.len()).collect();
        order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
        let top = order.first().map_or(0.0, |&i| sv[i]);
        if !(top > 0.0) {
            return Err(Error::RankZeroSignal);
        }
        let keep: Vec<usize> = order.into_iter().filter(|&i| sv[i] > RANK_TOLERANCE * top).collect();
        let (m, n, k) = (s.nrows(), s.ncols(), keep.len());
        if k > MAX_RANK {
            return Err(Error::RankTooLarge { rank: k, max: MAX_RANK });
        }
        let mut u = DMatrix::zeros(m, k);
        let mut v = DMatrix::zeros(n, k);
        let mut d = Vec::with_capacity(k);
        for (dst, &src) in keep.iter().enumerate() {
            let mut uc = linalg::column(&u_full, src);
            let mut vc: Vec<f64> = vt_full.row(src).iter().copied().collect();
            let before = uc.clone();
            linalg::fix_sign(&mut uc);
            if uc != before {
                vc.iter_mut().for_each(|x| *x = -*x);
            }
            u.column_mut(dst).copy_from_slice(&uc);
            v.column_mut(dst).copy_from_slice(&vc);
            d.push(sv[src]);
        }
        Self::from_factors(u, d, v)
    }

    /// `S = d e₁e₁ᵀ`.
    pub fn localized(m: usize, n: usize, d: f64) -> Result<Self> {
        let mut u = DMatrix::zeros(m, 1);
        let mut v = DMatrix::zeros(n, 1);
        u[(0, 0)] = 1.0;
        v[(0, 0)] = 1.0;
        Self::from_factors(u, vec![d], v)
    }

    pub fn rank(&self) -> usize {
        self.d.len()
    }

    pub fn m(&self) -> usize {
        self.u.nrows()
    }

    pub fn n(&self) -> usize {
        self.v.nrows()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let mut ud = self.u.clone();
        for (j, &dj) in self.d.iter().enumerate() {
            ud.column_mut(j).scale_mut(dj);
        }
        ud * self.v.transpose()
    }

    /// `Sᵀx`.
    pub fn transpose_apply(&self, x: &[f64]) -> Vec<f64> {
        let mut coeff = self.u.tr_mul(&linalg::to_dvector(x));
        for (c, &dj) in coeff.iter_mut().zip(&self.d) {
            *c *= dj;
        }
        (&self.v * coeff).iter().copied().collect()
    }

    /// `U D² Uᵀ`.
    pub fn outer_gram(&self) -> DMatrix<f64> {
        let mut ud = self.u.clone();
        for (j, &dj) in self.d.iter().enumerate() {
            ud.column_mut(j).scale_mut(dj * dj);
        }
        ud * self.u.transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Advisory {
    /// Spike above the threshold but within `2τ` of it; excluded from `K₀`.
    MarginalSpike {
        index: usize,
        sigma_tilde: f64,
    },
    /// `σ̃_k − σ̃_{k+1} < τ`.
    SmallGap {
        index: usize,
        gap: f64,
    },
    NoSupercriticalSpike,
}

#[derive(Debug, Clone)]
pub struct DeformedPopulation {
    /// Top `K + 1` eigenvalues of `Σ̃` (fewer if `M ≤ K`).
    pub sigma_tilde: Vec<f64>,
    /// Matching eigenvectors, sign-fixed.
    pub psi: DMatrix<f64>,
    /// All eigenvalues of `Σ̃`, descending.
    pub spectrum: Vec<f64>,
    pub threshold: f64,
    pub k0: usize,
    pub gaps: Vec<f64>,
    pub tau: f64,
    pub advisories: Vec<Advisory>,
    pub sc: SelfConsistent,
    pub n: usize,
}

impl DeformedPopulation {
    pub fn psi_col(&self, k: usize) -> Vec<f64> {
        linalg::column(&self.psi, k)
    }

    pub fn phi(&self) -> f64 {
        self.sc.phi
    }
}

pub fn deform(sigma: &CovarianceModel, signal: &SignalModel, tau: f64) -> Result<DeformedPopulation> {
    let m = sigma.dim();
    if signal.m() != m {
        return Err(Error::DimensionMismatch { what: "rows of S", expected: m, found: signal.m() });
    }
    let n = signal.n();
    let sc = SelfConsistent::new(sigma.esd(), m as f64 / n as f64)?;
    let tilde = sigma.matrix().into_owned() + signal.outer_gram();
    let tilde = (&tilde + tilde.transpose()) * 0.5;
    let eig = linalg::sym_eigen_desc(tilde);
    let k = signal.rank();
    let keep = (k + 1).min(m);
    let sigma_tilde: Vec<f64> = eig.values[..keep].to_vec();
    let psi = eig.vectors.columns(0, keep).into_owned();
    let threshold = sc.threshold();
    let cut = threshold + 2.0 * tau;
    let k0 = sigma_tilde.iter().take(k).take_while(|&&s| s >= cut).count();
    let gaps: Vec<f64> = sigma_tilde.windows(2).map(|w| w[0] - w[1]).collect();
    let mut advisories = Vec::new();
    for (i, &s) in sigma_tilde.iter().take(k).enumerate() {
        if s > threshold && s < cut {
            advisories.push(Advisory::MarginalSpike { index: i, sigma_tilde: s });
        }
    }
    for (i, &g) in gaps.iter().take(k0).enumerate() {
        if g < tau {
            advisories.push(Advisory::SmallGap { index: i, gap: g });
        }
    }
    if k0 == 0 {
        advisories.push(Advisory::NoSupercriticalSpike);
    }
    Ok(DeformedPopulation { sigma_tilde, psi, spectrum: eig.values, threshold, k0, gaps, tau, advisories, sc, n })
}

/// `𝕄_{p₁…pₙ}(a₁…aₙ) = Σ_t Π_j (a_j)_t^{p_j}` with compensated summation.
pub fn mixed_moment(vectors: &[&[f64]], powers: &[u32]) -> Result<f64> {
    if vectors.len() != powers.len() {
        return Err(Error::DimensionMismatch {
            what: "mixed-moment powers",
            expected: vectors.len(),
            found: powers.len(),
        });
    }
    if powers.contains(&0) {
        return Err(Error::InvalidInput("mixed-moment powers must be positive".into()));
    }
    let len = vectors.first().map_or(0, |v| v.len());
    if let Some(bad) = vectors.iter().find(|v| v.len() != len) {
        return Err(Error::DimensionMismatch { what: "mixed-moment vectors", expected: len, found: bad.len() });
    }
    let mut acc = NeumaierSum::default();
    for t in 0..len {
        let mut term = 1.0;
        for (v, &p) in vectors.iter().zip(powers) {
            for _ in 0..p {
                term *= v[t];
            }
        }
        acc.add(term);
    }
    Ok(acc.total())
}

fn m22(a: &[f64], b: &[f64]) -> f64 {
    mixed_moment(&[a, b], &[2, 2]).expect("equal lengths")
}

fn m21(a: &[f64], b: &[f64]) -> f64 {
    mixed_moment(&[a, b], &[2, 1]).expect("equal lengths")
}

/// Per-spike deterministic data.
#[derive(Debug, Clone, Serialize)]
pub struct Spike {
    pub sigma_tilde: f64,
    pub theta: f64,
    pub theta_prime: f64,
    /// `m(θ_k) = −1/σ̃_k`.
    pub m_theta: f64,
    pub psi: Vec<f64>,
    /// Diagonal of `Σ(σ̃_k − Σ)⁻¹`.
    pub pi_tilde: Vec<f64>,
    pub sqrt_sigma_psi: Vec<f64>,
    pub s_top_psi: Vec<f64>,
    /// `√θ_k (I + m(θ_k)Σ) ψ_k`.
    pub u: Vec<f64>,
    /// `Sᵀψ_k`.
    pub v: Vec<f64>,
    /// Null vector of `A_Π(θ_k)`, length `2K`.
    pub xi: Vec<f64>,
    pub l: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpikeTheory {
    pub spikes: Vec<Spike>,
    pub v010: Vec<Vec<f64>>,
    pub v120: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub kappa3: f64,
    pub kappa4: f64,
    pub n: usize,
    pub phi: f64,
}

impl SpikeTheory {
    pub fn k0(&self) -> usize {
        self.spikes.len()
    }

    /// `Σ s_k s_j V_kj`.
    pub fn v_form(&self, s: &[f64]) -> f64 {
        quad(&self.v, s, s)
    }

    /// `Σ s_k t_j W_kj`.
    pub fn w_form(&self, s: &[f64], t: &[f64]) -> f64 {
        quad(&self.w, s, t)
    }

    /// `Var Θ_k = 4θ′_k² ‖Σ^{1/2}ψ_k‖² ‖Sᵀψ_k‖²`.
    pub fn theta_variance(&self, k: usize) -> f64 {
        let sp = &self.spikes[k];
        let a = linalg::dot(&sp.sqrt_sigma_psi, &sp.sqrt_sigma_psi);
        let b = linalg::dot(&sp.s_top_psi, &sp.s_top_psi);
        4.0 * sp.theta_prime * sp.theta_prime * a * b
    }
}

fn quad(a: &[Vec<f64>], s: &[f64], t: &[f64]) -> f64 {
    let mut acc = NeumaierSum::default();
    for (k, row) in a.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            acc.add(s.get(k).copied().unwrap_or(0.0) * t.get(j).copied().unwrap_or(0.0) * x);
        }
    }
    acc.total()
}

pub fn asymptotic_quantities(
    sigma: &CovarianceModel,
    signal: &SignalModel,
    pop: &DeformedPopulation,
    law: &NoiseLaw,
) -> Result<SpikeTheory> {
    let k0 = pop.k0;
    if k0 == 0 {
        return Err(Error::NoSupercriticalSpikes);
    }
    let n = pop.n;
    let nf = n as f64;
    let (k3, k4) = (law.kappa3(), law.kappa4());
    let mut spikes = Vec::with_capacity(k0);
    for k in 0..k0 {
        let st = pop.sigma_tilde[k];
        let (theta, theta_prime) = pop.sc.theta(st)?;
        let m_theta = -1.0 / st;
        let psi = pop.psi_col(k);
        let pi_tilde = sigma.resolvent_diagonal(st)?;
        let sqrt_sigma_psi = sigma.apply_sqrt(&psi);
        let s_top_psi = signal.transpose_apply(&psi);
        let sigma_psi = sigma.apply(&psi);
        let rt = math::sqrt(theta);
        let u: Vec<f64> = psi.iter().zip(&sigma_psi).map(|(p, sp)| rt * (p + m_theta * sp)).collect();
        let ut_psi = signal.u().tr_mul(&linalg::to_dvector(&psi));
        let kk = signal.rank();
        let mut xi = vec![0.0; 2 * kk];
        for (j, &dj) in signal.d().iter().enumerate() {
            xi[j] = -rt * m_theta * dj * dj * ut_psi[j];
            xi[kk + j] = dj * ut_psi[j];
        }
        let l = 2.0 * k3 * theta_prime / nf * linalg::dot(&pi_tilde, &sqrt_sigma_psi) * s_top_psi.iter().sum::<f64>();
        spikes.push(Spike {
            sigma_tilde: st,
            theta,
            theta_prime,
            m_theta,
            psi,
            pi_tilde,
            sqrt_sigma_psi,
            v: s_top_psi.clone(),
            s_top_psi,
            u,
            xi,
            l,
        });
    }

    let mut v010 = vec![vec![0.0; k0]; k0];
    let mut v120 = vec![vec![0.0; k0]; k0];
    let mut w = vec![vec![0.0; k0]; k0];
    let sigma_psi: Vec<Vec<f64>> = spikes.iter().map(|s| sigma.apply(&s.psi)).collect();
    for k in 0..k0 {
        for j in 0..k0 {
            let (a, b) = (&spikes[k], &spikes[j]);
            let cross = linalg::dot(&a.psi, &sigma_psi[j]);
            v010[k][j] = if k == j {
                let (tp, st) = (a.theta_prime, a.sigma_tilde);
                2.0 * tp * tp * cross * cross + 2.0 * st * st * tp - 2.0 * st * st * tp * tp
            } else {
                2.0 * a.theta_prime * b.theta_prime * cross * cross
            };
            v120[k][j] = k4 * a.theta_prime * b.theta_prime / nf
                * (nf * m22(&a.sqrt_sigma_psi, &b.sqrt_sigma_psi)
                    + linalg::dot(&a.pi_tilde, &b.pi_tilde) * m22(&a.s_top_psi, &b.s_top_psi));
            w[k][j] = 2.0 * k3 * a.theta_prime * b.theta_prime / math::sqrt(nf)
                * (b.s_top_psi.iter().sum::<f64>() * m21(&a.sqrt_sigma_psi, &b.sqrt_sigma_psi)
                    + linalg::dot(&a.pi_tilde, &b.sqrt_sigma_psi) * m21(&a.s_top_psi, &b.s_top_psi));
        }
    }
    // the formula is symmetric; make the stored matrix exactly so
    for k in 0..k0 {
        for j in (k + 1)..k0 {
            for mat in [&mut v010, &mut v120] {
                let avg = 0.5 * (mat[k][j] + mat[j][k]);
                mat[k][j] = avg;
                mat[j][k] = avg;
            }
        }
    }
    let v = (0..k0).map(|k| (0..k0).map(|j| v010[k][j] + v120[k][j]).collect()).collect();
    Ok(SpikeTheory { spikes, v010, v120, v, w, kappa3: k3, kappa4: k4, n, phi: pop.phi() })
}

/// Largest discrepancy between the general path and the closed forms valid
/// for `Σ = I`, per quantity.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReductionReport {
    pub theta: f64,
    pub theta_prime: f64,
    pub l: f64,
    pub v010: f64,
    pub v120: f64,
    pub w: f64,
}

impl ReductionReport {
    pub fn max(&self) -> f64 {
        [self.theta, self.theta_prime, self.l, self.v010, self.v120, self.w].into_iter().fold(0.0, f64::max)
    }
}

pub fn identity_reduction_check(
    sigma: &CovarianceModel,
    signal: &SignalModel,
    theory: &SpikeTheory,
) -> Result<ReductionReport> {
    if !sigma.is_identity() {
        return Err(Error::NotIdentity);
    }
    let k0 = theory.k0();
    let mut rep = ReductionReport::default();
    if k0 == 0 {
        return Ok(rep);
    }
    let (n, m) = (signal.n() as f64, signal.m() as f64);
    let phi = m / n;
    let (k3, k4) = (theory.kappa3, theory.kappa4);
    let us: Vec<Vec<f64>> = (0..k0).map(|k| linalg::column(signal.u(), k)).collect();
    let vs: Vec<Vec<f64>> = (0..k0).map(|k| linalg::column(signal.v(), k)).collect();
    let d = signal.d();
    let tp: Vec<f64> = (0..k0).map(|k| 1.0 - phi / (d[k] * d[k] * d[k] * d[k])).collect();
    let diff = |a: f64, b: f64| (a - b).abs();
    for k in 0..k0 {
        let dk2 = d[k] * d[k];
        let theta = 1.0 + dk2 + phi * (1.0 + 1.0 / dk2);
        rep.theta = rep.theta.max(diff(theta, theory.spikes[k].theta));
        rep.theta_prime = rep.theta_prime.max(diff(tp[k], theory.spikes[k].theta_prime));
        let l = 2.0 * k3 * tp[k] / (n * d[k]) * us[k].iter().sum::<f64>() * vs[k].iter().sum::<f64>();
        rep.l = rep.l.max(diff(l, theory.spikes[k].l));
        for j in 0..k0 {
            let v010 = if k == j { 2.0 * tp[k] * (1.0 + phi + 2.0 * phi / dk2) } else { 0.0 };
            rep.v010 = rep.v010.max(diff(v010, theory.v010[k][j]));
            let v120 = k4 * tp[k] * tp[j] / n * (n * m22(&us[k], &us[j]) + m * m22(&vs[k], &vs[j]));
            rep.v120 = rep.v120.max(diff(v120, theory.v120[k][j]));
            let w = 2.0 * k3 * tp[k] * tp[j] * d[j] / math::sqrt(n)
                * (vs[j].iter().sum::<f64>() * m21(&us[k], &us[j]) + us[j].iter().sum::<f64>() * m21(&vs[k], &vs[j]));
            rep.w = rep.w.max(diff(w, theory.w[k][j]));
        }
    }
    Ok(rep)
}

/// `E exp(i Σ_k t_k Θ_k)`, exactly, as `Π_{iμ} φ_w(c_{iμ})` with
/// `c_{iμ} = Σ_k t_k 2θ′_k (Σ^{1/2}ψ_k)_i (Sᵀψ_k)_μ`.
pub fn theta_component_cf(t: &[f64], theory: &SpikeTheory, law: &NoiseLaw) -> Complex64 {
    let active: Vec<(f64, &Spike)> = theory
        .spikes
        .iter()
        .zip(t)
        .filter(|(_, &tk)| tk != 0.0)
        .map(|(s, &tk)| (2.0 * tk * s.theta_prime, s))
        .collect();
    if active.is_empty() {
        return Complex64::new(1.0, 0.0);
    }
    let (m, n) = (active[0].1.sqrt_sigma_psi.len(), active[0].1.s_top_psi.len());
    let mut acc = Complex64::new(1.0, 0.0);
    for i in 0..m {
        if active.iter().all(|(_, s)| s.sqrt_sigma_psi[i] == 0.0) {
            continue;
        }
        for mu in 0..n {
            let c: f64 = active.iter().map(|(c, s)| c * s.sqrt_sigma_psi[i] * s.s_top_psi[mu]).sum();
            if c != 0.0 {
                acc *= law.cf(c);
            }
        }
    }
    acc
}

/// `(‖Σ^{1/2}ψ_k‖_∞, ‖Sᵀψ_k‖_∞)` per spike.
pub fn delocalization_profile(theory: &SpikeTheory) -> Vec<(f64, f64)> {
    theory.spikes.iter().map(|s| (linalg::sup_norm(&s.sqrt_sigma_psi), linalg::sup_norm(&s.s_top_psi))).collect()
}

/// Human-readable summary of [`Advisory`] entries.
pub fn describe(advisory: &Advisory) -> String {
    match advisory {
        Advisory::MarginalSpike { index, sigma_tilde } => {
            alloc::format!("spike {} (σ̃ = {sigma_tilde}) lies within 2τ of the threshold and is excluded", index + 1)
        }
        Advisory::SmallGap { index, gap } => alloc::format!("gap after spike {} is {gap}, below τ", index + 1),
        Advisory::NoSupercriticalSpike => "no supercritical spike".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseKind;
    use crate::spectra::CovarianceRecipe;
    use proptest::prelude::*;

    fn identity(m: usize) -> CovarianceModel {
        CovarianceModel::new(CovarianceRecipe::Identity, m).unwrap()
    }

    fn random_orthonormal(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = crate::rng::stream(seed);
        let q = crate::spectra::haar_orthogonal(rows, &mut rng);
        q.columns(0, cols).into_owned()
    }

    #[test]
    fn mixed_moment_examples() {
        assert_eq!(mixed_moment(&[&[1.0, 1.0], &[1.0, 1.0]], &[1, 1]).unwrap(), 2.0);
        assert_eq!(mixed_moment(&[&[1.0, 0.0], &[1.0, 0.0]], &[2, 2]).unwrap(), 1.0);
        assert_eq!(mixed_moment(&[&[1.0, 2.0], &[3.0, 4.0]], &[2, 1]).unwrap(), 19.0);
        assert!(mixed_moment(&[&[1.0], &[1.0, 2.0]], &[1, 1]).is_err());
    }

    #[test]
    fn localized_deform() {
        let d2: f64 = 5.25;
        let s = SignalModel::localized(200, 400, d2.sqrt()).unwrap();
        let pop = deform(&identity(200), &s, 0.1).unwrap();
        assert!((pop.sigma_tilde[0] - 6.25).abs() < 1e-12);
        assert!((pop.psi[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((pop.threshold - (1.0 + 0.5f64.sqrt())).abs() < 1e-10);
        assert_eq!(pop.k0, 1);
    }

    #[test]
    fn spike_exactly_at_threshold_is_excluded() {
        let phi: f64 = 0.5;
        let s = SignalModel::localized(50, 100, phi.powf(0.25)).unwrap();
        let pop = deform(&identity(50), &s, 1e-6).unwrap();
        assert_eq!(pop.k0, 0);
        assert!(pop.advisories.contains(&Advisory::NoSupercriticalSpike));
    }

    #[test]
    fn dense_zero_signal_is_rejected() {
        assert!(matches!(SignalModel::from_dense(&DMatrix::zeros(4, 6)), Err(Error::RankZeroSignal)));
    }

    #[test]
    fn localized_gaussian_and_uniform_variances() {
        let d2: f64 = 5.25;
        let phi = 0.5;
        let s = SignalModel::localized(200, 400, d2.sqrt()).unwrap();
        let sigma = identity(200);
        let pop = deform(&sigma, &s, 0.1).unwrap();
        let tp = 1.0 - phi / (d2 * d2);
        let g = asymptotic_quantities(&sigma, &s, &pop, &NoiseLaw::gaussian()).unwrap();
        assert_eq!(g.spikes[0].l, 0.0);
        assert_eq!(g.w[0][0], 0.0);
        assert!((g.v[0][0] - 2.0 * tp * (1.0 + phi + 2.0 * phi / d2)).abs() < 1e-12);
        let uni = asymptotic_quantities(&sigma, &s, &pop, &NoiseLaw::new(NoiseKind::UniformSym).unwrap()).unwrap();
        let extra = -1.2 * tp * tp * (1.0 + phi);
        assert!((uni.v[0][0] - g.v[0][0] - extra).abs() < 1e-12);
        assert!((g.theta_variance(0) - 4.0 * tp * tp * d2).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_spikes_have_no_cross_v010() {
        let u = random_orthonormal(40, 2, 3);
        let v = random_orthonormal(80, 2, 4);
        let s = SignalModel::from_factors(u, vec![3.0, 2.0], v).unwrap();
        let sigma = identity(40);
        let pop = deform(&sigma, &s, 0.05).unwrap();
        let th = asymptotic_quantities(&sigma, &s, &pop, &NoiseLaw::gaussian()).unwrap();
        assert!(th.v010[0][1].abs() < 1e-20);
    }

    #[test]
    fn reduction_with_skewed_law() {
        let u = random_orthonormal(60, 3, 10);
        let v = random_orthonormal(120, 3, 11);
        let s = SignalModel::from_factors(u, vec![3.0, 2.5, 2.0], v).unwrap();
        let sigma = identity(60);
        let pop = deform(&sigma, &s, 0.05).unwrap();
        assert_eq!(pop.k0, 3);
        let law = NoiseLaw::new(NoiseKind::ShiftedExponential).unwrap();
        let th = asymptotic_quantities(&sigma, &s, &pop, &law).unwrap();
        let rep = identity_reduction_check(&sigma, &s, &th).unwrap();
        assert!(rep.max() <= 1e-10, "{rep:?}");
        assert!(th.w[0][0] != 0.0 && th.v120[0][0] != 0.0);
    }

    #[test]
    fn theta_cf_cases() {
        let d: f64 = 5.25f64.sqrt();
        let s = SignalModel::localized(20, 40, d).unwrap();
        let sigma = identity(20);
        let pop = deform(&sigma, &s, 0.01).unwrap();
        let three = NoiseLaw::new(NoiseKind::ThreePoint).unwrap();
        let th = asymptotic_quantities(&sigma, &s, &pop, &three).unwrap();
        assert_eq!(theta_component_cf(&[0.0], &th, &three), Complex64::new(1.0, 0.0));
        let c = 2.0 * th.spikes[0].theta_prime * d;
        let want = 2.0 / 3.0 + (3f64.sqrt() * c).cos() / 3.0;
        let got = theta_component_cf(&[1.0], &th, &three);
        assert!((got.re - want).abs() < 1e-14 && got.im.abs() < 1e-14);
        let gauss = NoiseLaw::gaussian();
        let g = theta_component_cf(&[0.7], &th, &gauss);
        assert!((g.re - (-0.5 * 0.49 * th.theta_variance(0)).exp()).abs() < 1e-13);
    }

    #[test]
    fn delocalization_of_localized_signal() {
        let d: f64 = 5.25f64.sqrt();
        let s = SignalModel::localized(20, 40, d).unwrap();
        let sigma = identity(20);
        let pop = deform(&sigma, &s, 0.01).unwrap();
        let th = asymptotic_quantities(&sigma, &s, &pop, &NoiseLaw::gaussian()).unwrap();
        let p = delocalization_profile(&th);
        assert!((p[0].0 - 1.0).abs() < 1e-12 && (p[0].1 - d).abs() < 1e-12);
    }

    fn build(seed: u64, recipe: CovarianceRecipe) -> (CovarianceModel, SignalModel, DeformedPopulation) {
        let (m, n) = (30, 60);
        let u = random_orthonormal(m, 2, seed);
        let v = random_orthonormal(n, 2, seed + 1);
        let s = SignalModel::from_factors(u, vec![3.0, 2.2], v).unwrap();
        let sigma = CovarianceModel::new(recipe, m).unwrap();
        let pop = deform(&sigma, &s, 0.05).unwrap();
        (sigma, s, pop)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn structural_identities(seed in 0u64..1000, rho in 0.0f64..0.4) {
            let (sigma, s, pop) = build(seed, CovarianceRecipe::Toeplitz { rho });
            prop_assume!(pop.k0 >= 1);
            let law = NoiseLaw::new(NoiseKind::ShiftedExponential).unwrap();
            let th = asymptotic_quantities(&sigma, &s, &pop, &law).unwrap();
            let full = sigma.matrix().into_owned() + s.outer_gram();
            for (k, sp) in th.spikes.iter().enumerate() {
                // eigen-residual
                let r = &full * linalg::to_dvector(&sp.psi) - linalg::to_dvector(&sp.psi) * sp.sigma_tilde;
                prop_assert!(r.amax() <= 1e-8 * pop.sigma_tilde[0]);
                // m(θ_k) = −1/σ̃_k
                let m = pop.sc.m(sp.theta).unwrap();
                prop_assert!((m + 1.0 / sp.sigma_tilde).abs() <= 1e-10);
                for (j, sq) in th.spikes.iter().enumerate() {
                    let lhs = linalg::dot(&sp.s_top_psi, &sq.s_top_psi);
                    let rhs = if k == j { sp.sigma_tilde } else { 0.0 } - linalg::dot(&sp.psi, &sigma.apply(&sq.psi));
                    prop_assert!((lhs - rhs).abs() <= 1e-8);
                }
            }
            // interlacing on the full spectrum
            let kk = s.rank();
            let pop_eigs = sigma.eigenvalues();
            for i in 0..pop.spectrum.len() {
                prop_assert!(pop.spectrum[i] >= pop_eigs[i] - 1e-10);
                if i >= kk {
                    prop_assert!(pop.spectrum[i] <= pop_eigs[i - kk] + 1e-10);
                }
            }
            for k in 0..th.k0() {
                for j in 0..th.k0() {
                    prop_assert_eq!(th.v[k][j], th.v[j][k]);
                }
                prop_assert!(th.v[k][k] > 0.0);
            }
        }

        #[test]
        fn sign_flip_invariance(seed in 0u64..1000) {
            let (sigma, s, mut pop) = build(seed, CovarianceRecipe::HaarRotated { a: 1.0, b: 1.5, seed });
            prop_assume!(pop.k0 >= 1);
            let law = NoiseLaw::new(NoiseKind::ShiftedExponential).unwrap();
            let a = asymptotic_quantities(&sigma, &s, &pop, &law).unwrap();
            pop.psi.column_mut(0).neg_mut();
            let b = asymptotic_quantities(&sigma, &s, &pop, &law).unwrap();
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * (1.0 + x.abs());
            prop_assert!(close(a.spikes[0].l, b.spikes[0].l));
            for k in 0..a.k0() {
                for j in 0..a.k0() {
                    prop_assert!(close(a.v[k][j], b.v[k][j]));
                    prop_assert!(close(a.w[k][j], b.w[k][j]));
                }
            }
            let t = vec![0.3; a.k0()];
            let (ca, cb) = (theta_component_cf(&t, &a, &law), theta_component_cf(&t, &b, &law));
            prop_assert!((ca - cb).norm() <= 1e-12);
            prop_assert_eq!(delocalization_profile(&a), delocalization_profile(&b));
        }

        #[test]
        fn zero_cumulants_null_terms(seed in 0u64..1000) {
            let (sigma, s, pop) = build(seed, CovarianceRecipe::Toeplitz { rho: 0.2 });
            prop_assume!(pop.k0 >= 1);
            for kind in [NoiseKind::Gaussian, NoiseKind::ThreePoint, NoiseKind::FourPoint] {
                let th = asymptotic_quantities(&sigma, &s, &pop, &NoiseLaw::new(kind).unwrap()).unwrap();
                for k in 0..th.k0() {
                    prop_assert_eq!(th.spikes[k].l, 0.0);
                    for j in 0..th.k0() {
                        prop_assert_eq!(th.w[k][j], 0.0);
                        prop_assert_eq!(th.v120[k][j], 0.0);
                    }
                }
            }
        }
    }
}
