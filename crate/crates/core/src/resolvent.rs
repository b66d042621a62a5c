//! Resolvents of the linearized matrix and their deterministic equivalents.
//!
//! For `Y = Σ^{1/2}X` (`M × N`) and real `z > λ₊`,
//!
//! ```text
//! H(z) = [ 0      √z Y ]      G(z) = (H(z) − z)⁻¹ = [ G_M           z^{-1/2} G_M Y ]
//!        [ √z Yᵀ  0    ]                            [ z^{-1/2} Yᵀ G_M     G_N      ]
//! ```
//!
//! with `G_M = (YYᵀ − z)⁻¹` and `G_N = (YᵀY − z)⁻¹`. Its deterministic
//! equivalent is `Π = diag(−z⁻¹(I + mΣ)⁻¹, m I)`.
//!
//! `G` is never formed densely on the hot path: one eigendecomposition of
//! `YYᵀ` per sample gives `G(z)` applied to any vector for every `z`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::math;
use crate::spectra::CovarianceModel;
use crate::spikes::{SignalModel, SpikeTheory};
use crate::stieltjes::SelfConsistent;

/// Minimum distance of real spectral parameters from `λ₊`.
pub const EDGE_MARGIN: f64 = 0.05;
/// Samples with `‖G(z)‖` above this are skipped.
pub const CONDITIONING_GUARD: f64 = 1e3;

/// Eigendecomposition of `Q = YYᵀ` for one sample `Y`.
#[derive(Debug, Clone)]
pub struct SampleSpectrum {
    y: DMatrix<f64>,
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

impl SampleSpectrum {
    pub fn new(y: DMatrix<f64>) -> Self {
        let eig = linalg::sym_eigen_desc(&y * y.transpose());
        Self { y, values: eig.values, vectors: eig.vectors }
    }

    pub fn m(&self) -> usize {
        self.y.nrows()
    }

    pub fn n(&self) -> usize {
        self.y.ncols()
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    /// Eigenvalues of `YYᵀ`, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    /// `G_M(z) a`.
    pub fn g_m_apply(&self, z: f64, a: &DVector<f64>) -> DVector<f64> {
        let mut coords = self.vectors.tr_mul(a);
        for (c, &l) in coords.iter_mut().zip(&self.values) {
            *c /= l - z;
        }
        &self.vectors * coords
    }

    /// `G(z) x` for `x ∈ ℝ^{M+N}`.
    pub fn g_apply(&self, z: f64, x: &[f64]) -> Vec<f64> {
        let (m, n) = (self.m(), self.n());
        let rz = math::sqrt(z);
        let a = DVector::from_column_slice(&x[..m]);
        let b = DVector::from_column_slice(&x[m..m + n]);
        let c = a + (&self.y * &b) / rz;
        let g = self.g_m_apply(z, &c);
        let bottom = self.y.tr_mul(&g) / rz - b / z;
        g.iter().chain(bottom.iter()).copied().collect()
    }

    /// `‖G(z)‖` for real `z` off the spectrum; `H` has eigenvalues `±√(zλ_i)`
    /// and `0` (when `M ≠ N`).
    pub fn g_norm(&self, z: f64) -> f64 {
        let rz = math::sqrt(z);
        let mut worst: f64 = if self.m() != self.n() { 1.0 / z } else { 0.0 };
        for &l in &self.values {
            let s = rz * math::sqrt(l.max(0.0));
            worst = worst.max(1.0 / (s - z).abs()).max(1.0 / (s + z).abs());
        }
        worst
    }

    /// Dense `G_M(z)`.
    pub fn g_m(&self, z: f64) -> DMatrix<f64> {
        linalg::spectral_matrix(&self.values, &self.vectors, |l| 1.0 / (l - z))
    }

    /// Dense `G_N(z) = z⁻¹(Yᵀ G_M Y − I)`.
    pub fn g_n(&self, z: f64) -> DMatrix<f64> {
        let n = self.n();
        (self.y.transpose() * self.g_m(z) * &self.y - DMatrix::identity(n, n)) / z
    }

    /// Dense `G(z)`.
    pub fn g_dense(&self, z: f64) -> DMatrix<f64> {
        let (m, n) = (self.m(), self.n());
        let gm = self.g_m(z);
        let off = &gm * &self.y / math::sqrt(z);
        let gn = self.g_n(z);
        let mut g = DMatrix::zeros(m + n, m + n);
        g.view_mut((0, 0), (m, m)).copy_from(&gm);
        g.view_mut((0, m), (m, n)).copy_from(&off);
        g.view_mut((m, 0), (n, m)).copy_from(&off.transpose());
        g.view_mut((m, m), (n, n)).copy_from(&gn);
        g
    }

    /// Dense `H(z)`.
    pub fn h_dense(&self, z: f64) -> DMatrix<f64> {
        let (m, n) = (self.m(), self.n());
        let mut h = DMatrix::zeros(m + n, m + n);
        let s = &self.y * math::sqrt(z);
        h.view_mut((0, m), (m, n)).copy_from(&s);
        h.view_mut((m, 0), (n, m)).copy_from(&s.transpose());
        h
    }
}

/// `Π(z)` and its derivatives; depends on the population only.
#[derive(Debug, Clone)]
pub struct DeterministicEquivalent<'a> {
    pub sigma: &'a CovarianceModel,
    pub z: f64,
    pub m: f64,
    pub m_prime: f64,
    pub n: usize,
}

impl<'a> DeterministicEquivalent<'a> {
    pub fn new(sigma: &'a CovarianceModel, sc: &SelfConsistent, n: usize, z: f64) -> Result<Self> {
        let bound = sc.edge.lambda_plus + EDGE_MARGIN;
        if !(z >= bound) {
            return Err(Error::OutsideDomain { z, bound });
        }
        Ok(Self { sigma, z, m: sc.m(z)?, m_prime: sc.m_prime(z)?, n })
    }

    fn dim(&self) -> usize {
        self.sigma.dim()
    }

    /// `Π_M a = −z⁻¹(I + mΣ)⁻¹ a`.
    pub fn pi_m_apply(&self, a: &[f64]) -> Vec<f64> {
        let (z, m) = (self.z, self.m);
        self.sigma.apply_fn(a, |s| -1.0 / (z * (1.0 + m * s)))
    }

    /// `Π′_M a = z m′ Π_M Σ Π_M a − z⁻¹ Π_M a`.
    pub fn pi_m_prime_apply(&self, a: &[f64]) -> Vec<f64> {
        let (z, m, mp) = (self.z, self.m, self.m_prime);
        self.sigma.apply_fn(a, |s| {
            let p = -1.0 / (z * (1.0 + m * s));
            z * mp * p * s * p - p / z
        })
    }

    /// `Π_M Σ Π_M(z⋆) a` for a second parameter `z⋆` with Stieltjes value `m⋆`.
    pub fn pi_sigma_pi_apply(&self, other: &DeterministicEquivalent<'_>, a: &[f64]) -> Vec<f64> {
        let (z, m, zs, ms) = (self.z, self.m, other.z, other.m);
        self.sigma.apply_fn(a, |s| s / (z * (1.0 + m * s) * zs * (1.0 + ms * s)))
    }

    pub fn pi_apply(&self, x: &[f64]) -> Vec<f64> {
        let mm = self.dim();
        let mut out = self.pi_m_apply(&x[..mm]);
        out.extend(x[mm..].iter().map(|v| self.m * v));
        out
    }

    pub fn pi_prime_apply(&self, x: &[f64]) -> Vec<f64> {
        let mm = self.dim();
        let mut out = self.pi_m_prime_apply(&x[..mm]);
        out.extend(x[mm..].iter().map(|v| self.m_prime * v));
        out
    }

    /// `Π₂ = 2Π′ + z⁻¹Π`.
    pub fn pi2_apply(&self, x: &[f64]) -> Vec<f64> {
        let p = self.pi_apply(x);
        let dp = self.pi_prime_apply(x);
        dp.iter().zip(&p).map(|(d, v)| 2.0 * d + v / self.z).collect()
    }

    /// Residuals of `N⁻¹tr Π_MΣ = −(1 + zm)/(zm)` and `N⁻¹tr Π_N = m`.
    pub fn trace_identity_residuals(&self) -> (f64, f64) {
        let (z, m, n) = (self.z, self.m, self.n as f64);
        let mut acc = crate::stats::NeumaierSum::default();
        for &s in self.sigma.eigenvalues() {
            acc.add(-s / (z * (1.0 + m * s)));
        }
        let lhs = acc.total() / n;
        let rhs = -(1.0 + z * m) / (z * m);
        // tr Π_N / N = m exactly since Π_N = m I_N
        (((lhs - rhs) / rhs.abs().max(1.0)).abs(), 0.0)
    }
}

/// `G(z)` of one sample together with `Π(z)`.
#[derive(Debug, Clone)]
pub struct ResolventBundle<'a> {
    pub spectrum: &'a SampleSpectrum,
    pub pi: DeterministicEquivalent<'a>,
}

impl<'a> ResolventBundle<'a> {
    /// Fails outside the domain; `Ok(None)` when the sample trips the
    /// conditioning guard.
    pub fn new(
        spectrum: &'a SampleSpectrum,
        sigma: &'a CovarianceModel,
        sc: &SelfConsistent,
        z: f64,
    ) -> Result<Option<Self>> {
        if spectrum.m() != sigma.dim() {
            return Err(Error::DimensionMismatch { what: "rows of Y", expected: sigma.dim(), found: spectrum.m() });
        }
        let pi = DeterministicEquivalent::new(sigma, sc, spectrum.n(), z)?;
        if spectrum.g_norm(z) > CONDITIONING_GUARD {
            return Ok(None);
        }
        Ok(Some(Self { spectrum, pi }))
    }

    pub fn z(&self) -> f64 {
        self.pi.z
    }

    pub fn g_apply(&self, x: &[f64]) -> Vec<f64> {
        self.spectrum.g_apply(self.pi.z, x)
    }

    pub fn g_quad(&self, x: &[f64], y: &[f64]) -> f64 {
        linalg::dot(x, &self.g_apply(y))
    }

    pub fn pi_quad(&self, x: &[f64], y: &[f64]) -> f64 {
        linalg::dot(x, &self.pi.pi_apply(y))
    }

    /// `xᵀ(G − Π)y`.
    pub fn upsilon_quad(&self, x: &[f64], y: &[f64]) -> f64 {
        let g = self.g_apply(y);
        let p = self.pi.pi_apply(y);
        x.iter().zip(g.iter().zip(&p)).map(|(a, (b, c))| a * (b - c)).sum()
    }

    /// `|xᵀG²y − xᵀΠ₂y|`.
    pub fn g2_residual(&self, x: &[f64], y: &[f64]) -> f64 {
        let lhs = linalg::dot(&self.g_apply(x), &self.g_apply(y));
        (lhs - linalg::dot(x, &self.pi.pi2_apply(y))).abs()
    }

    /// `max_j |((H − z)G − I) e_j|_∞` over the given columns.
    pub fn identity_residual(&self, columns: &[usize]) -> f64 {
        let dim = self.spectrum.m() + self.spectrum.n();
        let h = self.spectrum.h_dense(self.pi.z);
        let mut worst = 0.0f64;
        for &j in columns {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            let g = DVector::from_vec(self.g_apply(&e));
            let r = &h * &g - &g * self.pi.z;
            for (i, v) in r.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }
}

/// `|xᵀ(G − Π)y|`.
pub fn isotropic_residual(bundle: &ResolventBundle<'_>, x: &[f64], y: &[f64]) -> f64 {
    bundle.upsilon_quad(x, y).abs()
}

/// Residuals of the six two-resolvent deterministic equivalents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TwoResolventResiduals {
    pub wm_uu: f64,
    pub wm_vv: f64,
    pub wm_uv: f64,
    pub wn_uu: f64,
    pub wn_vv: f64,
    pub wn_uv: f64,
}

impl TwoResolventResiduals {
    pub fn as_array(&self) -> [f64; 6] {
        [self.wm_uu, self.wm_vv, self.wm_uv, self.wn_uu, self.wn_vv, self.wn_uv]
    }

    pub const NAMES: [&'static str; 6] = ["wm_uu", "wm_vv", "wm_uv", "wn_uu", "wn_vv", "wn_uv"];
}

/// `W_M = G(z) Σ̲_M G(z⋆)` and `W_N = G(z) I̲_N G(z⋆)` against their
/// equivalents, for `u ∈ ℝ^M` and `v ∈ ℝ^N`; `divided` is `m[z, z⋆]`.
pub fn two_resolvent_residuals(
    a: &ResolventBundle<'_>,
    b: &ResolventBundle<'_>,
    divided: f64,
    u: &[f64],
    v: &[f64],
) -> TwoResolventResiduals {
    let (mm, n) = (a.spectrum.m(), a.spectrum.n());
    let sigma = a.pi.sigma;
    let embed_u: Vec<f64> = u.iter().copied().chain(core::iter::repeat_n(0.0, n)).collect();
    let embed_v: Vec<f64> = core::iter::repeat_n(0.0, mm).chain(v.iter().copied()).collect();
    let (gu, gv) = (a.g_apply(&embed_u), a.g_apply(&embed_v));
    let (gsu, gsv) = (b.g_apply(&embed_u), b.g_apply(&embed_v));
    let wm = |x: &[f64], y: &[f64]| linalg::dot(&x[..mm], &sigma.apply(&y[..mm]));
    let wn = |x: &[f64], y: &[f64]| linalg::dot(&x[mm..], &y[mm..]);

    let (z, zs, m, ms) = (a.pi.z, b.pi.z, a.pi.m, b.pi.m);
    let ratio = divided / (m * ms);
    let upsp = linalg::dot(u, &a.pi.pi_sigma_pi_apply(&b.pi, u));
    let vv = linalg::dot(v, v);
    let rzz = math::sqrt(z * zs);
    TwoResolventResiduals {
        wm_uu: (wm(&gu, &gsu) - ratio * upsp).abs(),
        wm_vv: (wm(&gv, &gsv) - (ratio - 1.0) / rzz * vv).abs(),
        wm_uv: wm(&gu, &gsv).abs(),
        wn_uu: (wn(&gu, &gsu) - rzz * divided * upsp).abs(),
        wn_vv: (wn(&gv, &gsv) - divided * vv).abs(),
        wn_uv: wn(&gu, &gsv).abs(),
    }
}

/// `𝔘 = diag(U, V)` as an `(M + N) × 2K` matrix.
pub fn block_u(signal: &SignalModel) -> DMatrix<f64> {
    let (m, n, k) = (signal.m(), signal.n(), signal.rank());
    let mut out = DMatrix::zeros(m + n, 2 * k);
    out.view_mut((0, 0), (m, k)).copy_from(signal.u());
    out.view_mut((m, k), (n, k)).copy_from(signal.v());
    out
}

fn d_inverse_block(signal: &SignalModel) -> DMatrix<f64> {
    let k = signal.rank();
    let mut out = DMatrix::zeros(2 * k, 2 * k);
    for (j, &d) in signal.d().iter().enumerate() {
        out[(j, k + j)] = 1.0 / d;
        out[(k + j, j)] = 1.0 / d;
    }
    out
}

/// `A_G(z) = √z 𝔘ᵀ G(z) 𝔘 + 𝔇⁻¹`.
pub fn a_g(spectrum: &SampleSpectrum, signal: &SignalModel, z: f64) -> DMatrix<f64> {
    let uu = block_u(signal);
    let cols = uu.ncols();
    let mut gu = DMatrix::zeros(uu.nrows(), cols);
    for j in 0..cols {
        let g = spectrum.g_apply(z, uu.column(j).as_slice());
        gu.column_mut(j).copy_from_slice(&g);
    }
    let a = uu.tr_mul(&gu) * math::sqrt(z) + d_inverse_block(signal);
    (&a + a.transpose()) * 0.5
}

/// `A_Π(z) = √z 𝔘ᵀ Π(z) 𝔘 + 𝔇⁻¹`.
pub fn a_pi(eq: &DeterministicEquivalent<'_>, signal: &SignalModel) -> DMatrix<f64> {
    let uu = block_u(signal);
    let mut pu = DMatrix::zeros(uu.nrows(), uu.ncols());
    for j in 0..uu.ncols() {
        let p = eq.pi_apply(uu.column(j).as_slice());
        pu.column_mut(j).copy_from_slice(&p);
    }
    uu.tr_mul(&pu) * math::sqrt(eq.z) + d_inverse_block(signal)
}

/// `B_Π(z) = z 𝔘ᵀ Π₂(z) 𝔘`.
pub fn b_pi(eq: &DeterministicEquivalent<'_>, signal: &SignalModel) -> DMatrix<f64> {
    let uu = block_u(signal);
    let mut pu = DMatrix::zeros(uu.nrows(), uu.ncols());
    for j in 0..uu.ncols() {
        let p = eq.pi2_apply(uu.column(j).as_slice());
        pu.column_mut(j).copy_from_slice(&p);
    }
    uu.tr_mul(&pu) * eq.z
}

/// Deterministic master-matrix identities for one spike.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MasterIdentities {
    /// `‖A_Π(θ_k)ξ_k‖ / ‖ξ_k‖`.
    pub null_residual: f64,
    /// Relative error of `ξᵀB_Πξ = 2θ/(σ̃θ′)`.
    pub b_form_error: f64,
    /// `min(|det A_Π(θ_k ± δ)|) / |det A_Π(θ_k)|`.
    pub det_contrast: f64,
}

pub fn master_identities(
    sigma: &CovarianceModel,
    signal: &SignalModel,
    sc: &SelfConsistent,
    theory: &SpikeTheory,
    k: usize,
    delta: f64,
) -> Result<MasterIdentities> {
    let sp = &theory.spikes[k];
    let n = theory.n;
    let eq = DeterministicEquivalent::new(sigma, sc, n, sp.theta)?;
    let a = a_pi(&eq, signal);
    let xi = DVector::from_column_slice(&sp.xi);
    let xi_norm = xi.norm();
    let null_residual = (&a * &xi).norm() / xi_norm;
    let b = b_pi(&eq, signal);
    let form = xi.dot(&(&b * &xi));
    let target = 2.0 * sp.theta / (sp.sigma_tilde * sp.theta_prime);
    let b_form_error = ((form - target) / target).abs();
    let det0 = linalg::determinant(&a).abs();
    let mut side = f64::INFINITY;
    for z in [sp.theta - delta, sp.theta + delta] {
        if let Ok(e) = DeterministicEquivalent::new(sigma, sc, n, z) {
            side = side.min(linalg::determinant(&a_pi(&e, signal)).abs());
        }
    }
    let det_contrast = if det0 == 0.0 { f64::INFINITY } else { side / det0 };
    Ok(MasterIdentities { null_residual, b_form_error, det_contrast })
}

/// Smallest `|eigenvalue|` of `A_G(λ)`.
pub fn a_g_min_abs_eigenvalue(spectrum: &SampleSpectrum, signal: &SignalModel, lambda: f64) -> f64 {
    linalg::sym_eigenvalues_desc(a_g(spectrum, signal, lambda))
        .into_iter()
        .fold(f64::INFINITY, |acc, x| acc.min(x.abs()))
}

/// `−√N σ̃_k θ′_k [u_k; v_k]ᵀ Υ(θ_k) [u_k; v_k]`, or `None` when the sample
/// trips the conditioning guard.
pub fn green_representation(
    spectrum: &SampleSpectrum,
    sigma: &CovarianceModel,
    sc: &SelfConsistent,
    theory: &SpikeTheory,
    k: usize,
) -> Result<Option<f64>> {
    let sp = &theory.spikes[k];
    let Some(bundle) = ResolventBundle::new(spectrum, sigma, sc, sp.theta)? else {
        return Ok(None);
    };
    let x: Vec<f64> = sp.u.iter().chain(&sp.v).copied().collect();
    let q = bundle.upsilon_quad(&x, &x);
    Ok(Some(-math::sqrt(theory.n as f64) * sp.sigma_tilde * sp.theta_prime * q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseLaw;
    use crate::spectra::CovarianceRecipe;
    use crate::spikes::{asymptotic_quantities, deform};

    fn sample(m: usize, n: usize, seed: u64, sigma: &CovarianceModel) -> SampleSpectrum {
        let mut rng = crate::rng::stream(seed);
        let x = NoiseLaw::gaussian().sample_matrix(m, n, 1.0 / (n as f64).sqrt(), &mut rng);
        SampleSpectrum::new(sigma.sqrt_mul(&x))
    }

    fn sc_for(sigma: &CovarianceModel, n: usize) -> SelfConsistent {
        SelfConsistent::new(sigma.esd(), sigma.dim() as f64 / n as f64).unwrap()
    }

    #[test]
    fn scalar_case_matches_two_by_two_inverse() {
        let y = DMatrix::from_element(1, 1, 0.8);
        let sp = SampleSpectrum::new(y);
        let z: f64 = 3.0;
        let rz = z.sqrt();
        let h = DMatrix::from_row_slice(2, 2, &[-z, rz * 0.8, rz * 0.8, -z]);
        let want = h.try_inverse().unwrap();
        assert!(linalg::max_abs(&(sp.g_dense(z) - want)) < 1e-14);
    }

    #[test]
    fn blocks_are_consistent() {
        let sigma = CovarianceModel::new(CovarianceRecipe::Toeplitz { rho: 0.3 }, 20).unwrap();
        let sp = sample(20, 35, 1, &sigma);
        let z = 5.0;
        let gm = sp.g_m(z);
        let gn = sp.g_n(z);
        let left = &gm * sp.y() / z.sqrt();
        let right = sp.y() * &gn / z.sqrt();
        assert!(linalg::max_abs(&(left - right)) < 1e-8);
        let g = sp.g_dense(z);
        let h = sp.h_dense(z);
        let dim = 55;
        let r = (h - DMatrix::identity(dim, dim) * z) * &g - DMatrix::identity(dim, dim);
        assert!(linalg::max_abs(&r) < 1e-8);
        let x: Vec<f64> = (0..dim).map(|i| (i as f64 * 0.37).sin()).collect();
        let applied = sp.g_apply(z, &x);
        let dense = &g * DVector::from_column_slice(&x);
        assert!(applied.iter().zip(dense.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        let sc = sc_for(&sigma, 35);
        let b = ResolventBundle::new(&sp, &sigma, &sc, z).unwrap().unwrap();
        assert!(b.identity_residual(&[0, 7, 30, 54]) < 1e-8);
        let norm = g.clone().symmetric_eigenvalues().amax();
        assert!((sp.g_norm(z) - norm).abs() < 1e-10);
    }

    #[test]
    fn opposite_blocks_have_zero_pi_part() {
        let sigma = CovarianceModel::new(CovarianceRecipe::Identity, 20).unwrap();
        let sp = sample(20, 40, 2, &sigma);
        let sc = sc_for(&sigma, 40);
        let b = ResolventBundle::new(&sp, &sigma, &sc, 4.0).unwrap().unwrap();
        let mut x = vec![0.0; 60];
        let mut y = vec![0.0; 60];
        x[3] = 1.0;
        y[45] = 1.0;
        assert_eq!(b.pi_quad(&x, &y), 0.0);
        assert_eq!(isotropic_residual(&b, &x, &y), b.g_quad(&x, &y).abs());
        let bound = sp.g_norm(4.0) + 1.0 / (4.0f64 * (1.0 + b.pi.m)).abs().max(b.pi.m.abs());
        assert!(isotropic_residual(&b, &x, &x) <= bound + 1.0);
    }

    #[test]
    fn average_law_for_g_n() {
        let sigma = CovarianceModel::new(CovarianceRecipe::Identity, 60).unwrap();
        let sp = sample(60, 60, 3, &sigma);
        let sc = sc_for(&sigma, 60);
        let z = sc.edge.lambda_plus + 1.0;
        let tr = sp.g_n(z).trace() / 60.0;
        assert!((tr - sc.m(z).unwrap()).abs() < 10.0 / 60.0);
    }

    #[test]
    fn pi_prime_matches_finite_differences_and_traces() {
        let sigma = CovarianceModel::new(CovarianceRecipe::HaarRotated { a: 1.0, b: 1.5, seed: 3 }, 25).unwrap();
        let sc = sc_for(&sigma, 50);
        let z = sc.edge.lambda_plus + 0.7;
        let h = 1e-5;
        let a: Vec<f64> = (0..25).map(|i| ((i + 1) as f64).cos()).collect();
        let at = |zz: f64| {
            let e = DeterministicEquivalent::new(&sigma, &sc, 50, zz).unwrap();
            linalg::dot(&a, &e.pi_m_apply(&a))
        };
        let fd = (at(z + h) - at(z - h)) / (2.0 * h);
        let e = DeterministicEquivalent::new(&sigma, &sc, 50, z).unwrap();
        let exact = linalg::dot(&a, &e.pi_m_prime_apply(&a));
        assert!(((fd - exact) / exact).abs() < 1e-6);
        assert!(e.trace_identity_residuals().0 < 1e-10);
        assert!(matches!(
            DeterministicEquivalent::new(&sigma, &sc, 50, sc.edge.lambda_plus),
            Err(Error::OutsideDomain { .. })
        ));
    }

    #[test]
    fn master_matrices_null_vector_and_sample_spike() {
        let (m, n) = (40, 80);
        let sigma = CovarianceModel::new(CovarianceRecipe::Toeplitz { rho: 0.2 }, m).unwrap();
        let mut rng = crate::rng::stream(21);
        let u = crate::spectra::haar_orthogonal(m, &mut rng).columns(0, 2).into_owned();
        let v = crate::spectra::haar_orthogonal(n, &mut rng).columns(0, 2).into_owned();
        let signal = SignalModel::from_factors(u, vec![3.0, 2.0], v).unwrap();
        let pop = deform(&sigma, &signal, 0.05).unwrap();
        let th = asymptotic_quantities(&sigma, &signal, &pop, &NoiseLaw::gaussian()).unwrap();
        for k in 0..th.k0() {
            let id = master_identities(&sigma, &signal, &pop.sc, &th, k, 0.1).unwrap();
            assert!(id.null_residual <= 1e-8, "{id:?}");
            assert!(id.b_form_error <= 1e-8, "{id:?}");
            assert!(id.det_contrast >= 1e3, "{id:?}");
            let sp = &th.spikes[k];
            let stacked: Vec<f64> = sp.u.iter().chain(&sp.v).copied().collect();
            let via_block = &block_u(&signal) * DVector::from_column_slice(&sp.xi);
            assert!(stacked.iter().zip(via_block.iter()).all(|(a, b)| (a - b).abs() < 1e-10));
        }
        let x = NoiseLaw::gaussian().sample_matrix(m, n, 1.0 / (n as f64).sqrt(), &mut rng);
        let y = sigma.sqrt_mul(&x);
        let spec = SampleSpectrum::new(y.clone());
        let lam = linalg::top_eigenvalues(&(signal.dense() + y), 1, linalg::EigenMethod::Svd).unwrap();
        assert!(a_g_min_abs_eigenvalue(&spec, &signal, lam[0]) < 1e-6);
    }
}
