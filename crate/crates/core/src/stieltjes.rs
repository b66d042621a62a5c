//! The self-consistent equation on the real axis.
//!
//! With `φ = M/N` and `ν` the spectral distribution of `Σ`,
//!
//! ```text
//! f(w) = −1/w + φ ∫ s/(1 + s w) ν(ds)
//! ```
//!
//! has a unique critical point `w₊` on `(−1/σ₁, 0)`. The right edge of the
//! limiting spectrum is `λ₊ = f(w₊)`, and for real `z > λ₊` the Stieltjes
//! transform `m(z)` is the inverse of `f` restricted to `(w₊, 0)`. The spike
//! map is `θ(σ̃) = f(−1/σ̃)`.
//!
//! All traces are evaluated from the atoms of `ν`; no matrix is inverted.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::spectra::SpectralDistribution;
use crate::stats::NeumaierSum;

/// `(f, f′, f″)` at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FValues {
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
}

pub const POLE_GUARD: f64 = 1e-14;

pub fn f_eval(w: f64, nu: &SpectralDistribution, phi: f64) -> Result<FValues> {
    if w == 0.0 {
        return Err(Error::OutsideDomain { z: w, bound: 0.0 });
    }
    let (mut s1, mut s2, mut s3) = (NeumaierSum::default(), NeumaierSum::default(), NeumaierSum::default());
    for &(s, weight) in nu.atoms() {
        let den = 1.0 + s * w;
        if den.abs() < POLE_GUARD {
            return Err(Error::Pole { w, atom: s });
        }
        let r = s / den;
        s1.add(weight * r);
        s2.add(weight * r * r);
        s3.add(weight * r * r * r);
    }
    let inv = 1.0 / w;
    Ok(FValues {
        f: -inv + phi * s1.total(),
        df: inv * inv - phi * s2.total(),
        d2f: -2.0 * inv * inv * inv + 2.0 * phi * s3.total(),
    })
}

/// Critical point, edge and the edge curvature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeData {
    pub w_plus: f64,
    pub lambda_plus: f64,
    /// `f″(w₊)`; the edge scale is taken at the critical point `w₊`, since
    /// `f` is a function of `w` and not of `λ`.
    pub f_second_at_w_plus: f64,
    pub phi: f64,
}

impl EdgeData {
    /// `(f″(w₊)/2)^{1/3}`.
    pub fn sigma_tw(&self) -> f64 {
        math::cbrt(self.f_second_at_w_plus / 2.0)
    }

    /// `−1/w₊`, the population level a spike must exceed.
    pub fn threshold(&self) -> f64 {
        -1.0 / self.w_plus
    }
}

const GRID_HALF: usize = 32;

/// Offsets `t ∈ (0, 1)` accumulating logarithmically at both ends.
fn bracket_grid() -> Vec<f64> {
    let mut ts = Vec::with_capacity(2 * GRID_HALF);
    for j in 0..GRID_HALF {
        let e = 0.5 * libm::pow(10.0, -12.0 * (1.0 - j as f64 / GRID_HALF as f64));
        ts.push(1.0 - e);
    }
    for j in (0..GRID_HALF).rev() {
        let e = 0.5 * libm::pow(10.0, -12.0 * (1.0 - j as f64 / GRID_HALF as f64));
        ts.push(e);
    }
    ts
}

pub fn find_w_plus(nu: &SpectralDistribution, phi: f64) -> Result<EdgeData> {
    let sigma1 = nu.sigma_max();
    if !(sigma1 > 0.0) {
        return Err(Error::DegenerateSpectrum("ν is concentrated at 0".into()));
    }
    if !(phi > 0.0) || !phi.is_finite() {
        return Err(Error::InvalidInput("φ must be positive and finite".into()));
    }
    let left = -1.0 / sigma1;
    // w = t·left with t decreasing, so w increases along the grid
    let mut grid = Vec::with_capacity(2 * GRID_HALF);
    let mut bracket = None;
    let mut prev: Option<(f64, f64)> = None;
    for t in bracket_grid() {
        let w = t * left;
        let d = f_eval(w, nu, phi)?.df;
        grid.push((w, d));
        if let Some((pw, pd)) = prev {
            if pd < 0.0 && d >= 0.0 {
                bracket = Some((pw, w));
                break;
            }
        }
        prev = Some((w, d));
    }
    let Some((mut lo, mut hi)) = bracket else {
        return Err(Error::NoBracket { grid });
    };
    let width = 1e-14 / sigma1;
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f_eval(mid, nu, phi)?.df < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut w = 0.5 * (lo + hi);
    let mut v = f_eval(w, nu, phi)?;
    for _ in 0..3 {
        if v.d2f <= 0.0 {
            break;
        }
        let cand = w - v.df / v.d2f;
        if !(cand > lo - width && cand < hi + width) {
            break;
        }
        let cv = f_eval(cand, nu, phi)?;
        if cv.df.abs() >= v.df.abs() {
            break;
        }
        w = cand;
        v = cv;
    }
    if !(v.d2f > 0.0) {
        return Err(Error::Numerical("f″(w₊) is not positive".into()));
    }
    Ok(EdgeData { w_plus: w, lambda_plus: v.f, f_second_at_w_plus: v.d2f, phi })
}

/// `m(z)` for real `z > λ₊`: the root of `f(m) = z` in `(w₊, 0)`.
pub fn solve_m(z: f64, nu: &SpectralDistribution, phi: f64, edge: &EdgeData) -> Result<f64> {
    let bound = edge.lambda_plus + 1e-8;
    if !(z >= bound) || !z.is_finite() {
        return Err(Error::OutsideDomain { z, bound });
    }
    let mut lo = edge.w_plus;
    let mut hi = (-1.0 / z).max(0.5 * edge.w_plus);
    while f_eval(hi, nu, phi)?.f < z {
        lo = hi;
        hi *= 0.5;
    }
    let mut w = hi;
    for _ in 0..300 {
        let v = f_eval(w, nu, phi)?;
        let r = v.f - z;
        if r == 0.0 {
            return Ok(w);
        }
        if r < 0.0 {
            lo = w;
        } else {
            hi = w;
        }
        let newton = w - r / v.df;
        w = if v.df > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= 4.0 * f64::EPSILON * hi.abs() || (w - lo).abs().min((hi - w).abs()) == 0.0 {
            break;
        }
        if (r / v.df).abs() <= 2.0 * f64::EPSILON * w.abs() {
            let v = f_eval(w, nu, phi)?;
            if (v.f - z).abs() <= 1e-12 * z.max(1.0) {
                return Ok(w);
            }
        }
    }
    Ok(w)
}

/// `m[z_k, z_j]`, or `m′(z) = 1/f′(m(z))` on the diagonal.
pub fn m_derivative_and_divided_difference(
    z_k: f64,
    z_j: f64,
    nu: &SpectralDistribution,
    phi: f64,
    edge: &EdgeData,
) -> Result<f64> {
    let mk = solve_m(z_k, nu, phi, edge)?;
    if z_k == z_j {
        return Ok(1.0 / f_eval(mk, nu, phi)?.df);
    }
    let mj = solve_m(z_j, nu, phi, edge)?;
    Ok((mk - mj) / (z_k - z_j))
}

/// `θ(σ̃) = σ̃ + φ∫ σ̃s/(σ̃ − s) ν(ds)` and `θ′(σ̃) = 1 − φ∫ s²/(σ̃ − s)² ν(ds)`.
pub fn theta_map(sigma_tilde: f64, nu: &SpectralDistribution, phi: f64, edge: &EdgeData) -> Result<(f64, f64)> {
    let threshold = edge.threshold();
    if !(sigma_tilde > threshold) {
        return Err(Error::Subcritical { sigma: sigma_tilde, threshold });
    }
    let (mut a, mut b) = (NeumaierSum::default(), NeumaierSum::default());
    for &(s, weight) in nu.atoms() {
        let gap = sigma_tilde - s;
        if gap.abs() < 1e-10 * sigma_tilde {
            return Err(Error::NearPole { sigma: sigma_tilde, eigenvalue: s });
        }
        a.add(weight * sigma_tilde * s / gap);
        b.add(weight * s * s / (gap * gap));
    }
    Ok((sigma_tilde + phi * a.total(), 1.0 - phi * b.total()))
}

/// `ν`, `φ` and the edge bundled together.
#[derive(Debug, Clone)]
pub struct SelfConsistent {
    pub nu: SpectralDistribution,
    pub phi: f64,
    pub edge: EdgeData,
}

impl SelfConsistent {
    pub fn new(nu: SpectralDistribution, phi: f64) -> Result<Self> {
        let edge = find_w_plus(&nu, phi)?;
        Ok(Self { nu, phi, edge })
    }

    pub fn f(&self, w: f64) -> Result<FValues> {
        f_eval(w, &self.nu, self.phi)
    }

    pub fn m(&self, z: f64) -> Result<f64> {
        solve_m(z, &self.nu, self.phi, &self.edge)
    }

    pub fn m_prime(&self, z: f64) -> Result<f64> {
        m_derivative_and_divided_difference(z, z, &self.nu, self.phi, &self.edge)
    }

    pub fn divided_difference(&self, z_k: f64, z_j: f64) -> Result<f64> {
        m_derivative_and_divided_difference(z_k, z_j, &self.nu, self.phi, &self.edge)
    }

    pub fn theta(&self, sigma_tilde: f64) -> Result<(f64, f64)> {
        theta_map(sigma_tilde, &self.nu, self.phi, &self.edge)
    }

    pub fn threshold(&self) -> f64 {
        self.edge.threshold()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity() -> SpectralDistribution {
        SpectralDistribution::from_eigenvalues(&[1.0; 10])
    }

    fn two_atom() -> SpectralDistribution {
        SpectralDistribution::from_atoms(alloc::vec![(1.0, 0.5), (2.0, 0.5)]).unwrap()
    }

    /// Larger root of `z m² + (z + 1 − φ) m + 1 = 0`.
    fn mp_m(z: f64, phi: f64) -> f64 {
        let b = z + 1.0 - phi;
        (-b + (b * b - 4.0 * z).sqrt()) / (2.0 * z)
    }

    #[test]
    fn f_hand_values() {
        let v = f_eval(-0.5, &identity(), 0.5).unwrap();
        assert!((v.f - 3.0).abs() < 1e-15);
        assert!((v.df - 2.0).abs() < 1e-15);
        let nu = two_atom();
        let w = -0.25;
        let direct = -1.0 / w + 0.5 * (0.5 * 1.0 / (1.0 + w) + 0.5 * 2.0 / (1.0 + 2.0 * w));
        assert!((f_eval(w, &nu, 0.5).unwrap().f - direct).abs() < 1e-14);
        assert!(matches!(f_eval(-1.0, &identity(), 0.5), Err(Error::Pole { atom, .. }) if atom == 1.0));
        assert!(f_eval(-1e-9, &identity(), 0.5).unwrap().f > 1e8);
    }

    #[test]
    fn edge_closed_forms() {
        for phi in [0.25, 0.5, 1.0, 2.0] {
            let e = find_w_plus(&identity(), phi).unwrap();
            let r: f64 = phi.sqrt();
            assert!((e.w_plus + 1.0 / (1.0 + r)).abs() < 1e-10, "{phi}");
            assert!((e.lambda_plus - (1.0 + r) * (1.0 + r)).abs() < 1e-10);
        }
        let e = find_w_plus(&identity(), 1.0).unwrap();
        assert!((e.f_second_at_w_plus - 32.0).abs() < 1e-6);
        assert!((e.sigma_tw() - 16f64.cbrt()).abs() < 1e-8);
    }

    #[test]
    fn two_atom_edge_residual() {
        let nu = two_atom();
        let e = find_w_plus(&nu, 0.5).unwrap();
        let v = f_eval(e.w_plus, &nu, 0.5).unwrap();
        assert!(v.df.abs() <= 1e-10 / (e.w_plus * e.w_plus));
        assert!(v.d2f > 0.0);
        assert!(e.w_plus > -0.5 && e.w_plus < 0.0);
    }

    #[test]
    fn m_matches_quadratic_root() {
        let nu = identity();
        let e = find_w_plus(&nu, 0.5).unwrap();
        let m4 = solve_m(4.0, &nu, 0.5, &e).unwrap();
        assert!((m4 - mp_m(4.0, 0.5)).abs() < 1e-13);
        let dd = m_derivative_and_divided_difference(4.0, 5.0, &nu, 0.5, &e).unwrap();
        assert!((dd - (mp_m(4.0, 0.5) - mp_m(5.0, 0.5)) / -1.0).abs() < 1e-12);
        let big = solve_m(1e6, &nu, 0.5, &e).unwrap();
        assert!((big * 1e6 + 1.0).abs() < 1e-5);
        assert!(matches!(solve_m(2.0, &nu, 0.5, &e), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn m_prime_at_theta() {
        let nu = identity();
        let e = find_w_plus(&nu, 0.5).unwrap();
        let st = 6.25;
        let (theta, dtheta) = theta_map(st, &nu, 0.5, &e).unwrap();
        let m = solve_m(theta, &nu, 0.5, &e).unwrap();
        assert!((m + 1.0 / st).abs() < 1e-12);
        let mp = m_derivative_and_divided_difference(theta, theta, &nu, 0.5, &e).unwrap();
        assert!((mp - 1.0 / (st * st * dtheta)).abs() < 1e-12);
        let near = m_derivative_and_divided_difference(theta, theta + 1e-6, &nu, 0.5, &e).unwrap();
        assert!((near - mp).abs() <= 1e-4 * mp.abs());
    }

    #[test]
    fn theta_reduction_and_guards() {
        let nu = identity();
        let e = find_w_plus(&nu, 0.5).unwrap();
        let d2 = 5.25;
        let (t, tp) = theta_map(1.0 + d2, &nu, 0.5, &e).unwrap();
        assert!((t - 6.845_238_095_238_095).abs() < 1e-12);
        assert!((tp - (1.0 - 0.5 / (d2 * d2))).abs() < 1e-12);
        assert!(matches!(theta_map(1.5, &nu, 0.5, &e), Err(Error::Subcritical { .. })));
        let (t_big, tp_big) = theta_map(1e8, &nu, 0.5, &e).unwrap();
        assert!((t_big / 1e8 - 1.0).abs() < 1e-7 && (tp_big - 1.0).abs() < 1e-12);
        let (t_edge, _) = theta_map(e.threshold() + 1e-7, &nu, 0.5, &e).unwrap();
        assert!((t_edge - e.lambda_plus).abs() < 1e-6);
    }

    fn nu_strategy() -> impl Strategy<Value = SpectralDistribution> {
        prop::collection::vec((0.05f64..3.0, 0.1f64..1.0), 1..5)
            .prop_map(|atoms| SpectralDistribution::from_atoms(atoms).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn round_trip_and_derivatives(nu in nu_strategy(), phi in 0.1f64..3.0) {
            let e = find_w_plus(&nu, phi).unwrap();
            let v = f_eval(e.w_plus, &nu, phi).unwrap();
            prop_assert!(v.df.abs() <= 1e-10 / (e.w_plus * e.w_plus));
            for i in 1..50 {
                let lo = e.w_plus + 1e-3;
                let w = lo + (-1e-3 - lo) * i as f64 / 50.0;
                let z = f_eval(w, &nu, phi).unwrap().f;
                let m = solve_m(z, &nu, phi, &e).unwrap();
                prop_assert!((m - w).abs() <= 1e-10, "w={w} m={m}");
            }
            let w = 0.5 * e.w_plus;
            let h = 1e-5 * w.abs();
            let fp = f_eval(w + h, &nu, phi).unwrap();
            let fm = f_eval(w - h, &nu, phi).unwrap();
            let c = f_eval(w, &nu, phi).unwrap();
            prop_assert!(((fp.f - fm.f) / (2.0 * h) - c.df).abs() <= 1e-6 * c.df.abs().max(1.0));
            prop_assert!(((fp.df - fm.df) / (2.0 * h) - c.d2f).abs() <= 1e-6 * c.d2f.abs().max(1.0));
        }

        #[test]
        fn theta_is_monotone_and_composes_with_f(nu in nu_strategy(), phi in 0.1f64..3.0, a in 0.01f64..5.0, b in 0.01f64..5.0) {
            let e = find_w_plus(&nu, phi).unwrap();
            let (s1, s2) = (e.threshold() + a.min(b), e.threshold() + a.max(b) + 1e-3);
            let (t1, tp1) = theta_map(s1, &nu, phi, &e).unwrap();
            let (t2, _) = theta_map(s2, &nu, phi, &e).unwrap();
            prop_assert!(t1 < t2);
            prop_assert!(t1 > e.lambda_plus);
            prop_assert!(tp1 > 0.0 && tp1 <= 1.0);
            let via_f = f_eval(-1.0 / s1, &nu, phi).unwrap().f;
            prop_assert!((via_f - t1).abs() <= 1e-12 * t1.max(1.0));
            let h = 1e-5 * s1;
            let (tp, _) = theta_map(s1 + h, &nu, phi, &e).unwrap();
            let (tm, _) = theta_map(s1 - h, &nu, phi, &e).unwrap();
            prop_assert!(((tp - tm) / (2.0 * h) - tp1).abs() <= 1e-6 * tp1.abs().max(1e-3));
        }
    }
}
