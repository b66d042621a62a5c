//! Eigenvalue-ratio statistics for detecting mean heterogeneity.
//!
//! For descending eigenvalues `λ₁ ≥ λ₂ ≥ …` and a rank bound `K⋆`,
//!
//! ```text
//! DS = (λ₁ − λ_{K⋆}) / (λ_{K⋆} − λ_{2K⋆−1})
//! RS = (λ₁ − λ_{K⋆}) / (λ_{K⋆} − λ_{K⋆+1})
//! ```
//!
//! Both are invariant under rescaling of the data. Critical values come from
//! pure-noise Wishart matrices.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenMethod};
use crate::math;
use crate::stats::NeumaierSum;

/// `(DS, RS)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioStats {
    pub ds: f64,
    pub rs: f64,
}

/// Number of eigenvalues the statistics consume.
pub fn required_eigenvalues(k_star: usize) -> usize {
    (2 * k_star).saturating_sub(1).max(k_star + 1)
}

/// DS and RS from descending eigenvalues. A zero numerator over a positive
/// denominator gives 0; a zero denominator is an error. For `K⋆ = 1` both
/// statistics are 0, since the DS denominator `λ₁ − λ₁` vanishes identically.
pub fn ds_rs_stats(eigs: &[f64], k_star: usize) -> Result<RatioStats> {
    if k_star == 0 {
        return Err(Error::InvalidInput("K* must be at least 1".into()));
    }
    let need = required_eigenvalues(k_star);
    if eigs.len() < need {
        return Err(Error::RankOutOfRange { requested: need, available: eigs.len() });
    }
    let top = eigs[0];
    let mid = eigs[k_star - 1];
    let num = top - mid;
    let ratio = |den: f64, which: &str| -> Result<f64> {
        if !(den > 0.0) {
            return Err(Error::DegenerateSpectrum(alloc::format!("{which} denominator is {den}")));
        }
        Ok(if num == 0.0 { 0.0 } else { num / den })
    };
    let ds = if k_star == 1 { 0.0 } else { ratio(mid - eigs[2 * k_star - 2], "DS")? };
    Ok(RatioStats { ds, rs: ratio(mid - eigs[k_star], "RS")? })
}

/// Critical values at a nominal level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub k_star: usize,
    pub n_star: usize,
    pub reps: usize,
    pub quantile: f64,
    pub cv_ds: f64,
    pub cv_rs: f64,
    pub master_seed: u64,
}

/// One null draw: `N⋆ × N⋆` Gaussian matrix with variance `1/N⋆` entries,
/// filled column by column.
pub fn calibration_replicate<R: Rng + ?Sized>(k_star: usize, n_star: usize, rng: &mut R) -> Result<RatioStats> {
    let need = required_eigenvalues(k_star);
    if n_star < need {
        return Err(Error::RankOutOfRange { requested: need, available: n_star });
    }
    let scale = 1.0 / math::sqrt(n_star as f64);
    let data: Vec<f64> = (0..n_star * n_star)
        .map(|_| {
            let g: f64 = rng.sample(StandardNormal);
            g * scale
        })
        .collect();
    let w = DMatrix::from_vec(n_star, n_star, data);
    let eigs = linalg::top_eigenvalues(&w, need, EigenMethod::Gram)?;
    ds_rs_stats(&eigs, k_star)
}

/// Outcome of one test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub stats: RatioStats,
    pub reject_ds: bool,
    pub reject_rs: bool,
}

/// Tests `K = 1` against `1 < K ≤ K⋆` for an `M × N` data matrix whose
/// columns are observations. Data are scaled by `1/√N`.
pub fn detect(data: &DMatrix<f64>, cv: &CriticalValues, method: EigenMethod) -> Result<Decision> {
    if cv.k_star < 2 {
        return Err(Error::InvalidInput("detection needs K* ≥ 2".into()));
    }
    let scaled = data / math::sqrt(data.ncols() as f64);
    let eigs = linalg::top_eigenvalues(&scaled, required_eigenvalues(cv.k_star), method)?;
    let stats = ds_rs_stats(&eigs, cv.k_star)?;
    Ok(Decision { stats, reject_ds: stats.ds > cv.cv_ds, reject_rs: stats.rs > cv.cv_rs })
}

/// Subtracts each variable's sample mean across observations. Off for table
/// reproduction, where observations are assumed centered.
pub fn center_observations(data: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = data.clone();
    for mut row in out.row_iter_mut() {
        let mut acc = NeumaierSum::default();
        for &x in row.iter() {
            acc.add(x);
        }
        let mean = acc.total() / row.len().max(1) as f64;
        for x in row.iter_mut() {
            *x -= mean;
        }
    }
    out
}

/// Cluster-center recipes used by the power study, one entry interval per
/// free center; the last center makes the centers sum to zero.
pub fn center_intervals(k: usize) -> Result<&'static [(f64, f64)]> {
    match k {
        2 => Ok(&[(0.0, 0.3)]),
        3 => Ok(&[(0.0, 0.4), (-0.3, 0.0)]),
        4 => Ok(&[(0.0, 0.45), (-0.3, 0.0), (-0.1, 0.2)]),
        _ => Err(Error::InvalidInput(alloc::format!("no center recipe for K = {k}"))),
    }
}

/// Draws `K` centers of length `M`, free centers first (each filled entry by
/// entry), scaled by `scale`.
pub fn draw_centers<R: Rng + ?Sized>(k: usize, m: usize, scale: f64, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    let intervals = center_intervals(k)?;
    let mut centers: Vec<Vec<f64>> = intervals
        .iter()
        .map(|&(lo, hi)| (0..m).map(|_| scale * (lo + (hi - lo) * rng.random::<f64>())).collect())
        .collect();
    let last: Vec<f64> = (0..m).map(|i| -centers.iter().map(|c| c[i]).sum::<f64>()).collect();
    centers.push(last);
    Ok(centers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    #[test]
    fn worked_example() {
        let s = ds_rs_stats(&[10.0, 8.0, 6.0, 5.0, 4.0, 3.0, 2.0], 4).unwrap();
        assert!((s.ds - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.rs, 5.0);
    }

    #[test]
    fn degenerate_and_boundary_cases() {
        assert!(matches!(ds_rs_stats(&[1.0; 7], 4), Err(Error::DegenerateSpectrum(_))));
        let s = ds_rs_stats(&[3.0, 2.0], 1).unwrap();
        assert_eq!((s.ds, s.rs), (0.0, 0.0));
        assert!(matches!(ds_rs_stats(&[3.0, 2.0, 1.0], 4), Err(Error::RankOutOfRange { .. })));
    }

    #[test]
    fn centers_sum_to_zero() {
        let mut r = rng::stream(1);
        for k in 2..=4 {
            let c = draw_centers(k, 7, 1.0, &mut r).unwrap();
            assert_eq!(c.len(), k);
            for i in 0..7 {
                assert!(c.iter().map(|v| v[i]).sum::<f64>().abs() < 1e-15);
            }
            assert!(c[0].iter().all(|&x| (0.0..0.45).contains(&x)));
        }
        assert!(draw_centers(5, 3, 1.0, &mut r).is_err());
    }

    #[test]
    fn zero_row_data_is_fine() {
        let mut r = rng::stream(2);
        let mut x = DMatrix::from_fn(20, 40, |_, _| r.sample::<f64, _>(StandardNormal));
        x.row_mut(3).fill(0.0);
        let cv =
            CriticalValues { k_star: 3, n_star: 20, reps: 0, quantile: 0.95, cv_ds: 1.0, cv_rs: 1.0, master_seed: 0 };
        assert!(detect(&x, &cv, EigenMethod::Svd).is_ok());
    }

    #[test]
    fn centering_removes_row_means() {
        let x = DMatrix::from_fn(3, 4, |i, j| (i * 10 + j) as f64 + 0.5);
        let c = center_observations(&x);
        for row in c.row_iter() {
            assert!(row.iter().sum::<f64>().abs() < 1e-12);
        }
        assert_eq!(c[(1, 3)] - c[(1, 0)], 3.0);
    }

    proptest! {
        #[test]
        fn statistics_are_scale_invariant(seed in 0u64..1000, c in 0.01f64..100.0) {
            let mut r = rng::stream(seed);
            let x = DMatrix::from_fn(15, 30, |_, _| r.sample::<f64, _>(StandardNormal));
            let cv = CriticalValues { k_star: 3, n_star: 15, reps: 0, quantile: 0.95, cv_ds: 2.0, cv_rs: 5.0, master_seed: 0 };
            let a = detect(&x, &cv, EigenMethod::Svd).unwrap();
            let b = detect(&(&x * c), &cv, EigenMethod::Svd).unwrap();
            prop_assert!((a.stats.ds - b.stats.ds).abs() <= 1e-9 * a.stats.ds.abs().max(1.0));
            prop_assert!((a.stats.rs - b.stats.rs).abs() <= 1e-9 * a.stats.rs.abs().max(1.0));
            prop_assert_eq!(a.reject_ds, b.reject_ds);
            prop_assert_eq!(a.reject_rs, b.reject_rs);
        }
    }
}
