//! Dense linear-algebra helpers shared by the theory and sampling modules.
//!
//! All symmetric eigendecompositions in the crate go through
//! [`sym_eigen_desc`], which fixes the ordering (descending, ties by original
//! index) and the eigenvector sign (largest-magnitude entry positive, ties by
//! lowest index) so that outputs are deterministic.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

/// Eigenvalues (descending) and matching unit eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

/// Largest-magnitude entry made positive; ties go to the lowest index.
pub fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if best_abs > 0.0 && v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps index order among equal values
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap_or(core::cmp::Ordering::Equal));
    idx
}

pub fn sym_eigen_desc(a: DMatrix<f64>) -> SymEigen {
    let n = a.nrows();
    let eig = a.symmetric_eigen();
    let order = descending_order(eig.eigenvalues.as_slice());
    let mut vectors = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let mut col: Vec<f64> = eig.eigenvectors.column(src).iter().copied().collect();
        fix_sign(&mut col);
        vectors.column_mut(dst).copy_from_slice(&col);
    }
    SymEigen { values, vectors }
}

pub fn sym_eigenvalues_desc(a: DMatrix<f64>) -> Vec<f64> {
    let vals = a.symmetric_eigenvalues();
    let mut v: Vec<f64> = vals.iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    v
}

/// `V diag(f(λ)) Vᵀ`.
pub fn spectral_matrix(values: &[f64], vectors: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let mut scaled = vectors.clone();
    for (j, &lam) in values.iter().enumerate() {
        let w = f(lam);
        scaled.column_mut(j).scale_mut(w);
    }
    scaled * vectors.transpose()
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

pub fn max_asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

/// `max |QᵀQ − I|` over entries.
pub fn orthonormality_defect(q: &DMatrix<f64>) -> f64 {
    let g = q.transpose() * q;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

pub fn norm(v: &[f64]) -> f64 {
    math::sqrt(v.iter().map(|x| x * x).sum())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// How the top eigenvalues of `ỸỸᵀ` are extracted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// SVD of `Ỹ` up to `min(M, N) = 1024`, Gram matrix above.
    #[default]
    Auto,
    Svd,
    Gram,
}

pub const SVD_DIMENSION_LIMIT: usize = 1024;

/// The `r` largest eigenvalues of `ỸỸᵀ` (equivalently of `ỸᵀỸ`), descending.
pub fn top_eigenvalues(y: &DMatrix<f64>, r: usize, method: EigenMethod) -> Result<Vec<f64>> {
    let available = y.nrows().min(y.ncols());
    if r == 0 || r > available {
        return Err(Error::RankOutOfRange { requested: r, available });
    }
    let use_svd = match method {
        EigenMethod::Svd => true,
        EigenMethod::Gram => false,
        EigenMethod::Auto => available <= SVD_DIMENSION_LIMIT,
    };
    let mut vals = if use_svd {
        let sv = y.clone().svd(false, false).singular_values;
        let mut v: Vec<f64> = sv.iter().map(|s| s * s).collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
        v
    } else {
        sym_eigenvalues_desc(gram_small(y))
    };
    vals.truncate(r);
    Ok(vals)
}

/// The smaller of `YYᵀ` and `YᵀY`.
pub fn gram_small(y: &DMatrix<f64>) -> DMatrix<f64> {
    if y.nrows() <= y.ncols() {
        y * y.transpose()
    } else {
        y.transpose() * y
    }
}

pub fn column(a: &DMatrix<f64>, j: usize) -> Vec<f64> {
    a.column(j).iter().copied().collect()
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Determinant through LU; the master matrices are at most `128 × 128`.
pub fn determinant(a: &DMatrix<f64>) -> f64 {
    a.clone().lu().determinant()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_convention_prefers_lowest_index_on_ties() {
        let mut v = [-0.5, 0.5, 0.1];
        fix_sign(&mut v);
        assert_eq!(v, [0.5, -0.5, -0.1]);
        let mut w = [0.2, -0.9];
        fix_sign(&mut w);
        assert_eq!(w, [-0.2, 0.9]);
    }

    #[test]
    fn eigen_is_sorted_and_reconstructs() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0]);
        let e = sym_eigen_desc(a.clone());
        assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let rec = spectral_matrix(&e.values, &e.vectors, |x| x);
        assert!(max_abs(&(rec - a)) < 1e-12);
        assert!(orthonormality_defect(&e.vectors) < 1e-12);
    }

    #[test]
    fn diagonal_case_top_eigenvalues() {
        let mut y = DMatrix::zeros(2, 4);
        y[(0, 0)] = 3.0;
        y[(1, 1)] = 2.0;
        for method in [EigenMethod::Svd, EigenMethod::Gram, EigenMethod::Auto] {
            let v = top_eigenvalues(&y, 2, method).unwrap();
            assert!((v[0] - 9.0).abs() < 1e-12 && (v[1] - 4.0).abs() < 1e-12);
        }
        assert!(matches!(
            top_eigenvalues(&y, 3, EigenMethod::Svd),
            Err(Error::RankOutOfRange { requested: 3, available: 2 })
        ));
    }
}
