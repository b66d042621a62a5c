//! Population covariance models.
//!
//! A [`CovarianceModel`] is built once from a [`CovarianceRecipe`] and is
//! immutable afterwards. Everything downstream reads only its sorted spectrum
//! and, where a formula needs directions, its eigenvectors.

use alloc::borrow::Cow;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SymEigen};
use crate::math;
use crate::rng::{self, domains};
use crate::stats::NeumaierSum;
use crate::stieltjes;

/// How to build `Σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields, from = "RecipeRepr")]
pub enum CovarianceRecipe {
    Identity,
    Diagonal {
        entries: Vec<f64>,
    },
    /// `σ_ij = ρ^{|i−j|}`.
    Toeplitz {
        rho: f64,
    },
    /// `O diag(λ) Oᵀ` with `O` Haar on `O(M)` and `λ_i ~ Unif(a, b)`.
    HaarRotated {
        a: f64,
        b: f64,
        seed: u64,
    },
    Dense {
        rows: Vec<Vec<f64>>,
    },
}

/// Strict form of [`CovarianceRecipe`]: the empty struct variant makes stray
/// keys on `identity` an error.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum RecipeRepr {
    Identity {},
    Diagonal { entries: Vec<f64> },
    Toeplitz { rho: f64 },
    HaarRotated { a: f64, b: f64, seed: u64 },
    Dense { rows: Vec<Vec<f64>> },
}

impl From<RecipeRepr> for CovarianceRecipe {
    fn from(r: RecipeRepr) -> Self {
        match r {
            RecipeRepr::Identity {} => CovarianceRecipe::Identity,
            RecipeRepr::Diagonal { entries } => CovarianceRecipe::Diagonal { entries },
            RecipeRepr::Toeplitz { rho } => CovarianceRecipe::Toeplitz { rho },
            RecipeRepr::HaarRotated { a, b, seed } => CovarianceRecipe::HaarRotated { a, b, seed },
            RecipeRepr::Dense { rows } => CovarianceRecipe::Dense { rows },
        }
    }
}

/// Symmetric PSD square root of `Σ` in the cheapest faithful representation.
#[derive(Debug, Clone)]
pub enum SqrtFactor {
    Identity,
    /// Square roots of the diagonal entries in their original order.
    Diagonal(Vec<f64>),
    Dense(DMatrix<f64>),
}

#[derive(Debug, Clone)]
enum Structure {
    Identity,
    /// Entries in original order; `order[k]` is the index of the k-th largest.
    Diagonal {
        entries: Vec<f64>,
        order: Vec<usize>,
    },
    Dense {
        matrix: DMatrix<f64>,
        vectors: DMatrix<f64>,
    },
}

#[derive(Debug, Clone)]
pub struct CovarianceModel {
    recipe: CovarianceRecipe,
    dim: usize,
    eigenvalues: Vec<f64>,
    structure: Structure,
    sqrt: SqrtFactor,
}

/// Eigenvalues below this multiple of `σ₁` (in absolute value) count as zero;
/// below its negative they reject the input.
pub const PSD_TOLERANCE: f64 = 1e-8;
const SYMMETRY_TOLERANCE: f64 = 1e-10;

impl CovarianceModel {
    pub fn new(recipe: CovarianceRecipe, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("dimension M must be positive".into()));
        }
        match &recipe {
            CovarianceRecipe::Identity => Ok(Self {
                dim: m,
                eigenvalues: vec![1.0; m],
                structure: Structure::Identity,
                sqrt: SqrtFactor::Identity,
                recipe,
            }),
            CovarianceRecipe::Diagonal { entries } => {
                if entries.len() != m {
                    return Err(Error::DimensionMismatch {
                        what: "diagonal entries",
                        expected: m,
                        found: entries.len(),
                    });
                }
                if let Some(&bad) = entries.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
                    return Err(Error::NotPsd { eigenvalue: bad });
                }
                let mut order: Vec<usize> = (0..m).collect();
                order.sort_by(|&a, &b| entries[b].partial_cmp(&entries[a]).unwrap_or(core::cmp::Ordering::Equal));
                let eigenvalues = order.iter().map(|&i| entries[i]).collect();
                let sqrt = SqrtFactor::Diagonal(entries.iter().map(|&x| math::sqrt(x)).collect());
                let structure = Structure::Diagonal { entries: entries.clone(), order };
                Ok(Self { dim: m, eigenvalues, structure, sqrt, recipe })
            }
            CovarianceRecipe::Toeplitz { rho } => {
                let rho = *rho;
                if !(rho.abs() < 1.0) {
                    return Err(Error::InvalidInput(format!("Toeplitz ratio must satisfy |ρ| < 1, got {rho}")));
                }
                let matrix = toeplitz(rho, m);
                Self::from_symmetric(recipe, matrix)
            }
            CovarianceRecipe::HaarRotated { a, b, seed } => {
                let (a, b) = (*a, *b);
                if !(a <= b) || a < 0.0 || !b.is_finite() {
                    return Err(Error::InvalidInput(format!(
                        "eigenvalue bounds must satisfy 0 ≤ a ≤ b, got ({a}, {b})"
                    )));
                }
                let mut rng = rng::stream(rng::derive_seed(*seed, domains::HAAR, m as u64));
                let lambdas: Vec<f64> = (0..m).map(|_| if a == b { a } else { rng.random_range(a..b) }).collect();
                let o = haar_orthogonal(m, &mut rng);
                Ok(Self::from_rotation(recipe, &lambdas, &o))
            }
            CovarianceRecipe::Dense { rows } => {
                if rows.len() != m {
                    return Err(Error::DimensionMismatch {
                        what: "dense covariance rows",
                        expected: m,
                        found: rows.len(),
                    });
                }
                if let Some(r) = rows.iter().find(|r| r.len() != m) {
                    return Err(Error::DimensionMismatch {
                        what: "dense covariance columns",
                        expected: m,
                        found: r.len(),
                    });
                }
                let matrix = DMatrix::from_fn(m, m, |i, j| rows[i][j]);
                let scale = linalg::max_abs(&matrix).max(f64::MIN_POSITIVE);
                let asym = linalg::max_asymmetry(&matrix);
                if asym > SYMMETRY_TOLERANCE * scale {
                    return Err(Error::NotSymmetric { asymmetry: asym });
                }
                let sym = (&matrix + matrix.transpose()) * 0.5;
                Self::from_symmetric(recipe, sym)
            }
        }
    }

    fn from_symmetric(recipe: CovarianceRecipe, matrix: DMatrix<f64>) -> Result<Self> {
        let m = matrix.nrows();
        let SymEigen { mut values, vectors } = linalg::sym_eigen_desc(matrix.clone());
        let top = values[0].max(0.0);
        let lowest = values[m - 1];
        if lowest < -PSD_TOLERANCE * top.max(f64::MIN_POSITIVE) || !lowest.is_finite() {
            return Err(Error::NotPsd { eigenvalue: lowest });
        }
        for v in values.iter_mut() {
            *v = v.max(0.0);
        }
        let sqrt = SqrtFactor::Dense(linalg::spectral_matrix(&values, &vectors, math::sqrt));
        Ok(Self { recipe, dim: m, eigenvalues: values, structure: Structure::Dense { matrix, vectors }, sqrt })
    }

    fn from_rotation(recipe: CovarianceRecipe, lambdas: &[f64], o: &DMatrix<f64>) -> Self {
        let m = lambdas.len();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&x, &y| lambdas[y].partial_cmp(&lambdas[x]).unwrap_or(core::cmp::Ordering::Equal));
        let values: Vec<f64> = order.iter().map(|&i| lambdas[i]).collect();
        let mut vectors = DMatrix::zeros(m, m);
        for (dst, &src) in order.iter().enumerate() {
            let mut col = linalg::column(o, src);
            linalg::fix_sign(&mut col);
            vectors.column_mut(dst).copy_from_slice(&col);
        }
        let matrix = linalg::spectral_matrix(&values, &vectors, |x| x);
        let matrix = (&matrix + matrix.transpose()) * 0.5;
        let sqrt = SqrtFactor::Dense(linalg::spectral_matrix(&values, &vectors, math::sqrt));
        Self { recipe, dim: m, eigenvalues: values, structure: Structure::Dense { matrix, vectors }, sqrt }
    }

    pub fn recipe(&self) -> &CovarianceRecipe {
        &self.recipe
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `σ₁ ≥ … ≥ σ_M ≥ 0`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn sigma_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.structure, Structure::Identity)
    }

    /// Orthonormal eigenvectors as columns, matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> Cow<'_, DMatrix<f64>> {
        match &self.structure {
            Structure::Identity => Cow::Owned(DMatrix::identity(self.dim, self.dim)),
            Structure::Diagonal { order, .. } => {
                let mut p = DMatrix::zeros(self.dim, self.dim);
                for (k, &i) in order.iter().enumerate() {
                    p[(i, k)] = 1.0;
                }
                Cow::Owned(p)
            }
            Structure::Dense { vectors, .. } => Cow::Borrowed(vectors),
        }
    }

    pub fn matrix(&self) -> Cow<'_, DMatrix<f64>> {
        match &self.structure {
            Structure::Identity => Cow::Owned(DMatrix::identity(self.dim, self.dim)),
            Structure::Diagonal { entries, .. } => {
                Cow::Owned(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(entries)))
            }
            Structure::Dense { matrix, .. } => Cow::Borrowed(matrix),
        }
    }

    pub fn sqrt_factor(&self) -> &SqrtFactor {
        &self.sqrt
    }

    pub fn sqrt_matrix(&self) -> DMatrix<f64> {
        match &self.sqrt {
            SqrtFactor::Identity => DMatrix::identity(self.dim, self.dim),
            SqrtFactor::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)),
            SqrtFactor::Dense(r) => r.clone(),
        }
    }

    /// `g(Σ) v` for a spectral function `g`.
    pub fn apply_fn(&self, v: &[f64], g: impl Fn(f64) -> f64) -> Vec<f64> {
        match &self.structure {
            Structure::Identity => {
                let c = g(1.0);
                v.iter().map(|x| c * x).collect()
            }
            Structure::Diagonal { entries, .. } => v.iter().zip(entries).map(|(x, &s)| g(s) * x).collect(),
            Structure::Dense { vectors, .. } => {
                let coords = vectors.tr_mul(&linalg::to_dvector(v));
                let scaled = nalgebra::DVector::from_iterator(
                    self.dim,
                    coords.iter().zip(&self.eigenvalues).map(|(c, &s)| g(s) * c),
                );
                (vectors * scaled).iter().copied().collect()
            }
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.apply_fn(v, |s| s)
    }

    pub fn apply_sqrt(&self, v: &[f64]) -> Vec<f64> {
        match &self.sqrt {
            SqrtFactor::Identity => v.to_vec(),
            SqrtFactor::Diagonal(d) => v.iter().zip(d).map(|(x, r)| x * r).collect(),
            SqrtFactor::Dense(r) => (r * linalg::to_dvector(v)).iter().copied().collect(),
        }
    }

    /// `Σ^{1/2} X` for an `M × n` matrix.
    pub fn sqrt_mul(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.sqrt {
            SqrtFactor::Identity => x.clone(),
            SqrtFactor::Diagonal(d) => {
                let mut out = x.clone();
                for (i, &r) in d.iter().enumerate() {
                    out.row_mut(i).scale_mut(r);
                }
                out
            }
            SqrtFactor::Dense(r) => r * x,
        }
    }

    /// Diagonal of `Σ(σ̃ − Σ)⁻¹` in the standard basis.
    pub fn resolvent_diagonal(&self, sigma_tilde: f64) -> Result<Vec<f64>> {
        for &s in &self.eigenvalues {
            if (sigma_tilde - s).abs() < 1e-10 * sigma_tilde.abs() {
                return Err(Error::NearPole { sigma: sigma_tilde, eigenvalue: s });
            }
        }
        let g = |s: f64| s / (sigma_tilde - s);
        Ok(match &self.structure {
            Structure::Identity => vec![g(1.0); self.dim],
            Structure::Diagonal { entries, .. } => entries.iter().map(|&s| g(s)).collect(),
            Structure::Dense { vectors, .. } => (0..self.dim)
                .map(|i| {
                    let mut acc = NeumaierSum::default();
                    for (j, &s) in self.eigenvalues.iter().enumerate() {
                        let o = vectors[(i, j)];
                        acc.add(o * o * g(s));
                    }
                    acc.total()
                })
                .collect(),
        })
    }

    pub fn esd(&self) -> SpectralDistribution {
        SpectralDistribution::from_eigenvalues(&self.eigenvalues)
    }
}

/// `σ_ij = ρ^{|i−j|}`.
pub fn toeplitz(rho: f64, m: usize) -> DMatrix<f64> {
    let mut powers = Vec::with_capacity(m);
    let mut p = 1.0;
    for _ in 0..m {
        powers.push(p);
        p *= rho;
    }
    DMatrix::from_fn(m, m, |i, j| powers[i.abs_diff(j)])
}

/// Haar-distributed orthogonal matrix: QR of a standard Gaussian matrix with
/// the columns of `Q` multiplied by `sign(R_ii)`.
pub fn haar_orthogonal<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DMatrix<f64> {
    let z = DMatrix::from_fn(m, m, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = z.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Discrete spectral measure `ν = (1/M) Σ δ_{σ_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDistribution {
    /// `(value, weight)` with values strictly increasing.
    atoms: Vec<(f64, f64)>,
}

impl SpectralDistribution {
    /// Atoms are the distinct values (exact equality) weighted by multiplicity.
    pub fn from_eigenvalues(values: &[f64]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        let total = sorted.len() as f64;
        let mut atoms: Vec<(f64, f64)> = Vec::new();
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j < sorted.len() && sorted[j] == sorted[i] {
                j += 1;
            }
            atoms.push((sorted[i], (j - i) as f64 / total));
            i = j;
        }
        Self { atoms }
    }

    /// Weights are normalized; values must be non-negative.
    pub fn from_atoms(mut atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidInput("spectral distribution needs at least one atom".into()));
        }
        if atoms.iter().any(|&(v, w)| !(v >= 0.0) || !(w > 0.0) || !v.is_finite() || !w.is_finite()) {
            return Err(Error::InvalidInput("atoms need value ≥ 0 and weight > 0".into()));
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
        let mut total = NeumaierSum::default();
        for &(_, w) in &atoms {
            total.add(w);
        }
        let total = total.total();
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (v, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == v => last.1 += w / total,
                _ => merged.push((v, w / total)),
            }
        }
        Ok(Self { atoms: merged })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn total_weight(&self) -> f64 {
        let mut acc = NeumaierSum::default();
        for &(_, w) in &self.atoms {
            acc.add(w);
        }
        acc.total()
    }

    pub fn sigma_max(&self) -> f64 {
        self.atoms.last().map_or(0.0, |a| a.0)
    }

    /// `∫ g dν`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        let mut acc = NeumaierSum::default();
        for &(s, w) in &self.atoms {
            acc.add(w * g(s));
        }
        acc.total()
    }

    /// `ν([0, t])`.
    pub fn mass_below(&self, t: f64) -> f64 {
        let mut acc = NeumaierSum::default();
        for &(s, w) in &self.atoms {
            if s <= t {
                acc.add(w);
            }
        }
        acc.total()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub pass: bool,
    /// Signed slack; negative when violated. `None` when it cannot be evaluated.
    pub margin: Option<f64>,
    /// The measured quantity the margin refers to.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub tau: f64,
    pub phi: f64,
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Aspect ratio, bounded spectrum, non-degenerate ESD and edge regularity.
/// Violations are reported, never raised.
pub fn check_assumptions(model: &CovarianceModel, n: usize, tau: f64) -> AssumptionReport {
    let phi = model.dim() as f64 / n as f64;
    let nu = model.esd();
    let sigma1 = model.sigma_max();
    let mut checks = Vec::with_capacity(4);

    let ratio_margin = (phi - tau).min(1.0 / tau - phi);
    checks.push(AssumptionCheck {
        name: "aspect_ratio",
        pass: ratio_margin >= 0.0,
        margin: Some(ratio_margin),
        value: Some(phi),
    });

    let norm_margin = 1.0 / tau - sigma1;
    checks.push(AssumptionCheck {
        name: "bounded_norm",
        pass: norm_margin >= 0.0,
        margin: Some(norm_margin),
        value: Some(sigma1),
    });

    let low_mass = nu.mass_below(tau);
    let mass_margin = (1.0 - tau) - low_mass;
    checks.push(AssumptionCheck {
        name: "nondegenerate_spectrum",
        pass: mass_margin >= 0.0,
        margin: Some(mass_margin),
        value: Some(low_mass),
    });

    let regularity = stieltjes::find_w_plus(&nu, phi).ok().map(|edge| edge.w_plus + 1.0 / sigma1);
    checks.push(AssumptionCheck {
        name: "edge_regularity",
        pass: regularity.is_some_and(|r| r >= tau),
        margin: regularity.map(|r| r - tau),
        value: regularity,
    });

    AssumptionReport { tau, phi, checks }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_entry_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        linalg::max_abs(&(a - b))
    }

    #[test]
    fn identity_recipe() {
        let s = CovarianceModel::new(CovarianceRecipe::Identity, 200).unwrap();
        assert!(s.eigenvalues().iter().all(|&x| x == 1.0));
        assert!(matches!(s.sqrt_factor(), SqrtFactor::Identity));
        assert_eq!(s.esd().atoms(), &[(1.0, 1.0)]);
    }

    #[test]
    fn toeplitz_three_by_three() {
        let s = CovarianceModel::new(CovarianceRecipe::Toeplitz { rho: 0.1 }, 3).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.01, 0.1, 1.0, 0.1, 0.01, 0.1, 1.0]);
        assert!(max_entry_error(&s.matrix(), &expected) < 1e-15);
        // characteristic polynomial roots: 1 − ρ², and 1 + ρ²/2 ± ρ√(2 + ρ²/4)
        let r: f64 = 0.1;
        let c = r * r / 2.0;
        let disc = (2.0 + r * r / 4.0).sqrt();
        let mut oracle = [1.0 + c + r * disc, 1.0 - r * r, 1.0 + c - r * disc];
        oracle.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let atoms = s.esd();
        assert_eq!(atoms.atoms().len(), 3);
        for (k, &v) in s.eigenvalues().iter().enumerate() {
            assert!((v - oracle[k]).abs() < 1e-10, "{v} vs {}", oracle[k]);
        }
        for &(_, w) in atoms.atoms() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn haar_recipe_spectrum_and_basis() {
        let s = CovarianceModel::new(CovarianceRecipe::HaarRotated { a: 1.0, b: 1.5, seed: 11 }, 50).unwrap();
        assert!(s.eigenvalues().iter().all(|&x| (1.0..=1.5).contains(&x)));
        assert!(linalg::orthonormality_defect(&s.eigenvectors()) < 1e-10);
        let rec = linalg::spectral_matrix(s.eigenvalues(), &s.eigenvectors(), |x| x);
        assert!(max_entry_error(&rec, &s.matrix()) < 1e-9 * s.sigma_max());
        let r = s.sqrt_matrix();
        assert!(max_entry_error(&(&r * &r), &s.matrix()) < 1e-10);
        let again = CovarianceModel::new(s.recipe().clone(), 50).unwrap();
        assert_eq!(again.matrix().as_slice(), s.matrix().as_slice());
    }

    #[test]
    fn haar_column_statistics() {
        let mut rng = rng::stream(99);
        let m = 64;
        let q = haar_orthogonal(m, &mut rng);
        let col = linalg::column(&q, 0);
        let mean = col.iter().sum::<f64>() / m as f64;
        assert!(mean.abs() <= 4.0 / (m as f64).sqrt());
        assert!((linalg::norm(&col).powi(2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dense_rejects_non_psd() {
        let rows = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        match CovarianceModel::new(CovarianceRecipe::Dense { rows }, 2) {
            Err(Error::NotPsd { eigenvalue }) => assert!((eigenvalue + 1.0).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn diagonal_esd_merges_atoms() {
        let s = CovarianceModel::new(CovarianceRecipe::Diagonal { entries: vec![1.0, 2.0, 1.0, 2.0] }, 4).unwrap();
        assert_eq!(s.esd().atoms(), &[(1.0, 0.5), (2.0, 0.5)]);
        assert_eq!(s.eigenvalues(), &[2.0, 2.0, 1.0, 1.0]);
        let rec = linalg::spectral_matrix(s.eigenvalues(), &s.eigenvectors(), |x| x);
        assert!(max_entry_error(&rec, &s.matrix()) < 1e-15);
    }

    #[test]
    fn resolvent_diagonal_matches_dense_inverse() {
        let s = CovarianceModel::new(CovarianceRecipe::Toeplitz { rho: 0.3 }, 6).unwrap();
        let st = 4.0;
        let d = s.resolvent_diagonal(st).unwrap();
        let shifted = DMatrix::identity(6, 6) * st - s.matrix().into_owned();
        let full = s.matrix().into_owned() * shifted.try_inverse().unwrap();
        for i in 0..6 {
            assert!((d[i] - full[(i, i)]).abs() < 1e-13);
        }
    }

    #[test]
    fn assumption_report_cases() {
        let s = CovarianceModel::new(CovarianceRecipe::Identity, 100).unwrap();
        let rep = check_assumptions(&s, 200, 0.1);
        assert!(rep.all_pass());
        let reg = rep.get("edge_regularity").unwrap().value.unwrap();
        assert!((reg - (1.0 - 1.0 / (1.0 + 0.5f64.sqrt()))).abs() < 1e-9);

        let big = CovarianceModel::new(CovarianceRecipe::Diagonal { entries: vec![20.0, 1.0, 1.0] }, 3).unwrap();
        let rep = check_assumptions(&big, 6, 0.1);
        let c = rep.get("bounded_norm").unwrap();
        assert!(!c.pass && (c.margin.unwrap() + 10.0).abs() < 1e-12);

        let zero = CovarianceModel::new(CovarianceRecipe::Diagonal { entries: vec![0.0; 4] }, 4).unwrap();
        let rep = check_assumptions(&zero, 8, 0.1);
        assert!(!rep.get("nondegenerate_spectrum").unwrap().pass);
        assert!(!rep.get("edge_regularity").unwrap().pass);
    }
}
