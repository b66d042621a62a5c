//! Standardized entry laws for `√N·x_{iμ}`.
//!
//! Every law has mean 0 and variance 1. Cumulants of the named laws are the
//! exact rational constants; discrete laws given by the user are standardized
//! and their cumulants computed from the standardized atoms.

use alloc::format;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::stats::NeumaierSum;

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields, from = "NoiseKindRepr")]
pub enum NoiseKind {
    Gaussian,
    /// `Unif(−√3, √3)`.
    UniformSym,
    /// `P(±√3) = 1/6`, `P(0) = 2/3`.
    ThreePoint,
    /// `P(±1/√2) = 4/9`, `P(±√5) = 1/18`.
    FourPoint,
    /// `Exp(1) − 1`.
    ShiftedExponential,
    /// Arbitrary finite law; standardized on construction.
    Discrete {
        atoms: Vec<f64>,
        probs: Vec<f64>,
    },
}

/// Serde accepts stray keys on internally tagged unit variants; empty struct
/// variants make `deny_unknown_fields` apply to every kind.
#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum NoiseKindRepr {
    Gaussian {},
    UniformSym {},
    ThreePoint {},
    FourPoint {},
    ShiftedExponential {},
    Discrete { atoms: Vec<f64>, probs: Vec<f64> },
}

impl From<NoiseKindRepr> for NoiseKind {
    fn from(r: NoiseKindRepr) -> Self {
        match r {
            NoiseKindRepr::Gaussian {} => NoiseKind::Gaussian,
            NoiseKindRepr::UniformSym {} => NoiseKind::UniformSym,
            NoiseKindRepr::ThreePoint {} => NoiseKind::ThreePoint,
            NoiseKindRepr::FourPoint {} => NoiseKind::FourPoint,
            NoiseKindRepr::ShiftedExponential {} => NoiseKind::ShiftedExponential,
            NoiseKindRepr::Discrete { atoms, probs } => NoiseKind::Discrete { atoms, probs },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "NoiseKind", try_from = "NoiseKind")]
pub struct NoiseLaw {
    kind: NoiseKind,
    /// Standardized support with cumulative probabilities, for finite laws.
    support: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
    kappa3: f64,
    kappa4: f64,
}

impl From<NoiseLaw> for NoiseKind {
    fn from(law: NoiseLaw) -> Self {
        law.kind
    }
}

impl TryFrom<NoiseKind> for NoiseLaw {
    type Error = Error;
    fn try_from(kind: NoiseKind) -> Result<Self> {
        NoiseLaw::new(kind)
    }
}

impl NoiseLaw {
    pub fn new(kind: NoiseKind) -> Result<Self> {
        let (support, kappa3, kappa4) = match &kind {
            NoiseKind::Gaussian => (Vec::new(), 0.0, 0.0),
            // E x⁴ = 9/5
            NoiseKind::UniformSym => (Vec::new(), 0.0, -1.2),
            NoiseKind::ShiftedExponential => (Vec::new(), 2.0, 6.0),
            NoiseKind::ThreePoint => (alloc::vec![(-SQRT3, 1.0 / 6.0), (0.0, 2.0 / 3.0), (SQRT3, 1.0 / 6.0)], 0.0, 0.0),
            NoiseKind::FourPoint => {
                let (a, b) = (core::f64::consts::FRAC_1_SQRT_2, math::sqrt(5.0));
                (alloc::vec![(-b, 1.0 / 18.0), (-a, 4.0 / 9.0), (a, 4.0 / 9.0), (b, 1.0 / 18.0)], 0.0, 0.0)
            }
            NoiseKind::Discrete { atoms, probs } => standardize(atoms, probs)?,
        };
        let mut cumulative = Vec::with_capacity(support.len());
        let mut acc = 0.0;
        for &(_, p) in &support {
            acc += p;
            cumulative.push(acc);
        }
        Ok(Self { kind, support, cumulative, kappa3, kappa4 })
    }

    pub fn gaussian() -> Self {
        Self::new(NoiseKind::Gaussian).expect("built-in law")
    }

    pub fn kind(&self) -> &NoiseKind {
        &self.kind
    }

    /// Short stable label used in file names and tables.
    pub fn label(&self) -> &'static str {
        match self.kind {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::UniformSym => "uniform",
            NoiseKind::ThreePoint => "three_point",
            NoiseKind::FourPoint => "four_point",
            NoiseKind::ShiftedExponential => "shifted_exponential",
            NoiseKind::Discrete { .. } => "discrete",
        }
    }

    /// Third cumulant.
    pub fn kappa3(&self) -> f64 {
        self.kappa3
    }

    /// Fourth cumulant (excess kurtosis).
    pub fn kappa4(&self) -> f64 {
        self.kappa4
    }

    /// Standardized `(atom, probability)` pairs of a finite law.
    pub fn support(&self) -> &[(f64, f64)] {
        &self.support
    }

    /// `E e^{itx}`.
    pub fn cf(&self, t: f64) -> Complex64 {
        match self.kind {
            NoiseKind::Gaussian => Complex64::new(math::exp(-0.5 * t * t), 0.0),
            NoiseKind::UniformSym => {
                let a = SQRT3 * t;
                if a.abs() < 1e-8 {
                    Complex64::new(1.0 - a * a / 6.0, 0.0)
                } else {
                    Complex64::new(math::sin(a) / a, 0.0)
                }
            }
            NoiseKind::ShiftedExponential => {
                // e^{−it}/(1 − it)
                let phase = Complex64::new(math::cos(t), -math::sin(t));
                phase / Complex64::new(1.0, -t)
            }
            _ => {
                let (mut re, mut im) = (NeumaierSum::default(), NeumaierSum::default());
                for &(x, p) in &self.support {
                    re.add(p * math::cos(t * x));
                    im.add(p * math::sin(t * x));
                }
                Complex64::new(re.total(), im.total())
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => rng.sample(StandardNormal),
            NoiseKind::UniformSym => SQRT3 * (2.0 * rng.random::<f64>() - 1.0),
            NoiseKind::ShiftedExponential => {
                let e: f64 = rng.sample(Exp1);
                e - 1.0
            }
            _ => {
                let u: f64 = rng.random();
                let idx = self.cumulative.partition_point(|&c| c <= u).min(self.support.len() - 1);
                self.support[idx].0
            }
        }
    }

    /// `rows × cols` matrix of i.i.d. draws times `scale`, filled column by column.
    pub fn sample_matrix<R: Rng + ?Sized>(
        &self,
        rows: usize,
        cols: usize,
        scale: f64,
        rng: &mut R,
    ) -> nalgebra::DMatrix<f64> {
        let data: Vec<f64> = (0..rows * cols).map(|_| scale * self.sample(rng)).collect();
        nalgebra::DMatrix::from_vec(rows, cols, data)
    }
}

fn standardize(atoms: &[f64], probs: &[f64]) -> Result<(Vec<(f64, f64)>, f64, f64)> {
    if atoms.len() != probs.len() || atoms.is_empty() {
        return Err(Error::InvalidLaw(format!("{} atoms but {} probabilities", atoms.len(), probs.len())));
    }
    if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) || atoms.iter().any(|a| !a.is_finite()) {
        return Err(Error::InvalidLaw("probabilities must be finite and non-negative".into()));
    }
    let mut total = NeumaierSum::default();
    for &p in probs {
        total.add(p);
    }
    let total = total.total();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidLaw(format!("probabilities sum to {total}, not 1")));
    }
    let moment = |k: i32, shift: f64, scale: f64| {
        let mut acc = NeumaierSum::default();
        for (&a, &p) in atoms.iter().zip(probs) {
            acc.add(p / total * libm::pow((a - shift) / scale, k as f64));
        }
        acc.total()
    };
    let mu = moment(1, 0.0, 1.0);
    let var = moment(2, mu, 1.0);
    if !(var > 0.0) {
        return Err(Error::InvalidLaw("law has zero variance".into()));
    }
    let sd = math::sqrt(var);
    let mut support: Vec<(f64, f64)> =
        atoms.iter().zip(probs).filter(|(_, &p)| p > 0.0).map(|(&a, &p)| ((a - mu) / sd, p / total)).collect();
    support.sort_by(|a, b| a.0.total_cmp(&b.0));
    let k3 = moment(3, mu, sd);
    let k4 = moment(4, mu, sd) - 3.0;
    Ok((support, k3, k4))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    /// Even moments from squared atoms, which are rational for the named laws.
    fn even_moments(squares_probs: &[(Q, Q)]) -> (Q, Q) {
        let m2 = squares_probs.iter().map(|&(s, p)| s * p).sum();
        let m4 = squares_probs.iter().map(|&(s, p)| s * s * p).sum();
        (m2, m4)
    }

    #[test]
    fn named_laws_match_gaussian_moments_exactly() {
        let three = [(Q::new(3, 1), Q::new(1, 3)), (Q::new(0, 1), Q::new(2, 3))];
        assert_eq!(even_moments(&three), (Q::new(1, 1), Q::new(3, 1)));
        let four = [(Q::new(1, 2), Q::new(8, 9)), (Q::new(5, 1), Q::new(1, 9))];
        assert_eq!(even_moments(&four), (Q::new(1, 1), Q::new(3, 1)));
        for kind in [NoiseKind::Gaussian, NoiseKind::ThreePoint, NoiseKind::FourPoint] {
            let law = NoiseLaw::new(kind).unwrap();
            assert_eq!((law.kappa3(), law.kappa4()), (0.0, 0.0));
        }
        // Unif(−√3, √3): E x⁴ = 9/5
        assert_eq!(Q::new(9, 5) - Q::new(3, 1), Q::new(-6, 5));
        assert_eq!(NoiseLaw::new(NoiseKind::UniformSym).unwrap().kappa4(), -1.2);
        let e = NoiseLaw::new(NoiseKind::ShiftedExponential).unwrap();
        assert_eq!((e.kappa3(), e.kappa4()), (2.0, 6.0));
    }

    #[test]
    fn discrete_is_standardized() {
        let law =
            NoiseLaw::new(NoiseKind::Discrete { atoms: alloc::vec![0.0, 1.0], probs: alloc::vec![0.5, 0.5] }).unwrap();
        let s = law.support();
        let m1: f64 = s.iter().map(|(x, p)| x * p).sum();
        let m2: f64 = s.iter().map(|(x, p)| x * x * p).sum();
        assert!(m1.abs() < 1e-12 && (m2 - 1.0).abs() < 1e-12);
        assert!(law.kappa3().abs() < 1e-12 && (law.kappa4() + 2.0).abs() < 1e-12);
        assert!(NoiseLaw::new(NoiseKind::Discrete { atoms: alloc::vec![1.0], probs: alloc::vec![0.9] }).is_err());
        assert!(
            NoiseLaw::new(NoiseKind::Discrete { atoms: alloc::vec![1.0, 2.0], probs: alloc::vec![1.0, 0.0] }).is_err()
        );
    }

    #[test]
    fn cf_against_closed_forms() {
        let t = 0.7;
        let three = NoiseLaw::new(NoiseKind::ThreePoint).unwrap().cf(t);
        assert!((three.re - (2.0 / 3.0 + (SQRT3 * t).cos() / 3.0)).abs() < 1e-15 && three.im.abs() < 1e-15);
        let g = NoiseLaw::gaussian().cf(t);
        assert!((g.re - (-t * t / 2.0).exp()).abs() < 1e-15);
        let e = NoiseLaw::new(NoiseKind::ShiftedExponential).unwrap();
        // second-order expansion 1 − t²/2 near 0
        let c = e.cf(1e-3);
        assert!((c.re - (1.0 - 0.5e-6)).abs() < 1e-9 && c.im.abs() < 1e-8);
        for law in [NoiseKind::UniformSym, NoiseKind::FourPoint, NoiseKind::ShiftedExponential] {
            let law = NoiseLaw::new(law).unwrap();
            for k in 0..20 {
                assert!(law.cf(k as f64 * 0.37).norm() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn samplers_have_unit_variance() {
        let mut rng = crate::rng::stream(5);
        for kind in [
            NoiseKind::Gaussian,
            NoiseKind::UniformSym,
            NoiseKind::ThreePoint,
            NoiseKind::FourPoint,
            NoiseKind::ShiftedExponential,
        ] {
            let law = NoiseLaw::new(kind).unwrap();
            let xs: Vec<f64> = (0..40_000).map(|_| law.sample(&mut rng)).collect();
            let m = crate::stats::mean(&xs);
            let v = crate::stats::variance(&xs);
            assert!(m.abs() < 0.03 && (v - 1.0).abs() < 0.06, "{}: {m} {v}", law.label());
        }
    }

    #[test]
    fn serde_round_trip() {
        let law = NoiseLaw::new(NoiseKind::ThreePoint).unwrap();
        let kind: NoiseKind = law.clone().into();
        assert_eq!(NoiseLaw::try_from(kind).unwrap(), law);
    }
}
