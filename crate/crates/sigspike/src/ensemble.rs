//! Seeded parallel Monte Carlo for spiked eigenvalues.
//!
//! Replication `r` draws its noise from `derive_seed(master, NOISE, r)` and
//! writes only its own slot; results are collected in replication order, so
//! output is identical for any number of worker threads.

use rayon::prelude::*;
use serde::Serialize;
use sigspike_core::linalg::EigenMethod;
use sigspike_core::noise::{NoiseKind, NoiseLaw};
use sigspike_core::rng::{self, domains};
use sigspike_core::sampling::{self, Model};
use sigspike_core::spectra::CovarianceModel;
use sigspike_core::spikes::{self, DeformedPopulation, SignalModel, SpikeTheory};
use sigspike_core::{stats, Complex64, DMatrix};

use crate::config::ModelSpec;
use crate::error::{AppError, AppResult};
use crate::histogram::{self, Histogram};
use crate::output::{fmt_sig, Table};

/// Everything deterministic about one model, computed once.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: ModelSpec,
    pub sigma: CovarianceModel,
    pub signal: Option<SignalModel>,
    pub law: NoiseLaw,
    pub pop: Option<DeformedPopulation>,
    pub theory: Option<SpikeTheory>,
    tilde_sqrt: Option<DMatrix<f64>>,
}

impl Prepared {
    pub fn new(spec: &ModelSpec) -> AppResult<Self> {
        let sigma = spec.covariance()?;
        let law = spec.noise()?;
        let signal = spec.signal.as_ref().map(|s| s.build(spec.m, spec.n)).transpose()?;
        let (pop, theory) = match &signal {
            Some(s) => {
                let pop = spikes::deform(&sigma, s, spec.tau)?;
                let theory =
                    if pop.k0 > 0 { Some(spikes::asymptotic_quantities(&sigma, s, &pop, &law)?) } else { None };
                (Some(pop), theory)
            }
            None => (None, None),
        };
        Ok(Self { spec: spec.clone(), sigma, signal, law, pop, theory, tilde_sqrt: None })
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn m(&self) -> usize {
        self.spec.m
    }

    /// `θ_k` for the supercritical spikes.
    pub fn theta_limits(&self) -> Vec<f64> {
        self.theory.as_ref().map_or_else(Vec::new, |t| t.spikes.iter().map(|s| s.theta).collect())
    }

    fn ensure_tilde_sqrt(&mut self) {
        if self.tilde_sqrt.is_none() {
            self.tilde_sqrt = Some(match &self.signal {
                Some(s) => sampling::tilde_sqrt(&self.sigma, s),
                None => self.sigma.sqrt_matrix(),
            });
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McOptions {
    pub reps: usize,
    pub master_seed: u64,
    pub model: Model,
    pub couple_theta: bool,
    /// Eigenvalues recorded per replication.
    pub eigenvalues: usize,
    pub method: EigenMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikeRecord {
    pub rep: usize,
    pub seed: u64,
    /// Top eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// `√N(λ_k − θ_k)` for the supercritical spikes.
    pub fluctuations: Vec<f64>,
    /// `Θ_k` from the same noise draw.
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpikeSamples {
    pub model: Model,
    pub law: String,
    pub m: usize,
    pub n: usize,
    pub master_seed: u64,
    pub theta_limits: Vec<f64>,
    pub records: Vec<SpikeRecord>,
}

impl SpikeSamples {
    pub fn eigenvalue(&self, k: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.eigenvalues[k]).collect()
    }

    pub fn fluctuation(&self, k: usize) -> Vec<f64> {
        self.records.iter().map(|r| r.fluctuations[k]).collect()
    }

    pub fn theta_component(&self, k: usize) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.theta.as_ref().map(|t| t[k])).collect()
    }

    /// One row per replication.
    pub fn to_table(&self, digits: usize) -> Table {
        let r = self.records.first().map_or(0, |x| x.eigenvalues.len());
        let k0 = self.theta_limits.len();
        let coupled = self.records.first().is_some_and(|x| x.theta.is_some());
        let mut header = vec!["rep".to_string(), "seed".to_string()];
        header.extend((1..=r).map(|k| format!("lambda_{k}")));
        header.extend((1..=k0).map(|k| format!("fluct_{k}")));
        if coupled {
            header.extend((1..=k0).map(|k| format!("theta_{k}")));
        }
        let mut t = Table::new(header);
        for rec in &self.records {
            let mut row = vec![rec.rep.to_string(), rec.seed.to_string()];
            row.extend(rec.eigenvalues.iter().map(|&x| fmt_sig(x, digits)));
            row.extend(rec.fluctuations.iter().map(|&x| fmt_sig(x, digits)));
            if let Some(th) = &rec.theta {
                row.extend(th.iter().map(|&x| fmt_sig(x, digits)));
            }
            t.push(row);
        }
        t
    }
}

/// Draws `reps` independent replications.
pub fn run_spike_mc(prep: &mut Prepared, opts: &McOptions) -> AppResult<SpikeSamples> {
    if opts.couple_theta && prep.theory.is_none() {
        return Err(AppError::Config("coupling Θ needs at least one supercritical spike".into()));
    }
    let r = opts.eigenvalues.max(prep.theory.as_ref().map_or(0, SpikeTheory::k0)).max(1);
    if opts.model == Model::Multiplicative {
        prep.ensure_tilde_sqrt();
    }
    let prep = &*prep;
    let limits = prep.theta_limits();
    let rn = (prep.n() as f64).sqrt();
    let records = (0..opts.reps)
        .into_par_iter()
        .map(|rep| {
            let seed = rng::derive_seed(opts.master_seed, domains::NOISE, rep as u64);
            let mut stream = rng::stream(seed);
            let x = sampling::sample_noise(prep.m(), prep.n(), &prep.law, &mut stream);
            let data = match opts.model {
                Model::Additive => {
                    let mut y = prep.sigma.sqrt_mul(&x);
                    if let Some(s) = &prep.signal {
                        y += s.dense();
                    }
                    y
                }
                Model::Multiplicative => prep.tilde_sqrt.as_ref().expect("prepared") * &x,
            };
            let eigenvalues = sampling::top_eigs(&data, r, opts.method)?;
            let fluctuations = limits.iter().zip(&eigenvalues).map(|(t, l)| rn * (l - t)).collect();
            let theta = opts.couple_theta.then(|| sampling::coupled_theta(&x, prep.theory.as_ref().expect("checked")));
            Ok(SpikeRecord { rep, seed, eigenvalues, fluctuations, theta })
        })
        .collect::<Result<Vec<_>, sigspike_core::Error>>()?;
    Ok(SpikeSamples {
        model: opts.model,
        law: prep.law.label().to_string(),
        m: prep.m(),
        n: prep.n(),
        master_seed: opts.master_seed,
        theta_limits: limits,
        records,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CfCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub distance: f64,
}

/// Empirical `E exp(i(Φ + Θ))` against `exp(−(V + 2W)/2) E exp(iΘ)` with
/// `Φ = Σ s_kΦ_k` and `Θ = Σ t_kΘ_k`.
pub fn empirical_cf_check(
    samples: &SpikeSamples,
    theory: &SpikeTheory,
    law: &NoiseLaw,
    s: &[f64],
    t: &[f64],
) -> AppResult<CfCheck> {
    let k0 = theory.k0();
    if s.len() > k0 || t.len() > k0 {
        return Err(AppError::Config(format!("coefficient vectors longer than K0 = {k0}")));
    }
    let coef = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
    let (mut re, mut im) = (stats::NeumaierSum::default(), stats::NeumaierSum::default());
    for rec in &samples.records {
        let th = rec.theta.as_ref().ok_or_else(|| AppError::Config("samples carry no coupled Θ".into()))?;
        let mut arg = 0.0;
        for k in 0..k0 {
            let phi = rec.fluctuations[k] - th[k] - theory.spikes[k].l;
            arg += coef(s, k) * phi + coef(t, k) * th[k];
        }
        re.add(arg.cos());
        im.add(arg.sin());
    }
    let count = samples.records.len().max(1) as f64;
    let lhs = Complex64::new(re.total() / count, im.total() / count);
    let rhs =
        spikes::theta_component_cf(t, theory, law) * (-(theory.v_form(s) + 2.0 * theory.w_form(s, t)) / 2.0).exp();
    Ok(CfCheck { lhs, rhs, distance: (lhs - rhs).norm() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateStudy {
    pub n_small: usize,
    pub n_large: usize,
    pub median_small: f64,
    pub median_large: f64,
    pub factor: f64,
}

/// Median `|λ₁ − θ₁|` at two sizes built by `spec_at(n)`.
pub fn rate_study(
    spec_at: impl Fn(usize) -> ModelSpec,
    n_small: usize,
    n_large: usize,
    reps: usize,
    master_seed: u64,
) -> AppResult<RateStudy> {
    let median_at = |n: usize| -> AppResult<f64> {
        let mut prep = Prepared::new(&spec_at(n))?;
        if prep.theory.is_none() {
            return Err(AppError::Config(format!("no supercritical spike at N = {n}")));
        }
        let opts = McOptions {
            reps,
            master_seed,
            model: Model::Additive,
            couple_theta: false,
            eigenvalues: 1,
            method: EigenMethod::Auto,
        };
        let samples = run_spike_mc(&mut prep, &opts)?;
        let theta = samples.theta_limits[0];
        let dev: Vec<f64> = samples.eigenvalue(0).iter().map(|l| (l - theta).abs()).collect();
        Ok(stats::median(&dev))
    };
    let (a, b) = (median_at(n_small)?, median_at(n_large)?);
    Ok(RateStudy { n_small, n_large, median_small: a, median_large: b, factor: a / b })
}

/// Pairwise KS distances and common-edge histograms of `λ₁`, one sample per
/// law and model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonuniversalityReport {
    pub laws: Vec<String>,
    /// `(model, law_a, law_b, KS distance)`.
    pub ks: Vec<(Model, String, String, f64)>,
    /// `(model, law, histogram)`.
    pub histograms: Vec<(Model, String, Histogram)>,
    /// Empirical `P(Θ₁/(2θ′₁d₁) = 0)` per law.
    pub theta_zero_mass: Vec<(String, f64)>,
    pub samples: Vec<SpikeSamples>,
}

impl NonuniversalityReport {
    pub fn max_ks(&self, model: Model) -> f64 {
        self.ks.iter().filter(|k| k.0 == model).map(|k| k.3).fold(0.0, f64::max)
    }

    pub fn samples_for(&self, model: Model, law: &str) -> Option<&SpikeSamples> {
        self.samples.iter().find(|s| s.model == model && s.law == law)
    }

    /// Bin data, one row per (model, law, bin).
    pub fn histogram_table(&self, digits: usize) -> Table {
        let mut t = Table::new(["model", "law", "bin_left", "bin_right", "count", "density"]);
        for (model, law, h) in &self.histograms {
            for (i, &c) in h.counts.iter().enumerate() {
                t.push([
                    model.label().to_string(),
                    law.clone(),
                    fmt_sig(h.edges[i], digits),
                    fmt_sig(h.edges[i + 1], digits),
                    c.to_string(),
                    fmt_sig(h.density[i], digits),
                ]);
            }
        }
        t
    }
}

/// Runs both models under every law with shared seeds.
pub fn nonuniversality(
    base: &ModelSpec,
    laws: &[NoiseKind],
    reps: usize,
    master_seed: u64,
    max_bins: usize,
) -> AppResult<NonuniversalityReport> {
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut zero_mass = Vec::new();
    for law in laws {
        let spec = ModelSpec { law: law.clone(), ..base.clone() };
        let mut prep = Prepared::new(&spec)?;
        let theory = prep.theory.clone().ok_or_else(|| AppError::Config("no supercritical spike".into()))?;
        labels.push(prep.law.label().to_string());
        for model in [Model::Additive, Model::Multiplicative] {
            let couple = model == Model::Additive;
            let opts =
                McOptions { reps, master_seed, model, couple_theta: couple, eigenvalues: 1, method: EigenMethod::Auto };
            let s = run_spike_mc(&mut prep, &opts)?;
            if couple {
                let sp = &theory.spikes[0];
                let scale = 2.0
                    * sp.theta_prime
                    * sp.s_top_psi.iter().map(|x| x * x).sum::<f64>().sqrt()
                    * sp.sqrt_sigma_psi.iter().map(|x| x * x).sum::<f64>().sqrt();
                let th = s.theta_component(0).expect("coupled");
                let zeros = th.iter().filter(|&&v| (v / scale).abs() < 1e-9).count();
                zero_mass.push((prep.law.label().to_string(), zeros as f64 / reps.max(1) as f64));
            }
            samples.push(s);
        }
    }
    let mut ks = Vec::new();
    let mut histograms = Vec::new();
    for model in [Model::Additive, Model::Multiplicative] {
        let group: Vec<&SpikeSamples> = samples.iter().filter(|s| s.model == model).collect();
        let lambdas: Vec<Vec<f64>> = group.iter().map(|s| s.eigenvalue(0)).collect();
        for i in 0..group.len() {
            for j in (i + 1)..group.len() {
                ks.push((
                    model,
                    group[i].law.clone(),
                    group[j].law.clone(),
                    stats::ks_two_sample(&lambdas[i], &lambdas[j]),
                ));
            }
        }
        let refs: Vec<&[f64]> = lambdas.iter().map(Vec::as_slice).collect();
        let edges = histogram::common_edges(&refs, max_bins);
        for (s, l) in group.iter().zip(&lambdas) {
            histograms.push((model, s.law.clone(), histogram::histogram(l, &edges)));
        }
    }
    Ok(NonuniversalityReport { laws: labels, ks, histograms, theta_zero_mass: zero_mass, samples })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelSpec {
        ModelSpec::localized_identity(20, 40, 5.25f64.sqrt(), NoiseKind::Gaussian)
    }

    #[test]
    fn replications_are_schedule_independent() {
        let mut prep = Prepared::new(&small()).unwrap();
        let opts = McOptions {
            reps: 12,
            master_seed: 5,
            model: Model::Additive,
            couple_theta: true,
            eigenvalues: 2,
            method: EigenMethod::Auto,
        };
        let a = run_spike_mc(&mut prep, &opts).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| run_spike_mc(&mut prep, &opts).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 12);
        assert!(a.records.iter().all(|r| r.eigenvalues[0] >= r.eigenvalues[1]));
    }

    #[test]
    fn zero_coefficients_give_unit_cf() {
        let mut prep = Prepared::new(&small()).unwrap();
        let opts = McOptions {
            reps: 5,
            master_seed: 1,
            model: Model::Additive,
            couple_theta: true,
            eigenvalues: 1,
            method: EigenMethod::Auto,
        };
        let s = run_spike_mc(&mut prep, &opts).unwrap();
        let c = empirical_cf_check(&s, prep.theory.as_ref().unwrap(), &prep.law, &[0.0], &[0.0]).unwrap();
        assert_eq!(c.lhs, Complex64::new(1.0, 0.0));
        assert_eq!(c.rhs, Complex64::new(1.0, 0.0));
        assert!(c.lhs.norm() <= 1.0 + 1e-12 && c.rhs.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn missing_coupling_is_an_error() {
        let mut prep = Prepared::new(&small()).unwrap();
        let opts = McOptions {
            reps: 3,
            master_seed: 1,
            model: Model::Additive,
            couple_theta: false,
            eigenvalues: 1,
            method: EigenMethod::Auto,
        };
        let s = run_spike_mc(&mut prep, &opts).unwrap();
        assert!(empirical_cf_check(&s, prep.theory.as_ref().unwrap(), &prep.law, &[1.0], &[0.0]).is_err());
    }

    #[test]
    fn multiplicative_matches_additive_for_pure_noise() {
        let spec = ModelSpec { signal: None, ..small() };
        let mut prep = Prepared::new(&spec).unwrap();
        let mk = |model| McOptions {
            reps: 4,
            master_seed: 2,
            model,
            couple_theta: false,
            eigenvalues: 3,
            method: EigenMethod::Svd,
        };
        let a = run_spike_mc(&mut prep, &mk(Model::Additive)).unwrap();
        let b = run_spike_mc(&mut prep, &mk(Model::Multiplicative)).unwrap();
        for (x, y) in a.records.iter().zip(&b.records) {
            for (p, q) in x.eigenvalues.iter().zip(&y.eigenvalues) {
                assert!((p - q).abs() < 1e-10);
            }
        }
    }
}
