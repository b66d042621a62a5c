//! Critical-value calibration and size/power experiments for the DS and RS
//! tests.
//!
//! Each cell of a grid gets its own seed `derive_seed(master, CELL, index)`
//! and replication `r` of a cell draws everything (centers, then noise) from
//! `derive_seed(cell_seed, NOISE, r)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sigspike_core::hetero::{self, CriticalValues, RatioStats};
use sigspike_core::linalg::EigenMethod;
use sigspike_core::noise::{NoiseKind, NoiseLaw};
use sigspike_core::rng::{self, domains};
use sigspike_core::sampling;
use sigspike_core::spectra::{CovarianceModel, CovarianceRecipe};
use sigspike_core::stats;

use crate::config::{validate_calibration, CalibrateSpec};
use crate::error::{AppError, AppResult};
use crate::output::{fmt_sig, Table};

const CELL: u64 = rng::domain("experiment-cell");

/// Calibration result with the null samples kept for plotting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub cv: CriticalValues,
    #[serde(skip)]
    pub samples: Vec<RatioStats>,
}

pub fn calibrate(spec: &CalibrateSpec, reps: usize, master_seed: u64) -> AppResult<Calibration> {
    validate_calibration(spec)?;
    if reps < 100 {
        return Err(AppError::Config(format!("calibration needs at least 100 replications, got {reps}")));
    }
    let samples = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut s = rng::stream(rng::derive_seed(master_seed, domains::CALIBRATION, r as u64));
            hetero::calibration_replicate(spec.k_star, spec.n_star, &mut s)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let ds: Vec<f64> = samples.iter().map(|s| s.ds).collect();
    let rs: Vec<f64> = samples.iter().map(|s| s.rs).collect();
    let cv = CriticalValues {
        k_star: spec.k_star,
        n_star: spec.n_star,
        reps,
        quantile: spec.quantile,
        cv_ds: stats::nearest_rank_quantile(&ds, spec.quantile),
        cv_rs: stats::nearest_rank_quantile(&rs, spec.quantile),
        master_seed,
    };
    Ok(Calibration { cv, samples })
}

/// The three population covariances of the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaChoice {
    /// `I`.
    Identity,
    /// `σ_ij = 0.1^{|i−j|}`.
    Toeplitz,
    /// Haar-rotated `Unif(1, 1.5)` spectrum.
    HaarUniform,
}

impl SigmaChoice {
    pub const ALL: [SigmaChoice; 3] = [SigmaChoice::Identity, SigmaChoice::Toeplitz, SigmaChoice::HaarUniform];

    pub fn label(&self) -> &'static str {
        match self {
            SigmaChoice::Identity => "Sigma1",
            SigmaChoice::Toeplitz => "Sigma2",
            SigmaChoice::HaarUniform => "Sigma3",
        }
    }

    /// The Haar draw is keyed by the experiment's master seed, so every cell
    /// of one experiment sees the same `Σ₃` at a given dimension.
    pub fn recipe(&self, master_seed: u64) -> CovarianceRecipe {
        match self {
            SigmaChoice::Identity => CovarianceRecipe::Identity,
            SigmaChoice::Toeplitz => CovarianceRecipe::Toeplitz { rho: 0.1 },
            SigmaChoice::HaarUniform => CovarianceRecipe::HaarRotated { a: 1.0, b: 1.5, seed: master_seed },
        }
    }
}

/// One cell of an experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub sigma: SigmaChoice,
    pub law: NoiseKind,
    pub n: usize,
    pub m: usize,
}

/// `Σ × law × (N, M)` in table order.
pub fn full_grid() -> Vec<Scenario> {
    let mut grid = Vec::new();
    for sigma in SigmaChoice::ALL {
        for law in [NoiseKind::Gaussian, NoiseKind::UniformSym] {
            for (n, m) in [(200, 100), (100, 200)] {
                grid.push(Scenario { sigma, law: law.clone(), n, m });
            }
        }
    }
    grid
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub scenario: Scenario,
    pub seed: u64,
    pub reps: usize,
    pub rate_ds: f64,
    pub rate_rs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    /// 1 for size, the number of clusters for power.
    pub k: usize,
    pub center_scale: f64,
    pub reps: usize,
    pub master_seed: u64,
    pub cv: CriticalValues,
    pub cells: Vec<CellResult>,
}

impl ExperimentReport {
    pub fn cell(&self, sigma: SigmaChoice, law: &NoiseKind, n: usize, m: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.scenario.sigma == sigma && &c.scenario.law == law && c.scenario.n == n && c.scenario.m == m)
    }

    /// Rows `Σ × statistic`, columns `law × (N, M)`.
    pub fn to_table(&self, digits: usize) -> Table {
        let mut columns: Vec<(NoiseKind, usize, usize)> = Vec::new();
        for c in &self.cells {
            let key = (c.scenario.law.clone(), c.scenario.n, c.scenario.m);
            if !columns.contains(&key) {
                columns.push(key);
            }
        }
        let mut header = vec!["sigma".to_string(), "statistic".to_string()];
        for (law, n, m) in &columns {
            header.push(format!("{}_N{}_M{}", NoiseLaw::new(law.clone()).map_or("custom", |l| l.label()), n, m));
        }
        let mut t = Table::new(header);
        let mut sigmas: Vec<SigmaChoice> = Vec::new();
        for c in &self.cells {
            if !sigmas.contains(&c.scenario.sigma) {
                sigmas.push(c.scenario.sigma);
            }
        }
        let k = self.cv.k_star;
        for sigma in sigmas {
            for (stat, pick) in [("DS", true), ("RS", false)] {
                let mut row = vec![sigma.label().to_string(), format!("{stat}{k}")];
                for (law, n, m) in &columns {
                    row.push(match self.cell(sigma, law, *n, *m) {
                        Some(c) => fmt_sig(if pick { c.rate_ds } else { c.rate_rs }, digits),
                        None => String::new(),
                    });
                }
                t.push(row);
            }
        }
        t
    }
}

fn run_cell(
    scenario: &Scenario,
    k: usize,
    center_scale: f64,
    reps: usize,
    cell_seed: u64,
    master_seed: u64,
    cv: &CriticalValues,
) -> AppResult<CellResult> {
    let sigma = CovarianceModel::new(scenario.sigma.recipe(master_seed), scenario.m)?;
    let law = NoiseLaw::new(scenario.law.clone())?;
    let labels = if k >= 2 { sampling::exact_labels(scenario.n, &vec![1.0 / k as f64; k])? } else { Vec::new() };
    let decisions = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut s = rng::stream(rng::derive_seed(cell_seed, domains::NOISE, r as u64));
            let centers = if k >= 2 { Some(hetero::draw_centers(k, scenario.m, center_scale, &mut s)?) } else { None };
            let w = law.sample_matrix(scenario.m, scenario.n, 1.0, &mut s);
            let mut data = sigma.sqrt_mul(&w);
            if let Some(c) = &centers {
                for (mu, &l) in labels.iter().enumerate() {
                    for i in 0..scenario.m {
                        data[(i, mu)] += c[l][i];
                    }
                }
            }
            hetero::detect(&data, cv, EigenMethod::Auto)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let count = decisions.len().max(1) as f64;
    Ok(CellResult {
        scenario: scenario.clone(),
        seed: cell_seed,
        reps,
        rate_ds: decisions.iter().filter(|d| d.reject_ds).count() as f64 / count,
        rate_rs: decisions.iter().filter(|d| d.reject_rs).count() as f64 / count,
    })
}

fn run_grid(
    grid: &[Scenario],
    k: usize,
    center_scale: f64,
    reps: usize,
    cv: &CriticalValues,
    master_seed: u64,
) -> AppResult<ExperimentReport> {
    let mut cells = Vec::with_capacity(grid.len());
    if reps > 0 {
        for (i, sc) in grid.iter().enumerate() {
            let cell_seed = rng::derive_seed(master_seed, CELL, i as u64);
            cells.push(run_cell(sc, k, center_scale, reps, cell_seed, master_seed, cv)?);
        }
    }
    Ok(ExperimentReport { k, center_scale, reps, master_seed, cv: *cv, cells })
}

/// Rejection rates under the null (`K = 1`, pure noise).
pub fn run_size_experiment(
    grid: &[Scenario],
    reps: usize,
    cv: &CriticalValues,
    master_seed: u64,
) -> AppResult<ExperimentReport> {
    run_grid(grid, 1, 0.0, reps, cv, master_seed)
}

/// Rejection rates for `K ∈ {2, 3, 4}` equal-proportion clusters; centers are
/// redrawn every replication and multiplied by `center_scale`.
pub fn run_power_experiment(
    k: usize,
    grid: &[Scenario],
    reps: usize,
    cv: &CriticalValues,
    master_seed: u64,
    center_scale: f64,
) -> AppResult<ExperimentReport> {
    hetero::center_intervals(k)?;
    run_grid(grid, k, center_scale, reps, cv, master_seed)
}

/// Statistics under the null and under a two-cluster alternative with
/// `c₁ = (c, 0, …, 0)`, `c₂ = −c₁`, for plotting.
pub fn statistic_distributions(
    m: usize,
    n: usize,
    c: f64,
    k_star: usize,
    reps: usize,
    master_seed: u64,
) -> AppResult<(Vec<RatioStats>, Vec<RatioStats>)> {
    let cv = CriticalValues {
        k_star,
        n_star: 0,
        reps: 0,
        quantile: 0.95,
        cv_ds: f64::INFINITY,
        cv_rs: f64::INFINITY,
        master_seed,
    };
    let labels = sampling::exact_labels(n, &[0.5, 0.5])?;
    let law = NoiseLaw::gaussian();
    let draw = |alt: bool, domain: u64| {
        (0..reps)
            .into_par_iter()
            .map(|r| {
                let mut s = rng::stream(rng::derive_seed(master_seed, domain, r as u64));
                let mut data = law.sample_matrix(m, n, 1.0, &mut s);
                if alt {
                    for (mu, &l) in labels.iter().enumerate() {
                        data[(0, mu)] += if l == 0 { c } else { -c };
                    }
                }
                hetero::detect(&data, &cv, EigenMethod::Auto).map(|d| d.stats)
            })
            .collect::<Result<Vec<_>, _>>()
    };
    Ok((draw(false, rng::domain("ratio-null"))?, draw(true, rng::domain("ratio-alternative"))?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cv() -> CriticalValues {
        CriticalValues { k_star: 4, n_star: 100, reps: 0, quantile: 0.95, cv_ds: 3.0251, cv_rs: 18.992, master_seed: 0 }
    }

    #[test]
    fn empty_report_for_zero_reps() {
        let r = run_size_experiment(&full_grid(), 0, &cv(), 1).unwrap();
        assert!(r.cells.is_empty());
        assert_eq!(full_grid().len(), 12);
    }

    #[test]
    fn calibration_is_deterministic() {
        let spec = CalibrateSpec { k_star: 2, n_star: 20, quantile: 0.9 };
        let a = calibrate(&spec, 150, 4).unwrap();
        let b = calibrate(&spec, 150, 4).unwrap();
        assert_eq!(a.cv, b.cv);
        assert!(a.cv.cv_ds > 0.0 && a.cv.cv_rs > 0.0);
        assert!(calibrate(&spec, 50, 4).is_err());
    }

    #[test]
    fn table_layout() {
        let grid = vec![
            Scenario { sigma: SigmaChoice::Identity, law: NoiseKind::Gaussian, n: 40, m: 20 },
            Scenario { sigma: SigmaChoice::Toeplitz, law: NoiseKind::Gaussian, n: 40, m: 20 },
        ];
        let r = run_size_experiment(&grid, 10, &cv(), 1).unwrap();
        let t = r.to_table(4);
        assert_eq!(t.header, vec!["sigma", "statistic", "gaussian_N40_M20"]);
        assert_eq!(t.rows.len(), 4);
        assert_eq!(t.rows[1][1], "RS4");
    }
}
