//! Command-line front end: flag parsing, subcommand dispatch and file emission.
//!
//! Every CSV starts with a `# config:` line holding the provenance (command,
//! master seed, replication count, digits and parameters) needed to regenerate
//! it byte for byte. Thread count, output directory and wall time only appear
//! in the `.meta.json` sidecar, so they never perturb the data files.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;
use sigspike_core::hetero::{self as core_hetero, CriticalValues, Decision};
use sigspike_core::linalg::EigenMethod;
use sigspike_core::noise::NoiseKind;
use sigspike_core::spectra::{self, AssumptionReport};
use sigspike_core::spikes::{self, SpikeTheory};
use sigspike_core::stieltjes::{EdgeData, SelfConsistent};
use sigspike_core::{rng, stats, DMatrix};

use crate::config::{CalibrateSpec, ModelSpec, NonuniversalitySpec, RunConfig, SimulateSpec, VerifySpec};
use crate::ensemble::{self, McOptions, Prepared};
use crate::error::{AppError, AppResult};
use crate::hetero::{self, Calibration};
use crate::histogram;
use crate::locallaw;
use crate::output::{fmt_sig, OutputSet, Table};

/// Replication counts used when neither `--reps` nor the config sets one.
pub const DEFAULT_SIMULATE_REPS: usize = 2000;
pub const DEFAULT_CALIBRATION_REPS: usize = 30000;
/// Reference replication counts; `reproduce` multiplies them by `--scale`.
pub const TABLE_REPS: usize = 10000;
pub const SINGLE_SPIKE_REPS: usize = 2000;
pub const RATIO_DISTRIBUTION_REPS: usize = 5000;

#[derive(Debug, Parser)]
#[command(
    name = "sigspike",
    version,
    about = "Spiked signal-plus-noise spectra: theory, simulation and heterogeneity tests"
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Replication count; overrides the config and `--scale`.
    #[arg(long, global = true)]
    pub reps: Option<usize>,
    /// Multiplier on the reference replication counts of `reproduce`.
    #[arg(long, global = true)]
    pub scale: Option<f64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Deterministic quantities for the configured model.
    Theory,
    /// Monte Carlo of the spiked eigenvalues.
    Simulate,
    /// Additive versus multiplicative models under moment-matched laws.
    Nonuniversality,
    /// Critical values of the DS and RS statistics.
    Calibrate {
        #[arg(long)]
        kstar: Option<usize>,
        #[arg(long)]
        nstar: Option<usize>,
        #[arg(long)]
        quantile: Option<f64>,
    },
    /// Heterogeneity test on a data matrix (CSV, one observation per column).
    Test {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Subtract each variable's mean before testing.
        #[arg(long)]
        center: bool,
    },
    /// Regenerates a size/power table (1 to 4) or plot data set (1 or 2).
    Reproduce {
        #[arg(long, conflicts_with = "figure", required_unless_present = "figure")]
        table: Option<u8>,
        #[arg(long)]
        figure: Option<u8>,
    },
    /// Local-law verification suite; exits with 3 on any failed check.
    Verify {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seeds: Option<usize>,
    },
}

/// Resolved run settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: RunConfig,
    pub master_seed: u64,
    pub reps: Option<usize>,
    pub scale: f64,
    pub out: PathBuf,
    pub threads: Option<usize>,
}

impl Context {
    pub fn new(cli: &Cli) -> AppResult<Self> {
        let cfg = match &cli.config {
            Some(p) => RunConfig::from_path(p)?,
            None => RunConfig::default(),
        };
        let scale = cli.scale.unwrap_or(1.0);
        if !(scale.is_finite() && scale > 0.0) {
            return Err(AppError::Config(format!("scale must be positive, got {scale}")));
        }
        let reps = cli.reps.or(cfg.reps);
        if reps == Some(0) {
            return Err(AppError::Config("reps must be positive".into()));
        }
        let threads = cli.threads.or(cfg.threads);
        if threads == Some(0) {
            return Err(AppError::Config("threads must be positive".into()));
        }
        Ok(Self {
            master_seed: cli.seed.unwrap_or(cfg.master_seed),
            reps,
            scale,
            out: cli.out.clone().unwrap_or_else(|| cfg.out_dir()),
            threads,
            cfg,
        })
    }

    fn reps_or(&self, default: usize) -> usize {
        self.reps.unwrap_or(default)
    }

    /// `--reps` wins; otherwise the reference count times `--scale`.
    fn scaled_reps(&self, reference: usize) -> usize {
        self.reps.unwrap_or_else(|| ((reference as f64 * self.scale).round() as usize).max(1))
    }

    fn digits(&self) -> usize {
        self.cfg.digits
    }

    fn model(&self) -> AppResult<&ModelSpec> {
        self.cfg
            .model
            .as_ref()
            .ok_or_else(|| AppError::Config("this subcommand needs a `model` section in --config".into()))
    }
}

/// Embedded in every CSV and sidecar.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance<P: Serialize> {
    pub command: String,
    pub master_seed: u64,
    pub reps: usize,
    pub digits: usize,
    pub params: P,
}

#[derive(Serialize)]
struct Meta<'a, P: Serialize> {
    provenance: &'a Provenance<P>,
    version: &'static str,
    wall_time_seconds: f64,
    threads: usize,
    files: Vec<String>,
}

fn finish<P: Serialize>(mut out: OutputSet, prov: &Provenance<P>, started: Instant) -> AppResult<Vec<PathBuf>> {
    let files = out.files().iter().filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned())).collect();
    let meta = Meta {
        provenance: prov,
        version: env!("CARGO_PKG_VERSION"),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        threads: rayon::current_num_threads(),
        files,
    };
    out.write_json(&format!("{}.meta.json", prov.command.replace(' ', "_")), &meta)?;
    Ok(out.commit())
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs the parsed command inside a pool of the requested size.
pub fn run(cli: &Cli) -> AppResult<Vec<PathBuf>> {
    let ctx = Context::new(cli)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = ctx.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build()?;
    pool.install(|| dispatch(&cli.command, &ctx))
}

pub fn dispatch(command: &Command, ctx: &Context) -> AppResult<Vec<PathBuf>> {
    match command {
        Command::Theory => theory(ctx),
        Command::Simulate => simulate(ctx),
        Command::Nonuniversality => nonuniversality(ctx),
        Command::Calibrate { kstar, nstar, quantile } => {
            let mut spec = ctx.cfg.calibrate.unwrap_or_default();
            spec.k_star = kstar.unwrap_or(spec.k_star);
            spec.n_star = nstar.unwrap_or(spec.n_star);
            spec.quantile = quantile.unwrap_or(spec.quantile);
            calibrate(ctx, &spec)
        }
        Command::Test { data, center } => test(ctx, data.clone(), *center),
        Command::Reproduce { table: Some(t), .. } => reproduce_table(ctx, *t),
        Command::Reproduce { figure: Some(f), .. } => reproduce_figure(ctx, *f),
        Command::Reproduce { .. } => Err(AppError::Config("reproduce needs --table or --figure".into())),
        Command::Verify { n, seeds } => {
            let mut spec = ctx.cfg.verify.clone().unwrap_or_default();
            spec.n = n.unwrap_or(spec.n);
            spec.seeds = seeds.unwrap_or(spec.seeds);
            verify(ctx, &spec)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub model: ModelSpec,
    pub phi: f64,
    pub edge: EdgeData,
    pub sigma_tw: f64,
    pub threshold: f64,
    pub assumptions: AssumptionReport,
    pub sigma_tilde: Vec<f64>,
    pub k0: usize,
    pub advisories: Vec<String>,
    pub theory: Option<SpikeTheory>,
    /// `(‖Σ^{1/2}ψ_k‖_∞, ‖Sᵀψ_k‖_∞)` per supercritical spike.
    pub delocalization: Vec<(f64, f64)>,
}

pub fn theory_report(spec: &ModelSpec) -> AppResult<TheoryReport> {
    let prep = Prepared::new(spec)?;
    let sc = match &prep.pop {
        Some(p) => p.sc.clone(),
        None => SelfConsistent::new(prep.sigma.esd(), spec.m as f64 / spec.n as f64)?,
    };
    let (sigma_tilde, k0, advisories) = match &prep.pop {
        Some(p) => (p.sigma_tilde.clone(), p.k0, p.advisories.iter().map(spikes::describe).collect()),
        None => (Vec::new(), 0, vec!["no signal configured".to_string()]),
    };
    Ok(TheoryReport {
        model: spec.clone(),
        phi: sc.phi,
        edge: sc.edge,
        sigma_tw: sc.edge.sigma_tw(),
        threshold: sc.threshold(),
        assumptions: spectra::check_assumptions(&prep.sigma, spec.n, spec.tau),
        sigma_tilde,
        k0,
        advisories,
        delocalization: prep.theory.as_ref().map(spikes::delocalization_profile).unwrap_or_default(),
        theory: prep.theory,
    })
}

fn theory(ctx: &Context) -> AppResult<Vec<PathBuf>> {
    let started = Instant::now();
    let spec = ctx.model()?;
    let report = theory_report(spec)?;
    let prov = Provenance {
        command: "theory".into(),
        master_seed: ctx.master_seed,
        reps: 0,
        digits: ctx.digits(),
        params: spec,
    };
    let mut out = OutputSet::new(&ctx.out)?;
    out.write_json("theory.json", &report)?;
    finish(out, &prov, started)
}

#[derive(Debug, Clone, Serialize)]
struct SimulateParams<'a> {
    model: &'a ModelSpec,
    simulate: &'a SimulateSpec,
}

#[derive(Debug, Clone, Serialize)]
struct FluctuationSummary {
    spike: usize,
    theta: f64,
    mean: f64,
    std_error: f64,
    variance: f64,
    /// `L_k`.
    theory_mean: f64,
    /// `V_kk + 2W_kk + Var Θ_k`.
    theory_variance: f64,
}

fn simulate(ctx: &Context) -> AppResult<Vec<PathBuf>> {
    let started = Instant::now();
    let spec = ctx.model()?;
    let sim = ctx.cfg.simulate.clone().unwrap_or(SimulateSpec {
        model: Default::default(),
        couple_theta: false,
        eigenvalues: None,
        method: EigenMethod::Auto,
    });
    let reps = ctx.reps_or(DEFAULT_SIMULATE_REPS);
    let mut prep = Prepared::new(spec)?;
    let rank = prep.signal.as_ref().map_or(1, |s| s.rank()).max(1);
    let opts = McOptions {
        reps,
        master_seed: ctx.master_seed,
        model: sim.model,
        couple_theta: sim.couple_theta,
        eigenvalues: sim.eigenvalues.unwrap_or(rank).min(spec.m.min(spec.n)),
        method: sim.method,
    };
    let samples = ensemble::run_spike_mc(&mut prep, &opts)?;
    let summary: Vec<FluctuationSummary> = match &prep.theory {
        Some(th) => (0..th.k0())
            .map(|k| {
                let f = samples.fluctuation(k);
                FluctuationSummary {
                    spike: k + 1,
                    theta: th.spikes[k].theta,
                    mean: stats::mean(&f),
                    std_error: stats::std_error(&f),
                    variance: stats::variance(&f),
                    theory_mean: th.spikes[k].l,
                    theory_variance: th.v[k][k] + 2.0 * th.w[k][k] + th.theta_variance(k),
                }
            })
            .collect(),
        None => Vec::new(),
    };
    let prov = Provenance {
        command: "simulate".into(),
        master_seed: ctx.master_seed,
        reps,
        digits: ctx.digits(),
        params: SimulateParams { model: spec, simulate: &sim },
    };
    let mut out = OutputSet::new(&ctx.out)?;
    out.write_csv("simulate.csv", &samples.to_table(ctx.digits()), &prov)?;
    out.write_json("simulate_summary.json", &summary)?;
    finish(out, &prov, started)
}

/// Single-spike geometry: `M = 200`, `N = 400`, `Σ = I`, one spike with `d² = 5.25`.
pub fn single_spike_model() -> ModelSpec {
    ModelSpec::localized_identity(200, 400, 5.25f64.sqrt(), NoiseKind::Gaussian)
}

#[derive(Debug, Clone, Serialize)]
struct NonuniversalityParams<'a> {
    model: &'a ModelSpec,
    nonuniversality: &'a NonuniversalitySpec,
}

#[derive(Debug, Clone, Serialize)]
struct NonuniversalitySummary<'a> {
    ks: &'a [(sigspike_core::sampling::Model, String, String, f64)],
    theta_zero_mass: &'a [(String, f64)],
}

fn nonuniversality_files(
    ctx: &Context,
    command: &str,
    spec: &ModelSpec,
    nu: &NonuniversalitySpec,
    reps: usize,
) -> AppResult<Vec<PathBuf>> {
    let started = Instant::now();
    let report = ensemble::nonuniversality(spec, &nu.laws, reps, ctx.master_seed, nu.max_bins)?;
    let prov = Provenance {
        command: command.into(),
        master_seed: ctx.master_seed,
        reps,
        digits: ctx.digits(),
        params: NonuniversalityParams { model: spec, nonuniversality: nu },
    };
    let stem = command.replace(' ', "_");
    let mut out = OutputSet::new(&ctx.out)?;
    out.write_csv(&format!("{stem}_histograms.csv"), &report.histogram_table(ctx.digits()), &prov)?;
    let mut ks = Table::new(["model", "law_a", "law_b", "ks"]);
    for (model, a, b, d) in &report.ks {
        ks.push([model.label().to_string(), a.clone(), b.clone(), fmt_sig(*d, ctx.digits())]);
    }
    out.write_csv(&format!("{stem}_ks.csv"), &ks, &prov)?;
    out.write_json(
        &format!("{stem}_summary.json"),
        &NonuniversalitySummary { ks: &report.ks, theta_zero_mass: &report.theta_zero_mass },
    )?;
    finish(out, &prov, started)
}

fn nonuniversality(ctx: &Context) -> AppResult<Vec<PathBuf>> {
    let spec = ctx.cfg.model.clone().unwrap_or_else(single_spike_model);
    let nu = ctx.cfg.nonuniversality.clone().unwrap_or_default();
    let reps = ctx.reps_or(DEFAULT_SIMULATE_REPS);
    nonuniversality_files(ctx, "nonuniversality", &spec, &nu, reps)
}

fn calibration_table(cal: &Calibration, digits: usize) -> Table {
    let mut t = Table::new(["rep", "ds", "rs"]);
    for (r, s) in cal.samples.iter().enumerate() {
        t.push([r.to_string(), fmt_sig(s.ds, digits), fmt_sig(s.rs, digits)]);
    }
    t
}

fn calibrate(ctx: &Context, spec: &CalibrateSpec) -> AppResult<Vec<PathBuf>> {
    let started = Instant::now();
    let reps = ctx.reps_or(DEFAULT_CALIBRATION_REPS);
    let cal = hetero::calibrate(spec, reps, ctx.master_seed)?;
    let prov = Provenance {
        command: "calibrate".into(),
        master_seed: ctx.master_seed,
        reps,
        digits: ctx.digits(),
        params: spec,
    };
    let mut out = OutputSet::new(&ctx.out)?;
    out.write_csv("calibration_samples.csv", &calibration_table(&cal, ctx.digits()), &prov)?;
    out.write_json("calibration.json", &cal.cv)?;
    finish(out, &prov, started)
}

/// Reads a numeric matrix; `#` lines are comments, rows are variables.
pub fn read_matrix(path: &std::path::Path) -> AppResult<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                    AppError::Config(format!(
                        "{}: row {}, column {}: not a finite number: {f:?}",
                        path.display(),
                        i + 1,
                        j + 1
                    ))
                })
            })
            .collect::<AppResult<Vec<f64>>>()?;
        if rows.first().is_some_and(|r| r.len() != row.len()) {
            return Err(AppError::Config(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                i + 1,
                row.len(),
                rows[0].len()
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(AppError::Config(format!("{}: empty data matrix", path.display())));
    }
    Ok(DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Serialize)]
struct TestReport {
    m: usize,
    n: usize,
    centered: bool,
    critical_values: CriticalValues,
    decision: Decision,
}

fn test(ctx: &Context, data: Option<PathBuf>, center_flag: bool) -> AppResult<Vec<PathBuf>> {
    let started = Instant::now();
    let spec = ctx.cfg.test.clone();
    let path = data
        .or_else(|| spec.as_ref().map(|s| s.data.clone()))
        .ok_or_else(|| AppError::Config("test needs --data or a `test.data` entry in --config".into()))?;
    let calibration = spec.as_ref().map(|s| s.calibration).unwrap_or_default();
    let center = center_flag || spec.as_ref().is_some_and(|s| s.center);
    let raw = read_matrix(&path)?;
    let matrix = if center { core_hetero::center_observations(&raw) } else { raw };
    let (cv, reps) = match spec.as_ref().and_then(|s| s.critical_values) {
        Some((ds, rs)) => (
            CriticalValues {
                k_star: calibration.k_star,
                n_star: calibration.n_star,
                reps: 0,
                quantile: calibration.quantile,
                cv_ds: ds,
                cv_rs: rs,
                master_seed: ctx.master_seed,
            },
            0,
        ),
        None => {
            let reps = ctx.reps_or(DEFAULT_CALIBRATION_REPS);
            (hetero::calibrate(&calibration, reps, ctx.master_seed)?.cv, reps)
        }
    };
    if matrix.nrows().min(matrix.ncols()) < core_hetero::required_eigenvalues(cv.k_star) {
        return Err(AppError::Config(format!(
            "data is {}×{}; K* = {} needs at least {} rows and columns",
            matrix.nrows(),
            matrix.ncols(),
            cv.k_star,
            core_hetero::required_eigenvalues(cv.k_star)
        )));
    }
    let decision = core_hetero::detect(&matrix, &cv, EigenMethod::Auto)?;
    eprintln!(
        "DS = {} (cv {}) reject: {}; RS = {} (cv {}) reject: {}",
        fmt_sig(decision.stats.ds, 6),
        fmt_sig(cv.cv_ds, 6),
        decision.reject_ds,
        fmt_sig(decision.stats.rs, 6),
        fmt_sig(cv.cv_rs, 6),
        decision.reject_rs
    );
    let prov =
        Provenance { command: "test".into(), master_seed: ctx.master_seed, reps, digits: ctx.digits(), params: &spec };
    let mut out = OutputSet::new(&ctx.out)?;
    out.write_json(
        "test.json",
        &TestReport { m: matrix.nrows(), n: matrix.ncols(), centered: center, critical_values: cv, decision },
    )?;
    finish(out, &prov, started)
}

#[derive(Debug, Clone, Serialize)]
struct TableParams {
    table: u8,
    k: usize,
    center_scale: f64,
    calibration: CalibrateSpec,
    calibration_reps: usize,
}

fn reproduce_table(ctx: &Context, table: u8) -> AppResult<Vec<PathBuf>> {
    let started = Instant::now();
    let k = match table {
        1 => 1,
        2..=4 => table as usize,
        other => return Err(AppError::Config(format!("unknown table {other}; expected 1 to 4"))),
    };
    let reps = ctx.scaled_reps(TABLE_REPS);
    let calibration = ctx.cfg.calibrate.unwrap_or_default();
    let cv = hetero::calibrate(&calibration, DEFAULT_CALIBRATION_REPS, ctx.master_seed)?.cv;
    let grid = hetero::full_grid();
    let report = if k == 1 {
        hetero::run_size_experiment(&grid, reps, &cv, ctx.master_seed)?
    } else {
        hetero::run_power_experiment(k, &grid, reps, &cv, ctx.master_seed, 1.0)?
    };
    let params = TableParams {
        table,
        k,
        center_scale: report.center_scale,
        calibration,
        calibration_reps: DEFAULT_CALIBRATION_REPS,
    };
    let prov = Provenance {
        command: format!("reproduce table{table}"),
        master_seed: ctx.master_seed,
        reps,
        digits: ctx.digits(),
        params,
    };
    let mut out = OutputSet::new(&ctx.out)?;
    out.write_csv(&format!("table{table}.csv"), &report.to_table(ctx.digits()), &prov)?;
    out.write_json(&format!("table{table}.json"), &report)?;
    finish(out, &prov, started)
}

/// Sizes of the DS/RS null-versus-alternative data; `N = 2M`.
pub const RATIO_DISTRIBUTION_M: [usize; 3] = [100, 200, 400];
/// First coordinate of `c₁` under the alternative; `c₂ = −c₁`.
pub const RATIO_DISTRIBUTION_SHIFT: f64 = 1.5;

#[derive(Debug, Clone, Serialize)]
struct RatioDistributionParams {
    m: [usize; 3],
    n_over_m: usize,
    shift: f64,
    k_star: usize,
    max_bins: usize,
}

fn reproduce_figure(ctx: &Context, figure: u8) -> AppResult<Vec<PathBuf>> {
    match figure {
        1 => {
            let nu = ctx.cfg.nonuniversality.clone().unwrap_or_default();
            nonuniversality_files(
                ctx,
                "reproduce figure1",
                &single_spike_model(),
                &nu,
                ctx.scaled_reps(SINGLE_SPIKE_REPS),
            )
        }
        2 => {
            let started = Instant::now();
            let reps = ctx.scaled_reps(RATIO_DISTRIBUTION_REPS);
            let params = RatioDistributionParams {
                m: RATIO_DISTRIBUTION_M,
                n_over_m: 2,
                shift: RATIO_DISTRIBUTION_SHIFT,
                k_star: 4,
                max_bins: 80,
            };
            let mut t = Table::new(["m", "n", "hypothesis", "statistic", "bin_left", "bin_right", "count", "density"]);
            for (i, &m) in RATIO_DISTRIBUTION_M.iter().enumerate() {
                let seed = rng::derive_seed(ctx.master_seed, rng::domain("ratio-distribution-size"), i as u64);
                let (null, alt) =
                    hetero::statistic_distributions(m, 2 * m, RATIO_DISTRIBUTION_SHIFT, params.k_star, reps, seed)?;
                for (stat, pick) in [("DS4", true), ("RS4", false)] {
                    let get = |xs: &[core_hetero::RatioStats]| {
                        xs.iter().map(|s| if pick { s.ds } else { s.rs }).collect::<Vec<f64>>()
                    };
                    let (a, b) = (get(&null), get(&alt));
                    let edges = histogram::common_edges(&[&a, &b], params.max_bins);
                    for (hyp, xs) in [("null", &a), ("alternative", &b)] {
                        let h = histogram::histogram(xs, &edges);
                        for (j, &c) in h.counts.iter().enumerate() {
                            t.push([
                                m.to_string(),
                                (2 * m).to_string(),
                                hyp.to_string(),
                                stat.to_string(),
                                fmt_sig(h.edges[j], ctx.digits()),
                                fmt_sig(h.edges[j + 1], ctx.digits()),
                                c.to_string(),
                                fmt_sig(h.density[j], ctx.digits()),
                            ]);
                        }
                    }
                }
            }
            let prov = Provenance {
                command: "reproduce figure2".into(),
                master_seed: ctx.master_seed,
                reps,
                digits: ctx.digits(),
                params,
            };
            let mut out = OutputSet::new(&ctx.out)?;
            out.write_csv("figure2_histograms.csv", &t, &prov)?;
            finish(out, &prov, started)
        }
        other => Err(AppError::Config(format!("unknown figure {other}; expected 1 or 2"))),
    }
}

fn verify(ctx: &Context, spec: &VerifySpec) -> AppResult<Vec<PathBuf>> {
    let started = Instant::now();
    if spec.n < 20 || spec.seeds < 3 || !(spec.phi > 0.0 && spec.phi <= 1.0) {
        return Err(AppError::Config("verify needs n ≥ 20, seeds ≥ 3 and phi in (0, 1]".into()));
    }
    let report = locallaw::run_suite(spec, ctx.master_seed)?;
    let prov = Provenance {
        command: "verify".into(),
        master_seed: ctx.master_seed,
        reps: spec.seeds,
        digits: ctx.digits(),
        params: spec,
    };
    let mut t = Table::new(["check", "value", "lower", "upper", "pass"]);
    let opt = |x: Option<f64>| x.map_or_else(String::new, |v| fmt_sig(v, ctx.digits()));
    for c in &report.checks {
        t.push([c.name.clone(), fmt_sig(c.value, ctx.digits()), opt(c.lower), opt(c.upper), c.pass.to_string()]);
    }
    let mut out = OutputSet::new(&ctx.out)?;
    out.write_csv("verify.csv", &t, &prov)?;
    out.write_json("verify.json", &report)?;
    let files = finish(out, &prov, started)?;
    if !report.all_pass() {
        let names: Vec<String> =
            report.failures().iter().map(|c| format!("{} = {}", c.name, fmt_sig(c.value, 6))).collect();
        return Err(AppError::Verification(names.join(", ")));
    }
    Ok(files)
}
