//! Experiment runners behind the `odefilter` binary.
//!
//! Each runner validates its configuration, computes, and writes plain
//! CSV/JSON into an output directory:
//!
//! * [`run_solve`]: `trajectory.csv` and `report.json` for a single solve,
//! * [`run_suite`]: every problem under both priors plus `summary.csv`,
//! * [`run_convergence`]: `convergence.json` with first-step errors and the fitted order,
//! * [`run_samples`]: `samples.csv` with exact prior draws.

mod config;
mod output;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub use config::{
    preset, ConfigOverrides, ExperimentConfig, Preset, EXPERIMENT_SIGMA2, EXPERIMENT_THETA,
    PRESETS, UNSTATED_DEFAULT,
};
pub use output::{
    read_trajectory_csv, trajectory_header, write_json, write_samples_csv, write_trajectory_csv,
    TrajectoryTable,
};

use crate::analysis::{
    error_report, local_order_estimate, sample_prior, ErrorReport, OrderEstimate, PriorSamples,
};
use crate::error::{Error, Result};
use crate::filter::{grid_steps, solve_ivp, FilterTrajectory};
use crate::priors::{PriorKind, StateSpacePrior};
use crate::problems::{rk_reference, IVProblem, ReferenceTrajectory};

/// Step sizes of the first-step convergence study.
pub const DEFAULT_ORDER_STEPS: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

/// Result of one filter run against its reference solution.
#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub trajectory: FilterTrajectory,
    pub reference: ReferenceTrajectory,
    pub errors: ErrorReport,
    /// Largest `|I(m_n) − I(x₀)|` along the filter mean, per invariant.
    pub invariant_drift: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct SolveReport<'a> {
    config: &'a ExperimentConfig,
    n_steps: usize,
    errors: &'a ErrorReport,
    invariant_drift: &'a BTreeMap<String, f64>,
    wall_time_s: f64,
}

/// Solves without touching the filesystem, reusing `reference` when given.
pub fn solve_experiment(
    cfg: &ExperimentConfig,
    reference: Option<&ReferenceTrajectory>,
) -> Result<SolveOutcome> {
    cfg.validate()?;
    let problem = cfg.problem()?;
    let prior = cfg.prior_model()?;
    let trajectory = solve_ivp(&problem, &prior, cfg.h, cfg.r)?;
    let reference = match reference {
        Some(r) => r.clone(),
        None => rk_reference(&problem, cfg.h_fine, &trajectory.times())?,
    };
    let errors = error_report(&trajectory, &reference)?;
    let invariant_drift = invariant_drift(&problem, &trajectory);
    Ok(SolveOutcome {
        trajectory,
        reference,
        errors,
        invariant_drift,
    })
}

fn invariant_drift(problem: &IVProblem, traj: &FilterTrajectory) -> BTreeMap<String, f64> {
    problem
        .invariants()
        .iter()
        .map(|inv| {
            let start = (inv.eval)(problem.x0());
            let drift = traj
                .states
                .iter()
                .map(|s| ((inv.eval)(&s.solution()) - start).abs())
                .fold(0.0, f64::max);
            (inv.name.clone(), drift)
        })
        .collect()
}

/// Writes `trajectory.csv` and `report.json` into `cfg.out`.
pub fn run_solve(cfg: &ExperimentConfig) -> Result<SolveOutcome> {
    let started = Instant::now();
    let outcome = solve_experiment(cfg, None)?;
    write_solve_outputs(&cfg.out, cfg, &outcome, started.elapsed().as_secs_f64())?;
    Ok(outcome)
}

fn write_solve_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    outcome: &SolveOutcome,
    wall_time_s: f64,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_trajectory_csv(&dir.join("trajectory.csv"), &outcome.trajectory)?;
    let report = SolveReport {
        config: cfg,
        n_steps: outcome.trajectory.states.len() - 1,
        errors: &outcome.errors,
        invariant_drift: &outcome.invariant_drift,
        wall_time_s,
    };
    write_json(&dir.join("report.json"), &report)
}

/// One `(problem, prior)` row of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteRow {
    pub problem: String,
    pub prior: PriorKind,
    pub q: usize,
    pub theta: f64,
    pub h: f64,
    pub sigma2: f64,
    /// Compared components, `;`-separated.
    pub components: String,
    pub max_abs_error: Option<f64>,
    pub winner: Option<PriorKind>,
    pub expected: PriorKind,
    pub matches_expectation: Option<bool>,
    pub status: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteSummary {
    pub rows: Vec<SuiteRow>,
}

impl SuiteSummary {
    pub fn winner(&self, problem: &str) -> Option<PriorKind> {
        self.rows
            .iter()
            .find(|r| r.problem == problem)
            .and_then(|r| r.winner)
    }

    pub fn row(&self, problem: &str, prior: PriorKind) -> Option<&SuiteRow> {
        self.rows
            .iter()
            .find(|r| r.problem == problem && r.prior == prior)
    }
}

/// Runs every preset under both priors, one worker per problem, and writes
/// per-experiment outputs plus `summary.csv`. A failing experiment is
/// recorded in its row and does not stop the suite.
pub fn run_suite(outdir: &Path, sigma2: Option<f64>) -> Result<SuiteSummary> {
    fs::create_dir_all(outdir)?;
    let per_problem: Vec<Vec<SuiteRow>> = std::thread::scope(|scope| {
        let handles: Vec<_> = PRESETS
            .iter()
            .map(|p| scope.spawn(move || suite_problem(p, outdir, sigma2)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("suite worker panicked"))
            .collect()
    });
    let rows: Vec<SuiteRow> = per_problem.into_iter().flatten().collect();

    let mut w = csv::Writer::from_path(outdir.join("summary.csv"))?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(SuiteSummary { rows })
}

fn suite_problem(p: &Preset, outdir: &Path, sigma2: Option<f64>) -> Vec<SuiteRow> {
    let components = p
        .components
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(";");
    let mut reference: Option<ReferenceTrajectory> = None;
    let mut rows: Vec<SuiteRow> = [PriorKind::Iwp, PriorKind::Ioup]
        .into_iter()
        .map(|kind| {
            let overrides = ConfigOverrides {
                sigma2,
                out: Some(outdir.join(format!("{}_{}", p.problem, kind))),
                ..ConfigOverrides::for_problem(p.problem, kind)
            };
            let mut row = SuiteRow {
                problem: p.problem.to_string(),
                prior: kind,
                q: p.q,
                theta: 0.0,
                h: p.h,
                sigma2: sigma2.unwrap_or(EXPERIMENT_SIGMA2),
                components: components.clone(),
                max_abs_error: None,
                winner: None,
                expected: p.expected_winner,
                matches_expectation: None,
                status: String::new(),
            };
            let result = overrides.resolve().and_then(|cfg| {
                row.theta = cfg.theta;
                let started = Instant::now();
                let outcome = solve_experiment(&cfg, reference.as_ref())?;
                write_solve_outputs(&cfg.out, &cfg, &outcome, started.elapsed().as_secs_f64())?;
                Ok(outcome)
            });
            match result {
                Ok(outcome) => {
                    row.max_abs_error = Some(outcome.errors.max_abs_over(p.components));
                    row.status = "ok".into();
                    reference.get_or_insert(outcome.reference);
                }
                Err(e) => row.status = format!("error: {e}"),
            }
            row
        })
        .collect();

    if let [Some(iwp), Some(ioup)] = [rows[0].max_abs_error, rows[1].max_abs_error] {
        // a tie goes to neither prior
        let winner = if ioup < iwp {
            Some(PriorKind::Ioup)
        } else if iwp < ioup {
            Some(PriorKind::Iwp)
        } else {
            None
        };
        for row in &mut rows {
            row.winner = winner;
            row.matches_expectation = winner.map(|w| w == p.expected_winner);
        }
    }
    rows
}

#[derive(Serialize)]
struct ConvergenceReport<'a> {
    config: &'a ExperimentConfig,
    estimate: &'a OrderEstimate,
}

/// First-step errors over `hs` and the fitted order, written to
/// `convergence.json`.
pub fn run_convergence(cfg: &ExperimentConfig, hs: &[f64]) -> Result<OrderEstimate> {
    let problem = cfg.problem()?;
    let prior = cfg.prior_model()?;
    let estimate = local_order_estimate(&prior, &problem, hs)?;
    fs::create_dir_all(&cfg.out)?;
    write_json(
        &cfg.out.join("convergence.json"),
        &ConvergenceReport {
            config: cfg,
            estimate: &estimate,
        },
    )?;
    Ok(estimate)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SampleConfig {
    pub prior: PriorKind,
    pub q: usize,
    pub theta: f64,
    pub sigma2: f64,
    pub h: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// State coordinate written to the CSV; defaults to `q`.
    pub coord: Option<usize>,
    pub out: PathBuf,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            prior: PriorKind::Ioup,
            q: 1,
            theta: -1.0,
            sigma2: 1.0,
            h: 0.01,
            t_end: 10.0,
            n_paths: 10,
            seed: 0,
            coord: None,
            out: PathBuf::from("out"),
        }
    }
}

/// Exact prior draws written to `samples.csv`.
pub fn run_samples(cfg: &SampleConfig) -> Result<PriorSamples> {
    let prior = StateSpacePrior::new(cfg.prior, cfg.q, cfg.theta, cfg.sigma2)?;
    let coord = cfg.coord.unwrap_or(cfg.q);
    if coord > cfg.q {
        return Err(Error::InvalidParameter {
            name: "coord",
            reason: format!("state has coordinates 0..={}, got {coord}", cfg.q),
        });
    }
    let n_steps = grid_steps(cfg.t_end, cfg.h)?;
    let samples = sample_prior(&prior, cfg.h, n_steps, cfg.n_paths, cfg.seed)?;
    fs::create_dir_all(&cfg.out)?;
    write_samples_csv(&cfg.out.join("samples.csv"), &samples, coord)?;
    Ok(samples)
}

// ---------------------------------------------------------------------------
// command line

#[derive(Debug, Parser)]
#[command(
    name = "odefilter",
    version,
    about = "Gaussian ODE filtering with IWP and IOUP priors"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem and write trajectory.csv and report.json.
    Solve(ExperimentArgs),
    /// Run every problem under both priors and write summary.csv.
    Suite(SuiteArgs),
    /// Estimate the local order of the first prediction step.
    Converge(ConvergeArgs),
    /// Draw exact sample paths from a prior.
    Sample(SampleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PriorArg {
    Iwp,
    Ioup,
}

impl From<PriorArg> for PriorKind {
    fn from(p: PriorArg) -> Self {
        match p {
            PriorArg::Iwp => PriorKind::Iwp,
            PriorArg::Ioup => PriorKind::Ioup,
        }
    }
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// exp, neg_exp, orbit, van_der_pol or decay_chain
    #[arg(long)]
    pub problem: String,
    #[arg(long, value_enum)]
    pub prior: Option<PriorArg>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sigma2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    /// Measurement noise variance.
    #[arg(long = "R", allow_negative_numbers = true)]
    pub r: Option<f64>,
    /// Horizon.
    #[arg(long = "T", allow_negative_numbers = true)]
    pub t_end: Option<f64>,
    /// Step of the RK4 reference solution.
    #[arg(long = "h-fine")]
    pub h_fine: Option<f64>,
    /// Orbit eccentricity.
    #[arg(long, allow_negative_numbers = true)]
    pub eps: Option<f64>,
    /// Van der Pol damping.
    #[arg(long, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// Van der Pol initial velocity.
    #[arg(long, allow_negative_numbers = true)]
    pub dx0: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl ExperimentArgs {
    pub fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            problem: self.problem.clone(),
            prior: self.prior.map(Into::into),
            q: self.q,
            theta: self.theta,
            sigma2: self.sigma2,
            h: self.h,
            r: self.r,
            t_end: self.t_end,
            h_fine: self.h_fine,
            eps: self.eps,
            mu: self.mu,
            vdp_dx0: self.dx0,
            seed: self.seed,
            out: Some(self.out.clone()),
        }
    }
}

#[derive(Debug, Args)]
pub struct SuiteArgs {
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Diffusion scale for every experiment.
    #[arg(long)]
    pub sigma2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ConvergeArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Comma-separated, strictly decreasing step sizes.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_ORDER_STEPS.to_vec())]
    pub hs: Vec<f64>,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum, default_value = "ioup")]
    pub prior: PriorArg,
    #[arg(long, default_value_t = 1)]
    pub q: usize,
    #[arg(long, allow_negative_numbers = true, default_value_t = -1.0)]
    pub theta: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.01)]
    pub h: f64,
    #[arg(long = "T", allow_negative_numbers = true, default_value_t = 10.0)]
    pub t_end: f64,
    #[arg(long = "n-paths", default_value_t = 10)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// State coordinate to write (defaults to q).
    #[arg(long)]
    pub coord: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

fn exit_code(err: &Error) -> u8 {
    if err.is_config_error() {
        2
    } else if matches!(err, Error::Io(_) | Error::Csv(_) | Error::Json(_)) {
        1
    } else {
        3
    }
}

/// Runs a parsed command line; exit status 2 marks configuration errors and
/// 3 numerical failures.
pub fn run(cli: Cli) -> ExitCode {
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Solve(args) => {
            let cfg = args.overrides().resolve()?;
            let outcome = run_solve(&cfg)?;
            println!(
                "{} {} q={} h={}: max-abs error {:?} -> {}",
                cfg.problem,
                cfg.prior,
                cfg.q,
                cfg.h,
                outcome.errors.max_abs,
                cfg.out.display()
            );
        }
        Command::Suite(args) => {
            let summary = run_suite(&args.out, args.sigma2)?;
            for row in &summary.rows {
                println!(
                    "{:<12} {:<5} max-abs {:>12} winner {:<5} expected {:<5} {}",
                    row.problem,
                    row.prior.as_str(),
                    row.max_abs_error.map_or("-".into(), |e| format!("{e:.4e}")),
                    row.winner.map_or("-", |w| w.as_str()),
                    row.expected.as_str(),
                    match row.matches_expectation {
                        Some(true) => "expectation holds",
                        Some(false) => "expectation does not hold",
                        None => row.status.as_str(),
                    }
                );
            }
        }
        Command::Converge(args) => {
            let cfg = args.experiment.overrides().resolve()?;
            let estimate = run_convergence(&cfg, &args.hs)?;
            match estimate.slope() {
                Some(s) => println!("{} {} q={}: slope {s:.4}", cfg.problem, cfg.prior, cfg.q),
                None => println!(
                    "{} {} q={}: prediction exact",
                    cfg.problem, cfg.prior, cfg.q
                ),
            }
        }
        Command::Sample(args) => {
            let cfg = SampleConfig {
                prior: args.prior.into(),
                q: args.q,
                theta: args.theta,
                sigma2: args.sigma2,
                h: args.h,
                t_end: args.t_end,
                n_paths: args.n_paths,
                seed: args.seed,
                coord: args.coord,
                out: args.out,
            };
            let samples = run_samples(&cfg)?;
            println!(
                "{} paths x {} steps -> {}",
                samples.paths.len(),
                samples.times.len() - 1,
                cfg.out.join("samples.csv").display()
            );
        }
    }
    Ok(())
}
