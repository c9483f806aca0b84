//! Command-line front end. Every command validates its inputs and computes all
//! artifacts before the first file is written.

pub mod config;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::json;

use crate::analysis::properties::{
    comparison_suite, consistency_probe, constant_shift_suite, derivative_monotonicity_suite,
    monotonicity_suite, solve_based_suites, tvd_suite, PropertyOutcome, Subject,
};
use crate::analysis::{convergence_study_lqr, self_convergence_study, ConvergenceReport};
use crate::error::HjbError;
use crate::grid::{GridSpec, ScalarField};
use crate::ocp::{rollout, ControlProblem};
use crate::upwind::{check_cfl, solve, CflStatus, SolveResult};

pub use config::{ConfigError, ProblemKind, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY_FAILURE: i32 = 1;
pub const EXIT_CFL_REFUSED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_SOFTWARE: i32 = 70;
pub const EXIT_IO: i32 = 74;

/// Orders at or above this count as first-order consistent in `verify`.
pub const CONSISTENCY_MIN_ORDER: f64 = 0.95;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),

    #[error(
        "refusing to solve: alpha * sup|f| = {} violates the strict CFL bound (pass --force-cfl to override)",
        .0.alpha_times_sup
    )]
    Cfl(CflStatus),

    #[error("{0}")]
    Solver(HjbError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl From<HjbError> for CliError {
    fn from(e: HjbError) -> Self {
        match e {
            HjbError::CflRefused(status) => CliError::Cfl(status),
            other => CliError::Solver(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_USAGE,
            CliError::Cfl(_) => EXIT_CFL_REFUSED,
            CliError::Solver(HjbError::InvalidArgument(_) | HjbError::OutOfRange(_)) => EXIT_USAGE,
            CliError::Solver(_) => EXIT_SOFTWARE,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hjb", version, about = "Upwind HJB solver and verification harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration (flat `key = value` file)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory (overrides `output.dir`)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Seed for randomized suites (overrides `seed`)
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Solve even when the strict CFL bound fails
    #[arg(long, global = true)]
    pub force_cfl: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve and write value and policy slices
    Solve,
    /// Run a resolution study and fit orders
    Convergence,
    /// Run the seeded property suites
    Verify,
    /// Simulate the closed loop from `x0`
    Rollout {
        /// Initial state, comma separated (overrides `rollout.x0`)
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
    },
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                CliError::Config(ConfigError(format!("{}: {e}", path.display())))
            })?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_override("seed", &seed.to_string())?;
    }
    if cli.force_cfl {
        cfg = cfg.with_override("force_cfl", "true")?;
    }
    if let Command::Rollout { x0: Some(x0) } = &cli.command {
        cfg = cfg.with_override("rollout.x0", x0)?;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = Some(out.clone());
    }
    if cfg.force_cfl {
        log::warn!("force_cfl set: grids violating the strict CFL bound will be solved anyway");
    }
    match &cli.command {
        Command::Solve => cmd_solve(&cfg),
        Command::Convergence => cmd_convergence(&cfg),
        Command::Verify => cmd_verify(&cfg),
        Command::Rollout { .. } => cmd_rollout(&cfg),
    }
}

/// Artifacts assembled in memory, written in one pass.
struct Artifacts {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Artifacts {
    fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        let dir = cfg
            .output_dir
            .clone()
            .ok_or_else(|| ConfigError("output directory missing (output.dir or --out)".into()))?;
        Ok(Self {
            dir,
            files: Vec::new(),
        })
    }

    fn add(&mut self, name: impl Into<String>, body: String) {
        self.files.push((name.into(), body));
    }

    fn add_json(&mut self, name: &str, value: &serde_json::Value) {
        let mut body = serde_json::to_string_pretty(value).expect("plain JSON value");
        body.push('\n');
        self.add(name, body);
    }

    fn write(self) -> Result<(), CliError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Io { path, source }
        };
        fs::create_dir_all(&self.dir).map_err(io(&self.dir))?;
        for (name, body) in &self.files {
            let path = self.dir.join(name);
            fs::write(&path, body).map_err(io(&path))?;
        }
        log::info!("wrote {} files to {}", self.files.len(), self.dir.display());
        Ok(())
    }
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn coord_header(dim: usize) -> &'static str {
    if dim == 1 {
        "x"
    } else {
        "x,y"
    }
}

/// One row per node: coordinates followed by one column per field.
fn fields_csv(grid: &GridSpec, fields: &[&ScalarField]) -> String {
    let n = grid.dim();
    let mut out = String::new();
    out.push_str(coord_header(n));
    if fields.len() == 1 {
        out.push_str(",value");
    } else {
        for k in 0..fields.len() {
            write!(out, ",value_{k}").expect("string write");
        }
    }
    out.push('\n');
    for flat in 0..grid.node_count() {
        let p = grid.node_point(flat);
        let cols: Vec<String> = p[..n]
            .iter()
            .map(|c| num(*c))
            .chain(fields.iter().map(|f| num(f.get(flat))))
            .collect();
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

fn emitted(j: usize, nt: usize, stride: usize) -> bool {
    j.is_multiple_of(stride) || j == nt
}

fn solve_checked(
    problem: &dyn ControlProblem,
    grid: &GridSpec,
    cfg: &RunConfig,
) -> Result<SolveResult, CliError> {
    let status = check_cfl(problem, grid);
    if !status.satisfies_strict && !cfg.force_cfl {
        return Err(CliError::Cfl(status));
    }
    Ok(solve(problem, grid, &cfg.solver_options())?)
}

pub fn cmd_solve(cfg: &RunConfig) -> Result<i32, CliError> {
    let problem = cfg.build_problem()?;
    let grid = cfg.grid_spec()?;
    let mut artifacts = Artifacts::new(cfg)?;
    let sol = solve_checked(problem.as_ref(), &grid, cfg)?;
    let nt = grid.n_time();
    if cfg.formats.csv {
        for (j, v) in sol.value.iter().enumerate() {
            if emitted(j, nt, cfg.stride) {
                artifacts.add(format!("value_t{j}.csv"), fields_csv(&grid, &[v]));
            }
        }
        for j in 1..=nt {
            if emitted(j, nt, cfg.stride) {
                let slice = sol.policy_slice(j).expect("in range");
                artifacts.add(format!("policy_t{j}.csv"), fields_csv(&grid, &slice));
            }
        }
    }
    if cfg.formats.json {
        artifacts.add_json(
            "meta.json",
            &json!({
                "problem": cfg.problem,
                "grid": grid,
                "cfl": sol.cfl,
                "forced_cfl": sol.forced_cfl,
                "minimizer": cfg.minimizer,
                "minimizer_stats": sol.stats,
                "config": cfg.echo(),
            }),
        );
    }
    artifacts.write()?;
    println!(
        "solved {} nodes x {} steps (alpha * sup|f| = {})",
        grid.node_count(),
        nt,
        sol.cfl.alpha_times_sup
    );
    Ok(EXIT_OK)
}

/// Runs the configured study without writing anything.
pub fn run_study(cfg: &RunConfig) -> Result<ConvergenceReport, CliError> {
    let problem = cfg.build_problem()?;
    let ladder = cfg.ladder()?;
    let region = cfg.region();
    let mut opts = cfg.solver_options();
    let dim = cfg.problem.dim();
    let mut grids = Vec::with_capacity(ladder.len() + 1);
    for r in &ladder {
        grids.push(GridSpec::from_steps(dim, cfg.half_width, r.dx, cfg.horizon, r.dt)?);
    }
    if cfg.problem != ProblemKind::Lqr1d {
        let r = cfg.reference()?;
        grids.push(GridSpec::from_steps(dim, cfg.half_width, r.dx, cfg.horizon, r.dt)?);
    }
    for g in &grids {
        let status = check_cfl(problem.as_ref(), g);
        if !status.satisfies_strict && !cfg.force_cfl {
            return Err(CliError::Cfl(status));
        }
    }
    opts.force_cfl = cfg.force_cfl;
    let report = match cfg.problem {
        ProblemKind::Lqr1d => {
            convergence_study_lqr(&ladder, cfg.half_width, cfg.horizon, &region, &opts)?
        }
        _ => self_convergence_study(
            problem.as_ref(),
            &ladder,
            cfg.reference()?,
            cfg.half_width,
            cfg.horizon,
            Some(&region),
            &opts,
        )?,
    };
    Ok(report)
}

pub fn cmd_convergence(cfg: &RunConfig) -> Result<i32, CliError> {
    let mut artifacts = Artifacts::new(cfg)?;
    let report = run_study(cfg)?;
    if cfg.formats.csv {
        let mut csv = String::from("dx,dt,err_value,err_input\n");
        for (k, r) in report.resolutions.iter().enumerate() {
            let row = [r.dx, r.dt, report.errors_value[k], report.errors_input[k]];
            let cols: Vec<String> = row.iter().map(|v| num(*v)).collect();
            csv.push_str(&cols.join(","));
            csv.push('\n');
        }
        artifacts.add("convergence.csv", csv);
    }
    if cfg.formats.json {
        artifacts.add_json(
            "orders.json",
            &json!({
                "problem": cfg.problem,
                "fitted_order_value": report.fitted_order_value,
                "fitted_order_input": report.fitted_order_input,
                "resolutions": report.resolutions,
                "measurement_region": report.measurement_region,
                "config": cfg.echo(),
            }),
        );
    }
    artifacts.write()?;
    println!(
        "order(value) = {:?}, order(input) = {:?}",
        report.fitted_order_value, report.fitted_order_input
    );
    Ok(EXIT_OK)
}

fn renamed(mut o: PropertyOutcome, name: &str) -> PropertyOutcome {
    o.name = name.to_string();
    o
}

/// Runs every applicable suite for the configured problem and grid.
pub fn run_suites(cfg: &RunConfig) -> Result<Vec<PropertyOutcome>, CliError> {
    let problem = cfg.build_problem()?;
    let grid = cfg.grid_spec()?;
    let status = check_cfl(problem.as_ref(), &grid);
    if !status.satisfies_strict && !cfg.force_cfl {
        return Err(CliError::Cfl(status));
    }
    let (seed, trials) = (cfg.seed, cfg.verify_trials);
    let fixed = Subject::Fixed {
        problem: problem.as_ref(),
        grid,
    };
    let random = Subject::Random {
        cfl_number: None,
        with_drift: true,
    };
    let mut out = vec![
        monotonicity_suite(&fixed, seed, trials)?,
        constant_shift_suite(&fixed, seed, trials)?,
        comparison_suite(&fixed, seed, trials)?,
        renamed(monotonicity_suite(&random, seed, trials)?, "monotonicity_random_problems"),
        renamed(constant_shift_suite(&random, seed, trials)?, "constant_shift_random_problems"),
        renamed(comparison_suite(&random, seed, trials)?, "comparison_principle_random_problems"),
    ];
    let mut opts = cfg.solver_options();
    opts.force_cfl = cfg.force_cfl;
    out.extend(solve_based_suites(problem.as_ref(), &grid, seed, trials, &opts)?);
    out.push(derivative_monotonicity_suite(seed, trials)?);
    out.push(tvd_suite(seed, trials)?);
    if cfg.problem == ProblemKind::Lqr1d {
        let report = consistency_probe(&[0.1, 0.05, 0.025, 0.0125], 0.5, 0.5)?;
        out.push(PropertyOutcome {
            name: "consistency".into(),
            trials: report.dx.len(),
            violations: usize::from(report.order < CONSISTENCY_MIN_ORDER),
            tolerance: 0.0,
            worst_margin: CONSISTENCY_MIN_ORDER - report.order,
            passed: report.order >= CONSISTENCY_MIN_ORDER,
            counterexample: (report.order < CONSISTENCY_MIN_ORDER).then(|| json!(report)),
        });
    }
    Ok(out)
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<i32, CliError> {
    let mut artifacts = Artifacts::new(cfg)?;
    let outcomes = run_suites(cfg)?;
    let passed = outcomes.iter().all(|o| o.passed);
    artifacts.add_json(
        "verify_report.json",
        &json!({
            "problem": cfg.problem,
            "seed": cfg.seed,
            "trials": cfg.verify_trials,
            "passed": passed,
            "properties": outcomes,
            "config": cfg.echo(),
        }),
    );
    artifacts.write()?;
    for o in &outcomes {
        println!(
            "{:<40} {} ({} violations in {} trials, worst margin {:e})",
            o.name,
            if o.passed { "PASS" } else { "FAIL" },
            o.violations,
            o.trials,
            o.worst_margin
        );
    }
    Ok(if passed { EXIT_OK } else { EXIT_PROPERTY_FAILURE })
}

pub fn cmd_rollout(cfg: &RunConfig) -> Result<i32, CliError> {
    let problem = cfg.build_problem()?;
    let grid = cfg.grid_spec()?;
    let x0 = cfg
        .rollout_x0
        .clone()
        .ok_or_else(|| ConfigError("rollout.x0 (or --x0) is required".into()))?;
    if x0.len() != grid.dim() {
        return Err(ConfigError(format!(
            "rollout.x0 has {} components, the problem has {}",
            x0.len(),
            grid.dim()
        ))
        .into());
    }
    if !grid.contains(&x0) {
        return Err(ConfigError(format!("rollout.x0 = {x0:?} lies outside the domain")).into());
    }
    let mut artifacts = Artifacts::new(cfg)?;
    let sol = solve_checked(problem.as_ref(), &grid, cfg)?;
    let path = rollout(problem.as_ref(), &sol.policy, &x0)?;
    let value = sol.value_at(&x0, 0.0)?;
    let m = problem.control_dim();
    if cfg.formats.csv {
        let mut csv = String::from("t,");
        csv.push_str(coord_header(grid.dim()));
        if m == 1 {
            csv.push_str(",a");
        } else {
            for k in 0..m {
                write!(csv, ",a_{k}").expect("string write");
            }
        }
        csv.push_str(",running_cost\n");
        for (k, (t, x)) in path.times.iter().zip(&path.states).enumerate() {
            let mut cols: Vec<String> = std::iter::once(*t).chain(x.iter().cloned()).map(num).collect();
            match path.controls.get(k) {
                Some(a) => {
                    cols.extend(a.iter().map(|v| num(*v)));
                    cols.push(num(path.running_costs[k]));
                }
                // final state: no control is applied
                None => cols.extend(std::iter::repeat_n(String::new(), m + 1)),
            }
            csv.push_str(&cols.join(","));
            csv.push('\n');
        }
        artifacts.add("trajectory.csv", csv);
    }
    if cfg.formats.json {
        artifacts.add_json(
            "rollout.json",
            &json!({
                "x0": x0,
                "total_cost": path.total_cost,
                "terminal_cost": path.terminal_cost,
                "value_at_x0": value,
                "left_domain": path.left_domain,
                "grid": grid,
                "config": cfg.echo(),
            }),
        );
    }
    artifacts.write()?;
    println!("total cost = {}, V(x0, 0) = {}", path.total_cost, value);
    if path.left_domain {
        log::warn!("trajectory crossed the periodic boundary");
    }
    Ok(EXIT_OK)
}
