//! `nehari`: batch front end for the ground-state solver.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 a failed check
//! (or an indeterminate classification), 3 solver non-convergence.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use nehari_core::experiments::{self, write_report, Check, NSystemMode, Report, SweepParam};
use nehari_core::nehari::{initial_guesses, minimize_from_starts};
use nehari_core::scalar_gs::solve_scalar;
use nehari_core::spectrum::{classify_with, lambda_threshold, threshold_report};
use nehari_core::{io, scalar_gs, Error, Field, Model, SolveResult, SymbolKind};
use serde_json::json;

use config::{Config, Defaults};

#[derive(Parser, Debug)]
#[command(name = "nehari", version, about = "Ground states of coupled fractional systems on the Nehari manifold")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// JSON config file (must carry "version": 1)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Fractional exponent s
    #[arg(long)]
    s: Option<f64>,
    /// Spatial dimension
    #[arg(long)]
    n: Option<usize>,
    /// First linear coefficient
    #[arg(long)]
    lambda1: Option<f64>,
    /// Second linear coefficient
    #[arg(long)]
    lambda2: Option<f64>,
    /// Coupling; sets every coupling of the system
    #[arg(long)]
    beta: Option<f64>,
    /// Grid points per dimension
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,
    /// Box length L (the box is [-L/2, L/2)^n)
    #[arg(long = "box")]
    box_length: Option<f64>,
    /// Solver tolerance on the constrained residual
    #[arg(long)]
    tol: Option<f64>,
    /// Seed for the initial-guess family and restarts
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for reports and field files
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fourier multiplier
    #[arg(long, value_enum)]
    symbol: Option<SymbolArg>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Print the effective configuration and exit
    #[arg(long)]
    print_config: bool,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum SymbolArg {
    Continuum,
    Subordinated,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scalar ground state of (-Δ)^s u + λu = c u^(p-1)
    SolveScalar {
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        coefficient: Option<f64>,
        /// 3 for the quadratic, 4 for the cubic nonlinearity
        #[arg(long)]
        degree: Option<u32>,
        #[command(flatten)]
        common: Common,
    },
    /// Coupled minimization over the standard initial-guess family
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Coupling threshold Λ with weight V₂
    Lambda {
        #[command(flatten)]
        common: Common,
    },
    /// Classify the semi-trivial solution (0, V₂) at the configured β
    Classify {
        #[command(flatten)]
        common: Common,
    },
    /// Run a theorem scenario
    Verify {
        #[arg(value_enum)]
        scenario: Scenario,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep one parameter of the two-equation system
    Sweep {
        #[arg(long, value_enum)]
        param: Option<ParamArg>,
        /// Comma-separated values
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[command(flatten)]
        common: Common,
    },
    /// Operator and solver self-tests
    Check {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Scenario {
    Th1,
    Th2,
    Th3,
    Th5,
    #[value(name = "explore-2nlfs")]
    Explore2nlfs,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum ParamArg {
    Beta,
    Lambda1,
    Lambda2,
}

/// Error carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NonConvergence { .. } | Error::ProjectionFailure { .. } => 3,
            Error::IndeterminateClassification { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

type Outcome = Result<u8, Failure>;

fn effective_config(common: &Common, defaults: Defaults) -> Result<Config, Failure> {
    let base = Config::defaults(defaults);
    let mut c = match &common.config {
        Some(path) => config::load(path, &base).map_err(Failure::usage)?,
        None => base,
    };
    if let Some(s) = common.s {
        c.s = s;
    }
    if let Some(n) = common.n {
        c.n = n;
    }
    if let Some(l) = common.lambda1 {
        *c.lambdas.first_mut().ok_or_else(|| Failure::usage("no lambda1 in this system"))? = l;
    }
    if let Some(l) = common.lambda2 {
        *c.lambdas.get_mut(1).ok_or_else(|| Failure::usage("no lambda2 in this system"))? = l;
    }
    if let Some(b) = common.beta {
        c.betas.iter_mut().for_each(|x| *x = b);
    }
    if let Some(np) = common.grid_n {
        c.grid.points_per_dim = np;
    }
    if let Some(l) = common.box_length {
        c.grid.box_length = l;
    }
    if let Some(t) = common.tol {
        c.solver.tol = t;
    }
    if let Some(seed) = common.seed {
        c.solver.seed = seed;
    }
    if let Some(sym) = common.symbol {
        c.grid.symbol = match sym {
            SymbolArg::Continuum => SymbolKind::Continuum,
            SymbolArg::Subordinated => SymbolKind::Subordinated,
        };
    }
    Ok(c)
}

fn emit(value: &impl serde::Serialize) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_json(dir: &Path, name: &str, value: &impl serde::Serialize) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{name}.json"));
    std::fs::write(&path, serde_json::to_string_pretty(value)?)?;
    Ok(path)
}

fn write_fields(dir: &Path, name: &str, fields: &[Field], s: f64) -> Result<Vec<serde_json::Value>, Failure> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for (j, f) in fields.iter().enumerate() {
        let path = dir.join(format!("{name}_{j}.nhf"));
        let hash = io::write_field(&path, f, s)?;
        std::fs::write(dir.join(format!("{name}_{j}.csv")), io::profile_csv(f))?;
        out.push(json!({"path": path.display().to_string(), "sha256": hash}));
    }
    Ok(out)
}

fn result_json(r: &SolveResult) -> serde_json::Value {
    serde_json::to_value(r).unwrap_or_default()
}

fn cmd_solve_scalar(common: &Common, lambda: Option<f64>, coefficient: Option<f64>, degree: Option<u32>) -> Outcome {
    let mut c = effective_config(common, Defaults::TwoEq)?;
    if let Some(l) = lambda {
        c.scalar.lambda = l;
    }
    if let Some(k) = coefficient {
        c.scalar.coefficient = k;
    }
    if let Some(d) = degree {
        c.scalar.degree = d;
    }
    if common.print_config {
        emit(&c)?;
        return Ok(0);
    }
    if !matches!(c.scalar.degree, 3 | 4) {
        return Err(Failure::usage(format!("degree must be 3 or 4, got {}", c.scalar.degree)));
    }
    let grid = c.grid()?;
    let r = solve_scalar(c.s, c.scalar.lambda, c.scalar.degree, c.scalar.coefficient, grid, &c.solver)?;
    let mut out = json!({"config": c, "result": result_json(&r)});
    if let Some(dir) = &common.out {
        out["artifacts"] = json!(write_fields(dir, "scalar", r.state.components(), c.s)?);
        std::fs::write(dir.join("scalar_trace.csv"), r.trace_csv())?;
        write_json(dir, "scalar", &out)?;
    }
    emit(&out)?;
    Ok(0)
}

fn system_defaults(c: &Common) -> Result<Defaults, Failure> {
    // the variant in a config file decides the default family
    let Some(path) = &c.config else {
        return Ok(Defaults::TwoEq);
    };
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("config is not valid JSON: {e}")))?;
    Ok(match v.get("variant").and_then(|x| x.as_str()) {
        Some("star_n_eq") => Defaults::Star,
        Some("two_nlfs_fkdv") => Defaults::TwoNlfsFkdv,
        _ => Defaults::TwoEq,
    })
}

fn cmd_solve(common: &Common) -> Outcome {
    let c = effective_config(common, system_defaults(common)?)?;
    if common.print_config {
        emit(&c)?;
        return Ok(0);
    }
    let cfg = c.experiment()?;
    let model = Model::for_params(&cfg.params, cfg.grid)?;
    let starts = initial_guesses(&cfg.params, cfg.grid, cfg.opts.seed, cfg.guesses)?;
    let r = minimize_from_starts(&model, &starts, &cfg.opts)?;
    let mut out = json!({"config": c, "result": result_json(&r)});
    if let Some(dir) = &common.out {
        out["artifacts"] = json!(write_fields(dir, "solve", r.state.components(), c.s)?);
        std::fs::write(dir.join("solve_trace.csv"), r.trace_csv())?;
        write_json(dir, "solve", &out)?;
    }
    emit(&out)?;
    Ok(0)
}

fn cmd_lambda(common: &Common) -> Outcome {
    let c = effective_config(common, Defaults::TwoEq)?;
    if common.print_config {
        emit(&c)?;
        return Ok(0);
    }
    let cfg = c.experiment()?;
    let (report, _) = threshold_report(&cfg.params, cfg.grid)?;
    if let Some(dir) = &common.out {
        write_json(dir, "lambda", &report)?;
    }
    emit(&report)?;
    Ok(0)
}

fn cmd_classify(common: &Common) -> Outcome {
    let c = effective_config(common, Defaults::TwoEq)?;
    if common.print_config {
        emit(&c)?;
        return Ok(0);
    }
    let cfg = c.experiment()?;
    let p = &cfg.params;
    let v2 = scalar_gs::quadratic_ground_state(p.s, p.lambdas[1], cfg.grid)?;
    let threshold = lambda_threshold(p.s, p.lambdas[0], &v2, cfg.grid)?;
    let cl = classify_with(p, p.beta(), &v2, &threshold, cfg.opts.seed);
    let out = match &cl {
        Ok(cl) => json!({
            "beta": p.beta(),
            "Lambda": cl.threshold,
            "verdict": cl.verdict,
            "min_eig": cl.min_eig,
            "h2_block": cl.h2,
        }),
        Err(e) => json!({
            "beta": p.beta(),
            "Lambda": threshold.lambda,
            "verdict": "indeterminate",
            "detail": e.to_string(),
        }),
    };
    if let Some(dir) = &common.out {
        write_json(dir, "classify", &out)?;
        if let Ok(cl) = &cl {
            write_fields(dir, "witness", cl.witness.components(), p.s)?;
        }
    }
    emit(&out)?;
    Ok(match cl {
        Ok(cl) => {
            info!("verdict {:?}", cl.verdict);
            0
        }
        Err(_) => 2,
    })
}

fn finish_report<R: Report>(mut report: R, common: &Common, name: &str, s: f64) -> Outcome {
    if let Some(dir) = &common.out {
        let path = write_report(&mut report, dir, name, s)?;
        info!("report written to {}", path.display());
    }
    emit(&report)?;
    for c in report.checks() {
        eprintln!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    Ok(if report.passed() { 0 } else { 2 })
}

fn cmd_verify(common: &Common, scenario: Scenario) -> Outcome {
    let defaults = match scenario {
        Scenario::Th1 | Scenario::Th2 => Defaults::TwoEq,
        Scenario::Th3 | Scenario::Th5 => Defaults::Star,
        Scenario::Explore2nlfs => Defaults::TwoNlfsFkdv,
    };
    let mut c = effective_config(common, defaults)?;
    if scenario == Scenario::Th2 && common.beta.is_none() && common.config.is_none() {
        c.betas = vec![1.0];
    }
    if scenario == Scenario::Th5 {
        c.n_system_mode = NSystemMode::LambdasLarge;
    }
    if common.print_config {
        emit(&c)?;
        return Ok(0);
    }
    let cfg = c.experiment()?;
    match scenario {
        Scenario::Th1 => finish_report(experiments::verify_th1(&cfg)?, common, "th1", c.s),
        Scenario::Th2 => finish_report(experiments::verify_th2(&cfg, &c.th2)?, common, "th2", c.s),
        Scenario::Th3 | Scenario::Th5 => {
            let name = if scenario == Scenario::Th3 { "th3" } else { "th5" };
            finish_report(experiments::verify_n_system(&cfg, c.n_system_mode)?, common, name, c.s)
        }
        Scenario::Explore2nlfs => {
            finish_report(experiments::explore_2nlfs_fkdv(&cfg)?, common, "explore_2nlfs", c.s)
        }
    }
}

fn cmd_sweep(common: &Common, param: Option<ParamArg>, values: Option<Vec<f64>>) -> Outcome {
    let mut c = effective_config(common, Defaults::TwoEq)?;
    if let Some(p) = param {
        c.sweep.param = match p {
            ParamArg::Beta => SweepParam::Beta,
            ParamArg::Lambda1 => SweepParam::Lambda1,
            ParamArg::Lambda2 => SweepParam::Lambda2,
        };
    }
    if let Some(v) = values {
        c.sweep.values = v;
    }
    if common.print_config {
        emit(&c)?;
        return Ok(0);
    }
    if c.sweep.values.is_empty() {
        return Err(Failure::usage("sweep needs at least one value"));
    }
    let cfg = c.experiment()?;
    let rows = experiments::sweep(&cfg, c.sweep.param, &c.sweep.values)?;
    let csv = experiments::sweep_csv(&rows);
    if let Some(dir) = &common.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep.csv"), &csv)?;
        write_json(dir, "sweep", &json!({"config": c, "rows": rows}))?;
    }
    print!("{csv}");
    Ok(0)
}

fn cmd_check(common: &Common) -> Outcome {
    let c = effective_config(common, Defaults::TwoEq)?;
    if common.print_config {
        emit(&c)?;
        return Ok(0);
    }
    let checks: Vec<Check> = experiments::self_check(c.solver.seed)?;
    for ch in &checks {
        println!("[{}] {}: {}", if ch.passed { "PASS" } else { "FAIL" }, ch.name, ch.detail);
    }
    if let Some(dir) = &common.out {
        write_json(dir, "check", &checks)?;
    }
    Ok(if checks.iter().all(|c| c.passed) { 0 } else { 2 })
}

fn common_of(cmd: &Command) -> &Common {
    match cmd {
        Command::SolveScalar { common, .. }
        | Command::Solve { common }
        | Command::Lambda { common }
        | Command::Classify { common }
        | Command::Verify { common, .. }
        | Command::Sweep { common, .. }
        | Command::Check { common } => common,
    }
}

fn run(cli: Cli) -> Outcome {
    let common = common_of(&cli.command).clone();
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    match cli.command {
        Command::SolveScalar {
            lambda,
            coefficient,
            degree,
            ..
        } => cmd_solve_scalar(&common, lambda, coefficient, degree),
        Command::Solve { .. } => cmd_solve(&common),
        Command::Lambda { .. } => cmd_lambda(&common),
        Command::Classify { .. } => cmd_classify(&common),
        Command::Verify { scenario, .. } => cmd_verify(&common, scenario),
        Command::Sweep { param, values, .. } => cmd_sweep(&common, param, values),
        Command::Check { .. } => cmd_check(&common),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
