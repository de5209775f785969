//! Command-line front end.
//!
//! | exit | meaning                                   |
//! |------|-------------------------------------------|
//! | 0    | improved / feasible point found / feasible |
//! | 1    | no improvement / none found / infeasible   |
//! | 2    | input or usage error                       |
//! | 3    | solver failure                             |

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand};
use log::warn;

use crate::heur::{
    find_feasible, improve, improve_chain, ChainReport, FeasConfig, HeurError, KChoice, LbConfig, LbOutcome,
};
use crate::model::io::{read_instance, read_point, IoError, SolutionFile};
use crate::model::{Problem, Solution, Tolerances, DEFAULT_FEAS_TOL, DEFAULT_INT_TOL};
use crate::relax;

pub const EXIT_SUCCESS: u8 = 0;
pub const EXIT_NONE: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "localbranch",
    version,
    about = "Local branching heuristics for nonconvex MINLPs"
)]
pub struct Cli {
    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Search the neighbourhood of an incumbent for a better solution.
    Improve(ImproveArgs),
    /// Look for a feasible point from scratch.
    Feasible(FeasibleArgs),
    /// Evaluate a point against an instance.
    Check(CheckArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Instance file.
    pub instance: PathBuf,
    /// Per-MILP time limit in seconds.
    #[arg(long, default_value_t = 2.0, value_parser = parse_seconds)]
    pub milp_time: f64,
    /// Overall time limit in seconds.
    #[arg(long, value_parser = parse_seconds)]
    pub time_limit: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_FEAS_TOL, value_parser = parse_tolerance)]
    pub tol_feas: f64,
    #[arg(long, default_value_t = DEFAULT_INT_TOL, value_parser = parse_tolerance)]
    pub tol_int: f64,
    /// Write the solution here instead of stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// Write one JSON record per line describing each step.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Write the linear relaxation as text.
    #[arg(long)]
    pub dump_relaxation: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImproveArgs {
    #[command(flatten)]
    pub common: Common,
    /// Solution file holding the incumbent.
    pub incumbent: PathBuf,
    /// Neighbourhood radius: `auto` or a positive integer.
    #[arg(long, default_value = "auto", value_parser = parse_k)]
    pub k: KChoice,
    /// Main-loop iterations (MILP solves), shared by all rounds.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub max_iter: u32,
    /// Stop at the first improvement instead of searching each neighbourhood
    /// and restarting from its best point.
    #[arg(long)]
    pub first_improvement: bool,
    /// Run even if the incumbent is infeasible.
    #[arg(long)]
    pub force: bool,
    /// Add cumulative seconds to trace records (makes traces run-dependent).
    #[arg(long)]
    pub trace_timing: bool,
}

#[derive(Debug, Args)]
pub struct FeasibleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of multistart points.
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub starts: u32,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub instance: PathBuf,
    pub point: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FEAS_TOL, value_parser = parse_tolerance)]
    pub tol_feas: f64,
    #[arg(long, default_value_t = DEFAULT_INT_TOL, value_parser = parse_tolerance)]
    pub tol_int: f64,
}

fn parse_k(s: &str) -> Result<KChoice, String> {
    if s == "auto" {
        return Ok(KChoice::Auto);
    }
    match s.parse::<usize>() {
        Ok(k) if k >= 1 => Ok(KChoice::Fixed(k)),
        _ => Err(format!("expected `auto` or a positive integer, got `{s}`")),
    }
}

fn parse_seconds(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number of seconds, got `{s}`")),
    }
}

fn parse_tolerance(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("expected a tolerance in (0, 1), got `{s}`")),
    }
}

/// Summary printed to stderr after a command.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub command: &'static str,
    pub instance: PathBuf,
    pub wall_time: Duration,
    pub outcome: String,
    pub initial_objective: Option<f64>,
    pub final_objective: Option<f64>,
    pub iterations: usize,
    pub first_improvement: Option<usize>,
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter) -> fmt::Result {
        writeln!(f, "command:            {}", self.command)?;
        writeln!(f, "instance:           {}", self.instance.display())?;
        writeln!(f, "outcome:            {}", self.outcome)?;
        if let Some(v) = self.initial_objective {
            writeln!(f, "initial objective:  {v}")?;
        }
        if let Some(v) = self.final_objective {
            writeln!(f, "final objective:    {v}")?;
        }
        writeln!(f, "iterations:         {}", self.iterations)?;
        if let Some(i) = self.first_improvement {
            writeln!(f, "first improvement:  {i}")?;
        }
        write!(f, "wall time:          {:.3}s", self.wall_time.as_secs_f64())
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("{0}")]
    Input(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("output path `{0}` is also an input file")]
    Exists(PathBuf),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Solver(_) => EXIT_SOLVER,
            _ => EXIT_INPUT,
        }
    }
}

impl From<HeurError> for CliError {
    fn from(e: HeurError) -> Self {
        match e {
            HeurError::Milp(_) => CliError::Solver(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| {
        CliError::Io(IoError::Write {
            path: path.display().to_string(),
            source,
        })
    })
}

fn emit_solution(out: Option<&Path>, pr: &Problem, sol: &Solution) -> Result<(), CliError> {
    let text = SolutionFile::from_solution(pr, sol, true).to_json()?;
    match out {
        Some(p) => write_file(p, &text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Input(format!("cannot write to stdout: {e}")))
        }
    }
}

fn dump_relaxation(pr: &Problem, path: Option<&Path>) -> Result<(), CliError> {
    if let Some(path) = path {
        let rel = relax::build(pr).map_err(|e| CliError::Input(format!("cannot relax problem: {e}")))?;
        write_file(path, &rel.dump())?;
    }
    Ok(())
}

fn tolerances(feasibility: f64, integrality: f64) -> Tolerances {
    Tolerances {
        feasibility,
        integrality,
    }
}

fn run_improve(a: &ImproveArgs, started: Instant) -> Result<(u8, Option<RunReport>), CliError> {
    let c = &a.common;
    let pr = read_instance(&c.instance)?;
    dump_relaxation(&pr, c.dump_relaxation.as_deref())?;
    let tol = tolerances(c.tol_feas, c.tol_int);
    let point = read_point(&a.incumbent, &pr)?;
    let report = pr
        .check(&point, tol.feasibility, tol.integrality)
        .map_err(|e| CliError::Input(e.to_string()))?;
    if !report.feasible {
        let why = report.describe_worst(&pr);
        if !a.force {
            return Err(CliError::Input(format!("incumbent is not feasible: {why}")));
        }
        warn!("incumbent is not feasible: {why}");
    }
    let incumbent = pr
        .solution(point, &tol)
        .map_err(|e| CliError::Input(format!("incumbent: {e}")))?;
    let cfg = LbConfig {
        k: a.k,
        max_iterations: a.max_iter as usize,
        milp_time_limit: Duration::from_secs_f64(c.milp_time),
        time_limit: c.time_limit.map(Duration::from_secs_f64),
        tolerances: tol,
        require_feasible_incumbent: !a.force,
        ..LbConfig::default()
    };
    let chain = if a.first_improvement {
        let trace = improve(&pr, &incumbent, &cfg)?;
        let best = match &trace.outcome {
            LbOutcome::Improved(s) => s.clone(),
            _ => incumbent.clone(),
        };
        ChainReport {
            rounds: vec![trace],
            best,
        }
    } else {
        improve_chain(&pr, &incumbent, &cfg)?
    };
    if let Some(path) = &c.trace {
        write_file(path, &chain.to_jsonl(a.trace_timing))?;
    }
    let improved = chain.improved();
    let outcome = if improved {
        "improved"
    } else {
        chain.final_outcome().name()
    };
    let code = if improved {
        emit_solution(c.out.as_deref(), &pr, &chain.best)?;
        EXIT_SUCCESS
    } else if matches!(chain.final_outcome(), LbOutcome::SolverFailure) {
        EXIT_SOLVER
    } else {
        EXIT_NONE
    };
    Ok((
        code,
        Some(RunReport {
            command: "improve",
            instance: c.instance.clone(),
            wall_time: started.elapsed(),
            outcome: outcome.to_string(),
            initial_objective: Some(incumbent.objective),
            final_objective: Some(chain.best.objective),
            iterations: chain.iterations(),
            first_improvement: chain.first_improvement(),
        }),
    ))
}

fn run_feasible(a: &FeasibleArgs, started: Instant) -> Result<(u8, Option<RunReport>), CliError> {
    let c = &a.common;
    let pr = read_instance(&c.instance)?;
    dump_relaxation(&pr, c.dump_relaxation.as_deref())?;
    let cfg = FeasConfig {
        starts: a.starts as usize,
        seed: a.seed,
        milp_time_limit: Duration::from_secs_f64(c.milp_time),
        time_limit: c.time_limit.map(Duration::from_secs_f64),
        tolerances: tolerances(c.tol_feas, c.tol_int),
        ..FeasConfig::default()
    };
    let report = find_feasible(&pr, &cfg)?;
    if let Some(path) = &c.trace {
        write_file(path, &report.to_jsonl())?;
    }
    let code = match &report.solution {
        Some(s) => {
            emit_solution(c.out.as_deref(), &pr, s)?;
            EXIT_SUCCESS
        }
        None => EXIT_NONE,
    };
    Ok((
        code,
        Some(RunReport {
            command: "feasible",
            instance: c.instance.clone(),
            wall_time: started.elapsed(),
            outcome: if code == EXIT_SUCCESS { "found" } else { "none" }.to_string(),
            initial_objective: None,
            final_objective: report.solution.as_ref().map(|s| s.objective),
            iterations: report.milp_solves(),
            first_improvement: None,
        }),
    ))
}

fn run_check(a: &CheckArgs) -> Result<(u8, Option<RunReport>), CliError> {
    let pr = read_instance(&a.instance)?;
    let point = read_point(&a.point, &pr)?;
    let report = pr
        .check(&point, a.tol_feas, a.tol_int)
        .map_err(|e| CliError::Input(e.to_string()))?;
    let mut out = String::new();
    match pr.objective_value(&point) {
        Ok(v) => out.push_str(&format!("objective: {v}\n")),
        Err(e) => out.push_str(&format!("objective: cannot be evaluated ({e})\n")),
    }
    out.push_str("constraints:\n");
    for (c, &v) in pr.constraints().iter().zip(&report.constraint_values) {
        let verdict = if v.is_nan() {
            "not evaluable"
        } else if v > a.tol_feas {
            "VIOLATED"
        } else {
            "ok"
        };
        out.push_str(&format!("  {:<24} {:>14.6e}  {verdict}\n", c.name, v));
    }
    out.push_str(&format!("max violation: {}\n", report.max_violation));
    out.push_str(&format!("integrality violation: {}\n", report.integrality_violation));
    out.push_str(&format!(
        "verdict: {}\n",
        if report.feasible {
            "feasible".to_string()
        } else {
            format!("infeasible, {}", report.describe_worst(&pr))
        }
    ));
    print!("{out}");
    Ok((if report.feasible { EXIT_SUCCESS } else { EXIT_NONE }, None))
}

fn refuse_overwrite(c: &Common, inputs: &[&PathBuf]) -> Result<(), CliError> {
    for p in [&c.out, &c.trace, &c.dump_relaxation].into_iter().flatten() {
        if p == &c.instance || inputs.contains(&p) {
            return Err(CliError::Exists(p.clone()));
        }
    }
    Ok(())
}

/// Runs a parsed command line and returns the exit code.
pub fn run(cli: &Cli) -> u8 {
    let started = Instant::now();
    let result = match &cli.command {
        Command::Improve(a) => refuse_overwrite(&a.common, &[&a.incumbent]).and_then(|_| run_improve(a, started)),
        Command::Feasible(a) => refuse_overwrite(&a.common, &[]).and_then(|_| run_feasible(a, started)),
        Command::Check(a) => run_check(a),
    };
    match result {
        Ok((code, report)) => {
            if let Some(r) = report {
                eprintln!("{r}");
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init();
}
