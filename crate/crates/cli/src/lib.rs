//! Command-line driver: problem loading, solving, certification and trace
//! analysis.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod problem_file;
pub mod trace;

pub use problem_file::{load_problem, LoadedProblem, ProblemFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_SOLVER_FAILURE: i32 = 3;
pub const EXIT_ANALYZE: i32 = 4;
pub const EXIT_INFEASIBLE_POINT: i32 = 5;
pub const EXIT_USAGE: i32 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Load(String),
    #[error("trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Core(#[from] ralm_core::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Parser)]
#[command(name = "ralm", version, about = "Augmented Lagrangian solver and constraint-qualification diagnostics on manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the augmented Lagrangian method and write the trace CSV.
    Solve(SolveArgs),
    /// Evaluate constraint qualifications at a point.
    Certify(CertifyArgs),
    /// Check AKKT / PAKKT / Scaled-PAKKT on a trace CSV.
    Analyze(AnalyzeArgs),
    /// List builtin problems.
    ListProblems,
}

/// Comma-separated coordinates, e.g. `0,0,1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coords(pub Vec<f64>);

impl std::str::FromStr for Coords {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        s.split(',')
            .map(|c| c.trim().parse::<f64>().map_err(|_| format!("`{c}` is not a number")))
            .collect::<Result<_, _>>()
            .map(Coords)
    }
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Problem file path or builtin name.
    #[arg(long)]
    pub problem: String,
    /// Directory for output files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SolverFlags {
    #[arg(long)]
    pub kkt_tol: Option<f64>,
    #[arg(long)]
    pub feas_tol: Option<f64>,
    #[arg(long)]
    pub rho1: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// First inner tolerance of the geometric schedule.
    #[arg(long)]
    pub eps0: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CqFlags {
    /// Neighborhood sampling radius.
    #[arg(long)]
    pub cq_eps: Option<f64>,
    #[arg(long)]
    pub cq_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub target: ProblemArgs,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Start point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<Coords>,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub target: ProblemArgs,
    #[command(flatten)]
    pub cq: CqFlags,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Point to certify, comma separated; defaults to the problem's reference point.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "solve_first")]
    pub point: Option<Coords>,
    /// Solve first and certify the final iterate.
    #[arg(long)]
    pub solve_first: bool,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub target: ProblemArgs,
    /// Trace CSV written by `solve`.
    #[arg(long)]
    pub trace: PathBuf,
    /// Limit point, comma separated; defaults to the last iterate.
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<Coords>,
    /// Stationarity tolerance for the sequential checks.
    #[arg(long)]
    pub tol: Option<f64>,
}

/// Parses `args` and runs the command, writing the report to `stdout`.
/// Returns the process exit code.
pub fn main_with_args<I, T, W, E>(args: I, stdout: &mut W, stderr: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    commands::run(&cli.command, stdout, stderr)
}
