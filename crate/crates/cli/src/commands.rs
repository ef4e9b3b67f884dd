use std::io::Write;
use std::path::{Path, PathBuf};

use ralm_core::alm::{self, AlmConfig, AlmVerdict, EpsSchedule, Residuals};
use ralm_core::cq::{self, CqOptions, SeqOptions};
use ralm_core::manifold::Point;
use ralm_core::problem::MultiplierEstimate;
use serde::Serialize;

use crate::problem_file::{list_builtins, load_problem, LoadedProblem};
use crate::{
    trace, AnalyzeArgs, CertifyArgs, CliError, Command, Coords, CqFlags, SolveArgs, SolverFlags, EXIT_ANALYZE,
    EXIT_ERROR, EXIT_INFEASIBLE, EXIT_INFEASIBLE_POINT, EXIT_OK, EXIT_SOLVER_FAILURE,
};

#[derive(Debug, Serialize)]
pub struct SolveSummary {
    pub problem: String,
    pub verdict: AlmVerdict,
    pub iterations: usize,
    pub point: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub residuals: Residuals,
    pub trace: PathBuf,
}

pub fn solver_config(lp: &LoadedProblem, flags: &SolverFlags) -> AlmConfig {
    let mut cfg = AlmConfig::default();
    lp.overrides.apply(&mut cfg);
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = flags.$f { cfg.$f = v; } )* };
    }
    set!(kkt_tol, feas_tol, rho1, tau, gamma, max_outer);
    if let Some(e0) = flags.eps0 {
        let factor = match cfg.eps_schedule {
            EpsSchedule::Geometric { factor, .. } => factor,
            EpsSchedule::Fixed(_) => 0.5,
        };
        cfg.eps_schedule = EpsSchedule::Geometric { initial: e0, factor };
    }
    cfg
}

pub fn cq_options(flags: &CqFlags) -> CqOptions {
    let mut opts = CqOptions::default();
    if let Some(e) = flags.cq_eps {
        opts.eps = e;
    }
    if let Some(s) = flags.cq_samples {
        opts.samples = s;
    }
    if let Some(s) = flags.seed {
        opts.seed = s;
    }
    opts
}

fn out_dir(out: &Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_json<W: Write, T: Serialize>(stdout: &mut W, value: &T, copy_to: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)?;
    writeln!(stdout, "{text}")?;
    if let Some(path) = copy_to {
        std::fs::write(path, format!("{text}\n"))?;
    }
    Ok(())
}

fn start_point(lp: &LoadedProblem, point: &Option<Coords>) -> Result<Point, CliError> {
    let coords = point
        .as_ref()
        .map(|c| c.0.clone())
        .or_else(|| lp.start.clone())
        .or_else(|| lp.reference.clone())
        .ok_or_else(|| CliError::Load(format!("problem `{}` has no start point; pass --point", lp.problem.name)))?;
    Ok(lp.problem.point(&coords)?)
}

fn run_solver(lp: &LoadedProblem, cfg: &AlmConfig, start: &Point) -> Result<alm::AlmOutcome, CliError> {
    let seed = MultiplierEstimate::zeros(lp.problem.n_eq(), lp.problem.n_ineq());
    Ok(alm::run(&lp.problem, cfg, start, &seed)?)
}

pub fn solve<W: Write>(args: &SolveArgs, stdout: &mut W) -> Result<i32, CliError> {
    let lp = load_problem(&args.target.problem)?;
    let cfg = solver_config(&lp, &args.solver);
    let start = start_point(&lp, &args.point)?;
    let out = run_solver(&lp, &cfg, &start)?;

    let path = out_dir(&args.target.out)?.join(format!("{}.trace.csv", lp.problem.name));
    trace::write_trace(&out.trace, std::fs::File::create(&path)?)?;
    let summary = SolveSummary {
        problem: lp.problem.name.clone(),
        verdict: out.verdict,
        iterations: out.trace.len(),
        point: out.point.as_slice().to_vec(),
        lambda: out.multipliers.lambda.as_slice().to_vec(),
        mu: out.multipliers.mu.as_slice().to_vec(),
        residuals: out.residuals,
        trace: path,
    };
    write_json(stdout, &summary, None)?;
    Ok(match out.verdict {
        AlmVerdict::KktApprox => EXIT_OK,
        AlmVerdict::InfeasibleStationary => EXIT_INFEASIBLE,
        AlmVerdict::InnerFailure | AlmVerdict::IterLimit => EXIT_SOLVER_FAILURE,
    })
}

pub fn certify<W: Write>(args: &CertifyArgs, stdout: &mut W) -> Result<i32, CliError> {
    let lp = load_problem(&args.target.problem)?;
    let cfg = solver_config(&lp, &args.solver);
    let p = if args.solve_first {
        let start = start_point(&lp, &None)?;
        run_solver(&lp, &cfg, &start)?.point
    } else {
        let coords = args
            .point
            .as_ref()
            .map(|c| c.0.clone())
            .or_else(|| lp.reference.clone())
            .or_else(|| lp.start.clone())
            .ok_or_else(|| CliError::Load("no point to certify; pass --point or --solve-first".into()))?;
        lp.problem.point(&coords)?
    };
    let report = cq::certify(&lp.problem, &p, &cq_options(&args.cq), cfg.feas_tol)?;
    let copy = match &args.target.out {
        Some(_) => Some(out_dir(&args.target.out)?.join(format!("{}.cq.json", lp.problem.name))),
        None => None,
    };
    write_json(stdout, &report, copy.as_deref())?;
    Ok(EXIT_OK)
}

pub fn analyze<W: Write>(args: &AnalyzeArgs, stdout: &mut W) -> Result<i32, CliError> {
    let lp = load_problem(&args.target.problem)?;
    let file = std::fs::File::open(&args.trace)
        .map_err(|e| CliError::Trace(format!("{}: {e}", args.trace.display())))?;
    let tr = trace::read_trace(file, &lp.problem)?;
    let last = tr
        .last()
        .ok_or_else(|| CliError::Trace("trace has no rows".into()))?;
    let limit = lp
        .problem
        .point(args.point.as_ref().map_or(&last.point, |c| &c.0))?;
    let mut opts = SeqOptions::default();
    if let Some(t) = args.tol {
        opts.tol = t;
    }
    let report = cq::analyze_sequence(&lp.problem, &tr, &limit, &opts)?;
    let copy = match &args.target.out {
        Some(_) => Some(out_dir(&args.target.out)?.join(format!("{}.seq.json", lp.problem.name))),
        None => None,
    };
    write_json(stdout, &report, copy.as_deref())?;
    Ok(EXIT_OK)
}

pub fn list_problems<W: Write>(stdout: &mut W) -> Result<i32, CliError> {
    for (name, description) in list_builtins()? {
        writeln!(stdout, "{name}\t{description}")?;
    }
    Ok(EXIT_OK)
}

pub fn run<W: Write, E: Write>(cmd: &Command, stdout: &mut W, stderr: &mut E) -> i32 {
    let (result, failure_code) = match cmd {
        Command::Solve(a) => (solve(a, stdout), EXIT_SOLVER_FAILURE),
        Command::Certify(a) => {
            let r = certify(a, stdout);
            let code = match &r {
                Err(CliError::Core(ralm_core::Error::Infeasible { .. })) => EXIT_INFEASIBLE_POINT,
                _ => EXIT_ERROR,
            };
            (r, code)
        }
        Command::Analyze(a) => (analyze(a, stdout), EXIT_ANALYZE),
        Command::ListProblems => (list_problems(stdout), EXIT_ERROR),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                CliError::Load(_) if !matches!(cmd, Command::Analyze(_)) => EXIT_ERROR,
                _ => failure_code,
            }
        }
    }
}
