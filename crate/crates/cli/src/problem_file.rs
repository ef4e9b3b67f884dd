//! TOML problem files and the builtin registry.
//!
//! ```toml
//! name = "equator"
//! manifold = "sphere:3"
//! variables = ["x", "y", "z"]
//! objective = "z"
//! inequalities = ["-z"]
//! start = [0.6, 0.0, 0.8]
//!
//! [solver]
//! rho1 = 10.0
//! eps_schedule = { kind = "geometric", initial = 0.1, factor = 0.5 }
//! ```

use std::path::{Path, PathBuf};

use ralm_core::alm::{AlmConfig, EpsSchedule};
use ralm_core::fixtures;
use ralm_core::problem::CroProblem;
use serde::Deserialize;

use crate::CliError;

pub const BUILTIN_DIR_ENV: &str = "RALM_BUILTIN_DIR";

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub manifold: String,
    pub variables: Vec<String>,
    pub objective: String,
    #[serde(default)]
    pub equalities: Vec<String>,
    #[serde(default)]
    pub inequalities: Vec<String>,
    pub start: Option<Vec<f64>>,
    /// Point used by `certify` when no `--point` is given.
    pub reference: Option<Vec<f64>>,
    #[serde(default)]
    pub solver: SolverOverrides,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ScheduleFile {
    Geometric { initial: f64, factor: f64 },
    Fixed { values: Vec<f64> },
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub mu_max: Option<f64>,
    pub rho1: Option<f64>,
    pub eps_schedule: Option<ScheduleFile>,
    pub max_outer: Option<usize>,
    pub kkt_tol: Option<f64>,
    pub feas_tol: Option<f64>,
}

impl SolverOverrides {
    pub fn apply(&self, cfg: &mut AlmConfig) {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        set!(tau, gamma, lambda_min, lambda_max, mu_max, rho1, max_outer, kkt_tol, feas_tol);
        match &self.eps_schedule {
            Some(ScheduleFile::Geometric { initial, factor }) => {
                cfg.eps_schedule = EpsSchedule::Geometric {
                    initial: *initial,
                    factor: *factor,
                }
            }
            Some(ScheduleFile::Fixed { values }) => {
                cfg.eps_schedule = EpsSchedule::Fixed(values.clone())
            }
            None => {}
        }
    }
}

/// A problem ready to run, with whatever defaults its source supplied.
#[derive(Debug, Clone)]
pub struct LoadedProblem {
    pub problem: CroProblem,
    pub description: String,
    pub start: Option<Vec<f64>>,
    pub reference: Option<Vec<f64>>,
    pub overrides: SolverOverrides,
}

impl ProblemFile {
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Load(format!("{origin}: {e}")))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Load(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn build(&self, origin: &str) -> Result<LoadedProblem, CliError> {
        let vars: Vec<&str> = self.variables.iter().map(String::as_str).collect();
        let eqs: Vec<&str> = self.equalities.iter().map(String::as_str).collect();
        let ineqs: Vec<&str> = self.inequalities.iter().map(String::as_str).collect();
        let problem = CroProblem::parse(&self.name, &self.manifold, &vars, &self.objective, &eqs, &ineqs)
            .map_err(|e| CliError::Load(format!("{origin}: {}", self.locate(&e))))?;
        for (what, pt) in [("start", &self.start), ("reference", &self.reference)] {
            if let Some(pt) = pt {
                problem
                    .point(pt)
                    .map_err(|e| CliError::Load(format!("{origin}: {what}: {e}")))?;
            }
        }
        Ok(LoadedProblem {
            problem,
            description: self.description.clone(),
            start: self.start.clone(),
            reference: self.reference.clone(),
            overrides: self.solver.clone(),
        })
    }

    /// Names the offending expression field for expression errors.
    fn locate(&self, err: &ralm_core::Error) -> String {
        let ralm_core::Error::Expr(inner) = err else {
            return err.to_string();
        };
        let fields = std::iter::once(("objective".to_string(), &self.objective))
            .chain(self.equalities.iter().enumerate().map(|(i, s)| (format!("equalities[{i}]"), s)))
            .chain(self.inequalities.iter().enumerate().map(|(i, s)| (format!("inequalities[{i}]"), s)));
        let vars = &self.variables;
        for (name, src) in fields {
            if let Err(e) = ralm_core::expr::ExprAst::parse(src, vars) {
                if e == *inner {
                    return format!("{name} `{src}`: {e}");
                }
            }
        }
        err.to_string()
    }
}

fn from_fixture(f: &fixtures::Fixture) -> Result<LoadedProblem, CliError> {
    Ok(LoadedProblem {
        problem: f.problem()?,
        description: f.description.to_string(),
        start: f.start.map(<[f64]>::to_vec),
        reference: Some(f.reference_point()),
        overrides: SolverOverrides::default(),
    })
}

fn extra_dirs() -> Vec<PathBuf> {
    std::env::var_os(BUILTIN_DIR_ENV)
        .map(|v| std::env::split_paths(&v).collect())
        .unwrap_or_default()
}

fn extra_files() -> Vec<PathBuf> {
    let mut files = Vec::new();
    for dir in extra_dirs() {
        let Ok(entries) = std::fs::read_dir(&dir) else {
            continue;
        };
        let mut found: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        found.sort();
        files.extend(found);
    }
    files
}

/// `(name, description)` for every builtin, core fixtures first.
pub fn list_builtins() -> Result<Vec<(String, String)>, CliError> {
    let mut out: Vec<(String, String)> = fixtures::all()
        .iter()
        .map(|f| (f.name.to_string(), f.description.to_string()))
        .collect();
    for path in extra_files() {
        let pf = ProblemFile::read(&path)?;
        out.push((pf.name, pf.description));
    }
    Ok(out)
}

/// Resolves a path to a problem file, or else a builtin name.
pub fn load_problem(reference: &str) -> Result<LoadedProblem, CliError> {
    let path = Path::new(reference);
    if path.is_file() {
        return ProblemFile::read(path)?.build(reference);
    }
    if let Some(f) = fixtures::get(reference) {
        return from_fixture(&f);
    }
    for path in extra_files() {
        let pf = ProblemFile::read(&path)?;
        if pf.name == reference {
            return pf.build(&path.display().to_string());
        }
    }
    Err(CliError::Load(format!(
        "`{reference}` is neither a problem file nor a builtin problem"
    )))
}
