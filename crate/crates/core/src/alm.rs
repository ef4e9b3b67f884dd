//! Safeguarded augmented Lagrangian outer loop.
//!
//! Iteration `k`:
//!
//! 1. approximately minimize the PHR function at `(lambda_bar, mu_bar, rho_k)`
//!    to tolerance `eps_k`, warm-started from the previous iterate;
//! 2. `lambda = lambda_bar + rho h`, `mu = [mu_bar + rho g]_+`;
//! 3. keep `rho` if `k = 1` or `max(||h||, ||V||)` dropped by the factor `tau`,
//!    otherwise multiply it by `gamma`, where `V = (mu - mu_bar) / rho`;
//! 4. project `(lambda, mu)` onto the safeguarding boxes.
//!
//! The loop stops on an approximate KKT point, on an approximately
//! stationary point of the infeasibility measure, on inner-solver failure or
//! after `max_outer` iterations.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::inner_solver::{self, InnerConfig, InnerStatus};
use crate::manifold::Point;
use crate::problem::{inf_norm, CroProblem, Evaluation, MultiplierEstimate};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum EpsSchedule {
    /// `initial * factor^(k-1)`
    Geometric { initial: f64, factor: f64 },
    /// Explicit tolerances; the last entry repeats once the list runs out.
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlmConfig {
    pub tau: f64,
    pub gamma: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub mu_max: f64,
    pub rho1: f64,
    pub eps_schedule: EpsSchedule,
    pub max_outer: usize,
    pub kkt_tol: f64,
    pub feas_tol: f64,
    /// Template for the subproblem solver; `grad_tol` is replaced by `eps_k`.
    pub inner: InnerConfig,
}

impl Default for AlmConfig {
    fn default() -> Self {
        Self {
            tau: 0.5,
            gamma: 10.0,
            lambda_min: -1e6,
            lambda_max: 1e6,
            mu_max: 1e6,
            rho1: 1.0,
            eps_schedule: EpsSchedule::Geometric {
                initial: 0.1,
                factor: 0.5,
            },
            max_outer: 200,
            kkt_tol: 1e-6,
            feas_tol: 1e-6,
            inner: InnerConfig::default(),
        }
    }
}

impl AlmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(0.0..1.0).contains(&self.tau) {
            return bad("tau must lie in [0, 1)");
        }
        if !(self.gamma > 1.0) {
            return bad("gamma must exceed 1");
        }
        if !(self.lambda_min <= self.lambda_max) {
            return bad("lambda_min must not exceed lambda_max");
        }
        if !(self.mu_max > 0.0) {
            return bad("mu_max must be positive");
        }
        if !(self.rho1 > 0.0) {
            return bad("rho1 must be positive");
        }
        if !(self.kkt_tol > 0.0 && self.feas_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        match &self.eps_schedule {
            EpsSchedule::Geometric { initial, factor } => {
                if !(*initial > 0.0 && *factor > 0.0 && *factor < 1.0) {
                    return bad("geometric schedule needs initial > 0 and factor in (0, 1)");
                }
            }
            EpsSchedule::Fixed(v) => {
                if v.is_empty() || v.iter().any(|e| !(*e >= 0.0)) {
                    return bad("fixed schedule needs nonnegative entries");
                }
            }
        }
        self.inner.validate()
    }

    /// Inner tolerance for outer iteration `k` (1-based).
    pub fn eps(&self, k: usize) -> f64 {
        match &self.eps_schedule {
            EpsSchedule::Geometric { initial, factor } => {
                let e = initial * factor.powi((k.max(1) - 1).min(i32::MAX as usize) as i32);
                e.max(self.kkt_tol / 10.0)
            }
            EpsSchedule::Fixed(v) => v[(k.max(1) - 1).min(v.len() - 1)],
        }
    }
}

/// One outer iteration. `lambda_bar`, `mu_bar` and `rho` are the values
/// used by the subproblem of this iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmRecord {
    pub k: usize,
    pub point: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub lambda_bar: Vec<f64>,
    pub mu_bar: Vec<f64>,
    pub rho: f64,
    pub eps: f64,
    pub v: Vec<f64>,
    pub h_norm: f64,
    pub inner_status: InnerStatus,
    pub inner_iterations: usize,
    pub al_grad_norm: f64,
}

impl AlmRecord {
    pub fn multipliers(&self) -> MultiplierEstimate {
        MultiplierEstimate::new(self.lambda.clone(), self.mu.clone())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlmTrace {
    pub records: Vec<AlmRecord>,
}

impl AlmTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&AlmRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlmVerdict {
    KktApprox,
    InfeasibleStationary,
    InnerFailure,
    IterLimit,
}

#[derive(Debug, Clone)]
pub struct AlmOutcome {
    pub verdict: AlmVerdict,
    pub trace: AlmTrace,
    pub point: Point,
    pub multipliers: MultiplierEstimate,
    pub residuals: Residuals,
}

/// Residuals at the final iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
    pub infeasibility_grad: f64,
}

/// `lambda = lambda_bar + rho h`, `mu = [mu_bar + rho g]_+`.
pub fn update_multipliers(
    mult_bar: &MultiplierEstimate,
    rho: f64,
    h: &DVector<f64>,
    g: &DVector<f64>,
) -> MultiplierEstimate {
    MultiplierEstimate {
        lambda: &mult_bar.lambda + h * rho,
        mu: (&mult_bar.mu + g * rho).map(|x| if x > 0.0 { x } else { 0.0 }),
    }
}

/// Penalty for iteration `k + 1` given `(||h||, ||V||)` at `k - 1` and `k`.
pub fn penalty_update(
    prev: (f64, f64),
    curr: (f64, f64),
    rho_k: f64,
    tau: f64,
    gamma: f64,
    k: usize,
) -> f64 {
    if k <= 1 || curr.0.max(curr.1) <= tau * prev.0.max(prev.1) {
        rho_k
    } else {
        gamma * rho_k
    }
}

/// Projection onto `[lambda_min, lambda_max]^s x [0, mu_max]^m`.
pub fn safeguard(mult: &MultiplierEstimate, cfg: &AlmConfig) -> MultiplierEstimate {
    // `+ 0.0` turns -0.0 into +0.0
    MultiplierEstimate {
        lambda: mult.lambda.map(|x| x.clamp(cfg.lambda_min, cfg.lambda_max) + 0.0),
        mu: mult.mu.map(|x| x.clamp(0.0, cfg.mu_max) + 0.0),
    }
}

/// `max_j min(mu_j, |g_j|)`
pub fn complementarity(mu: &DVector<f64>, g: &DVector<f64>) -> f64 {
    mu.iter()
        .zip(g.iter())
        .fold(0.0_f64, |acc, (m, gj)| acc.max(m.min(gj.abs())))
}

fn residuals(ev: &Evaluation, mult: &MultiplierEstimate) -> Residuals {
    Residuals {
        stationarity: ev.lagrangian_gradient(mult).norm(),
        feasibility: ev.max_violation(),
        complementarity: complementarity(&mult.mu, &ev.g),
        infeasibility_grad: ev.infeasibility().1.norm(),
    }
}

fn in_box(mult: &MultiplierEstimate, cfg: &AlmConfig) -> bool {
    mult.lambda
        .iter()
        .all(|&l| l >= cfg.lambda_min && l <= cfg.lambda_max)
        && mult.mu.iter().all(|&m| (0.0..=cfg.mu_max).contains(&m))
}

/// Runs the outer loop from `start` with safeguarded multipliers `seed`.
pub fn run(
    prob: &CroProblem,
    cfg: &AlmConfig,
    start: &Point,
    seed: &MultiplierEstimate,
) -> Result<AlmOutcome> {
    cfg.validate()?;
    if seed.lambda.len() != prob.n_eq() || seed.mu.len() != prob.n_ineq() {
        return Err(Error::DimensionMismatch {
            what: "seed multipliers",
            expected: prob.n_eq() + prob.n_ineq(),
            got: seed.lambda.len() + seed.mu.len(),
        });
    }
    if !in_box(seed, cfg) {
        return Err(Error::InvalidConfig(
            "seed multipliers lie outside the safeguarding boxes".into(),
        ));
    }
    if !prob.manifold.contains(start.as_slice(), 1e-10) {
        return Err(Error::InvalidProblem("start point is not on the manifold".into()));
    }

    let mut trace = AlmTrace::default();
    let mut p = start.clone();
    let mut mult_bar = safeguard(seed, cfg);
    let mut rho = cfg.rho1;
    let mut prev_progress = (f64::INFINITY, f64::INFINITY);

    for k in 1..=cfg.max_outer {
        let eps = cfg.eps(k);
        let inner_cfg = InnerConfig {
            grad_tol: eps,
            ..cfg.inner
        };
        let sub = inner_solver::minimize(
            |q: &Point| Ok(prob.evaluate(q)?.aug_lagrangian(&mult_bar, rho)),
            &prob.manifold,
            &p,
            &inner_cfg,
        )?;
        p = sub.point;

        let ev = prob.evaluate(&p)?;
        let mult = update_multipliers(&mult_bar, rho, &ev.h, &ev.g);
        let v = (&mult.mu - &mult_bar.mu) / rho;
        let progress = (ev.h.norm(), v.norm());
        let res = residuals(&ev, &mult);

        trace.records.push(AlmRecord {
            k,
            point: p.as_slice().to_vec(),
            lambda: mult.lambda.as_slice().to_vec(),
            mu: mult.mu.as_slice().to_vec(),
            lambda_bar: mult_bar.lambda.as_slice().to_vec(),
            mu_bar: mult_bar.mu.as_slice().to_vec(),
            rho,
            eps,
            v: v.as_slice().to_vec(),
            h_norm: progress.0,
            inner_status: sub.status,
            inner_iterations: sub.iterations,
            al_grad_norm: sub.grad_norm,
        });

        let verdict = if sub.status != InnerStatus::Converged {
            Some(AlmVerdict::InnerFailure)
        } else if res.stationarity <= cfg.kkt_tol
            && res.feasibility <= cfg.feas_tol
            && res.complementarity <= cfg.kkt_tol
        {
            Some(AlmVerdict::KktApprox)
        } else if res.feasibility > cfg.feas_tol
            && res.infeasibility_grad <= cfg.kkt_tol * res.feasibility.min(1.0)
        {
            Some(AlmVerdict::InfeasibleStationary)
        } else if k == cfg.max_outer {
            Some(AlmVerdict::IterLimit)
        } else {
            None
        };
        if let Some(verdict) = verdict {
            return Ok(AlmOutcome {
                verdict,
                trace,
                point: p,
                multipliers: mult,
                residuals: res,
            });
        }

        rho = penalty_update(prev_progress, progress, rho, cfg.tau, cfg.gamma, k);
        prev_progress = progress;
        mult_bar = safeguard(&mult, cfg);
    }
    unreachable!("max_outer >= 1 always yields a verdict inside the loop")
}

/// Recomputes the residuals of a trace record, for analysis of stored traces.
pub fn record_residuals(prob: &CroProblem, rec: &AlmRecord) -> Result<Residuals> {
    let p = prob.point(&rec.point)?;
    Ok(residuals(&prob.evaluate(&p)?, &rec.multipliers()))
}

pub(crate) fn sup_norm(rec: &AlmRecord) -> f64 {
    inf_norm(&DVector::from_column_slice(&rec.lambda)).max(inf_norm(&DVector::from_column_slice(&rec.mu)))
}
