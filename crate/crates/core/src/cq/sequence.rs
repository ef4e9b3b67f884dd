//! AKKT, PAKKT and Scaled-PAKKT checks on finite solver traces.
//!
//! Limits are approximated on a trailing window (the last third of the
//! trace, at least one record). `gamma_k = ||(1, lambda^k, mu^k)||_inf`.
//! The sign conditions only bite when `gamma` grows; a trace whose last
//! `gamma` stays below `gamma_threshold` is treated as having bounded duals
//! and the sign conditions hold vacuously.

use serde::{Deserialize, Serialize};

use crate::alm::{record_residuals, sup_norm, AlmTrace};
use crate::manifold::Point;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeqOptions {
    pub tol: f64,
    pub tol_act: f64,
    pub dual_cap: f64,
    pub gamma_threshold: f64,
    /// Distance from the last iterate to the limit above which a warning is emitted.
    pub limit_tol: f64,
}

impl Default for SeqOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            tol_act: 1e-6,
            dual_cap: 1e8,
            gamma_threshold: 1e3,
            limit_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AkktReport {
    pub grad_norms: Vec<f64>,
    pub complementarity_ok: bool,
    pub satisfied: bool,
}

/// `kind` is `"equality"` or `"inequality"`; `k` and `index` are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignViolation {
    pub k: usize,
    pub index: usize,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PakktReport {
    pub gamma: Vec<f64>,
    /// `||grad L|| / gamma_k` for the scaled variant, `||grad L||` otherwise.
    pub stationarity: Vec<f64>,
    pub gamma_unbounded: bool,
    pub sign_condition_violations: Vec<SignViolation>,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeqOptReport {
    pub trace_len: usize,
    pub window_start: usize,
    pub limit: Vec<f64>,
    pub limit_distance: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    pub akkt: AkktReport,
    pub pakkt: PakktReport,
    pub scaled_pakkt: PakktReport,
    pub dual_bounded: bool,
    pub dual_sup: f64,
    pub tol: f64,
}

pub fn analyze_sequence(
    prob: &crate::problem::CroProblem,
    trace: &AlmTrace,
    limit: &Point,
    opts: &SeqOptions,
) -> Result<SeqOptReport> {
    let len = trace.len();
    if len == 0 {
        return Err(Error::EmptyTrace);
    }
    let window = len.div_ceil(3).max(1);
    let start = len - window;
    let tail = &trace.records[start..];

    let mut grad_norms = Vec::with_capacity(len);
    let mut h_vals = Vec::with_capacity(len);
    let mut g_vals = Vec::with_capacity(len);
    for rec in &trace.records {
        grad_norms.push(record_residuals(prob, rec)?.stationarity);
        let p = prob.point(&rec.point)?;
        let (h, g) = prob.constraint_values(&p)?;
        h_vals.push(h);
        g_vals.push(g);
    }
    let gamma: Vec<f64> = trace.records.iter().map(|r| sup_norm(r).max(1.0)).collect();
    let dual_sup = trace.records.iter().map(sup_norm).fold(0.0_f64, f64::max);

    let last = prob.point(&trace.records[len - 1].point)?;
    let limit_distance = prob.manifold.dist(&last, limit);
    let warning = (limit_distance > opts.limit_tol).then(|| {
        format!("limit point is {limit_distance:.3e} away from the last iterate")
    });

    let (_, g_lim) = prob.constraint_values(limit)?;
    let inactive: Vec<usize> = (0..prob.n_ineq())
        .filter(|&j| g_lim[j].abs() > opts.tol_act)
        .collect();
    let complementarity_ok = tail
        .iter()
        .all(|r| inactive.iter().all(|&j| r.mu[j] <= opts.tol));
    let akkt = AkktReport {
        satisfied: grad_norms[len - 1] <= opts.tol && complementarity_ok,
        grad_norms: grad_norms.clone(),
        complementarity_ok,
    };

    let gamma_unbounded = gamma[len - 1] >= opts.gamma_threshold;
    let mut violations = Vec::new();
    if gamma_unbounded {
        let avg = |f: &dyn Fn(usize) -> f64| {
            (start..len).map(f).sum::<f64>() / window as f64
        };
        for i in 0..prob.n_eq() {
            let ratio = avg(&|k| trace.records[k].lambda[i].abs() / gamma[k]);
            if ratio > opts.tol {
                for k in start..len {
                    if trace.records[k].lambda[i] * h_vals[k][i] <= 0.0 {
                        violations.push(SignViolation {
                            k: trace.records[k].k,
                            index: i + 1,
                            kind: "equality".into(),
                        });
                    }
                }
            }
        }
        for j in 0..prob.n_ineq() {
            let ratio = avg(&|k| trace.records[k].mu[j] / gamma[k]);
            if ratio > opts.tol {
                for k in start..len {
                    if trace.records[k].mu[j] * g_vals[k][j] <= 0.0 {
                        violations.push(SignViolation {
                            k: trace.records[k].k,
                            index: j + 1,
                            kind: "inequality".into(),
                        });
                    }
                }
            }
        }
    }

    let scaled: Vec<f64> = grad_norms.iter().zip(&gamma).map(|(g, c)| g / c).collect();
    let pakkt = PakktReport {
        satisfied: akkt.satisfied && violations.is_empty(),
        gamma: gamma.clone(),
        stationarity: grad_norms,
        gamma_unbounded,
        sign_condition_violations: violations.clone(),
    };
    let scaled_pakkt = PakktReport {
        satisfied: scaled[len - 1] <= opts.tol && complementarity_ok && violations.is_empty(),
        gamma,
        stationarity: scaled,
        gamma_unbounded,
        sign_condition_violations: violations,
    };

    Ok(SeqOptReport {
        trace_len: len,
        window_start: trace.records[start].k,
        limit: limit.as_slice().to_vec(),
        limit_distance,
        warning,
        akkt,
        pakkt,
        scaled_pakkt,
        dual_bounded: dual_sup < opts.dual_cap,
        dual_sup,
        tol: opts.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alm::{self, AlmConfig, AlmRecord, AlmVerdict};
    use crate::fixtures;
    use crate::inner_solver::InnerStatus;
    use crate::problem::MultiplierEstimate;

    #[test]
    fn single_exact_record() {
        let prob = fixtures::problem("equator-lp").unwrap();
        let rec = AlmRecord {
            k: 1,
            point: vec![1.0, 0.0, 0.0],
            lambda: vec![],
            mu: vec![1.0],
            lambda_bar: vec![],
            mu_bar: vec![1.0],
            rho: 1.0,
            eps: 0.1,
            v: vec![0.0],
            h_norm: 0.0,
            inner_status: InnerStatus::Converged,
            inner_iterations: 0,
            al_grad_norm: 0.0,
        };
        let trace = AlmTrace { records: vec![rec] };
        let limit = prob.point(&[1.0, 0.0, 0.0]).unwrap();
        let r = analyze_sequence(&prob, &trace, &limit, &SeqOptions::default()).unwrap();
        assert!(r.akkt.satisfied);
        assert!(r.pakkt.satisfied && !r.pakkt.gamma_unbounded);
        assert_eq!(r.akkt.grad_norms.len(), 1);
        assert!(r.warning.is_none());
    }

    #[test]
    fn equator_run_is_akkt() {
        let prob = fixtures::problem("equator-lp").unwrap();
        let f = fixtures::get("equator-lp").unwrap();
        let start = prob.point(f.start.unwrap()).unwrap();
        let out = alm::run(&prob, &AlmConfig::default(), &start, &MultiplierEstimate::zeros(0, 1)).unwrap();
        assert_eq!(out.verdict, AlmVerdict::KktApprox);
        let opts = SeqOptions {
            tol: 1e-5,
            ..Default::default()
        };
        let r = analyze_sequence(&prob, &out.trace, &out.point, &opts).unwrap();
        assert!(r.akkt.satisfied);
        assert!(r.dual_bounded);
        assert!(r.pakkt.sign_condition_violations.is_empty());
        assert_eq!(r.pakkt.gamma.len(), out.trace.len());
    }

    #[test]
    fn empty_trace_is_an_error() {
        let prob = fixtures::problem("equator-lp").unwrap();
        let limit = prob.point(&[1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            analyze_sequence(&prob, &AlmTrace::default(), &limit, &SeqOptions::default()),
            Err(Error::EmptyTrace)
        ));
    }
}
