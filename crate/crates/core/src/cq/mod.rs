//! Constraint-qualification certification and sequential optimality
//! analysis.
//!
//! LICQ and MFCQ are decided at the point itself. The constant-rank and
//! positive-dependence conditions quantify over a neighborhood; here the
//! neighborhood is replaced by points drawn with
//! [`ManifoldSpec::sample_ball`](crate::manifold::ManifoldSpec::sample_ball),
//! so their verdicts are `Evidence*` and carry the `(eps, samples, seed)`
//! that produced them.
//!
//! Library functions take and return 0-based constraint indices. The
//! serializable report types ([`Witness`], [`CqReport`],
//! [`SeqOptReport`]) use 1-based indices, matching the order in which the
//! constraints appear in a problem file.

mod neighborhood;
mod qn;
mod sequence;

pub use neighborhood::{check_neighborhood_cq, rcrcq_basis_form};
pub use qn::qn_evidence;
pub use sequence::{analyze_sequence, AkktReport, PakktReport, SeqOptions, SeqOptReport, SignViolation};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::alm::complementarity;
use crate::linalg::simplex::{self, SimplexOptions};
use crate::linalg::{
    self, numerical_rank, positive_linear_dependence, DEFAULT_PLD_TOL, DEFAULT_RANK_TOL,
};
use crate::linalg::VectorFamily;
use crate::manifold::Point;
use crate::problem::{CroProblem, Evaluation, MultiplierEstimate, DEFAULT_TOL_ACT};
use crate::{Error, Result};

/// Largest `s + |A(p)|` for which subsets are enumerated.
pub const MAX_ENUMERATION: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Condition {
    Licq,
    Mfcq,
    Crcq,
    Rcrcq,
    Cpld,
    Rcpld,
    Crsc,
    Qn,
}

impl Condition {
    pub const ALL: [Condition; 8] = [
        Condition::Licq,
        Condition::Mfcq,
        Condition::Crcq,
        Condition::Rcrcq,
        Condition::Cpld,
        Condition::Rcpld,
        Condition::Crsc,
        Condition::Qn,
    ];

    pub fn is_pointwise(self) -> bool {
        matches!(self, Condition::Licq | Condition::Mfcq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Holds,
    Fails,
    EvidenceHolds,
    EvidenceFails,
}

impl Verdict {
    /// `Holds` or `EvidenceHolds`.
    pub fn holds(self) -> bool {
        matches!(self, Verdict::Holds | Verdict::EvidenceHolds)
    }

    fn pointwise(holds: bool) -> Self {
        if holds {
            Verdict::Holds
        } else {
            Verdict::Fails
        }
    }
}

/// Numeric evidence behind a verdict. Indices are 1-based. `alpha` is
/// aligned with `equalities` and `beta` with `inequalities`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub equalities: Vec<usize>,
    pub inequalities: Vec<usize>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_at_p: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_at_q: Option<usize>,
}

impl Witness {
    fn subset(eq: &[usize], ineq: &[usize]) -> Self {
        Self {
            equalities: eq.iter().map(|i| i + 1).collect(),
            inequalities: ineq.iter().map(|j| j + 1).collect(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqEntry {
    pub condition: Condition,
    pub verdict: Verdict,
    pub witness: Witness,
    pub eps: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

/// Tolerances and sampling parameters shared by all checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CqOptions {
    pub eps: f64,
    pub samples: usize,
    pub seed: u64,
    pub tol_act: f64,
    pub tol_rank: f64,
    pub tol_pld: f64,
}

impl Default for CqOptions {
    fn default() -> Self {
        Self {
            eps: 1e-2,
            samples: 64,
            seed: 0,
            tol_act: DEFAULT_TOL_ACT,
            tol_rank: DEFAULT_RANK_TOL,
            tol_pld: DEFAULT_PLD_TOL,
        }
    }
}

impl CqOptions {
    fn entry(&self, condition: Condition, verdict: Verdict, witness: Witness) -> CqEntry {
        let sampled = !condition.is_pointwise();
        CqEntry {
            condition,
            verdict,
            witness,
            eps: sampled.then_some(self.eps),
            samples: sampled.then_some(self.samples),
            seed: sampled.then_some(self.seed),
        }
    }
}

/// All eight verdicts at one point. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CqReport {
    pub problem: String,
    pub point: Vec<f64>,
    pub active_set: Vec<usize>,
    pub j_minus: Vec<usize>,
    pub conditions: Vec<CqEntry>,
}

impl CqReport {
    pub fn get(&self, c: Condition) -> Option<&CqEntry> {
        self.conditions.iter().find(|e| e.condition == c)
    }

    pub fn verdict(&self, c: Condition) -> Option<Verdict> {
        self.get(c).map(|e| e.verdict)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KktResidual {
    pub stationarity: f64,
    pub feasibility: f64,
    pub complementarity: f64,
}

/// `(||grad L||, max(||h||_inf, max [g]_+), max_j min(mu_j, |g_j|))`
pub fn kkt_residual(prob: &CroProblem, p: &Point, mult: &MultiplierEstimate) -> Result<KktResidual> {
    if mult.mu.iter().any(|&m| m < 0.0) {
        return Err(Error::InvalidConfig("mu must be nonnegative".into()));
    }
    let ev = prob.evaluate(p)?;
    Ok(KktResidual {
        stationarity: prob.lagrangian_gradient(p, mult)?.norm(),
        feasibility: ev.max_violation(),
        complementarity: complementarity(&mult.mu, &ev.g),
    })
}

pub(crate) fn vectors_of(ev: &Evaluation, eq: &[usize], ineq: &[usize]) -> Vec<DVector<f64>> {
    eq.iter()
        .map(|&i| ev.grad_h[i].clone())
        .chain(ineq.iter().map(|&j| ev.grad_g[j].clone()))
        .collect()
}

pub(crate) fn family_of(ev: &Evaluation, eq: &[usize], ineq: &[usize]) -> VectorFamily {
    let mut fam = VectorFamily::new(ev.grad_f.len());
    for &i in eq {
        fam.push_free(i, ev.grad_h[i].clone()).expect("gradients share the ambient dimension");
    }
    for &j in ineq {
        fam.push_signed(j, ev.grad_g[j].clone()).expect("gradients share the ambient dimension");
    }
    fam
}

/// `A(p, I, J)`: equality gradients `I` (free sign) and inequality
/// gradients `J` (sign constrained). `J` must be active at `p`.
pub fn gradient_family(
    prob: &CroProblem,
    p: &Point,
    eq: &[usize],
    ineq: &[usize],
    tol_act: f64,
) -> Result<VectorFamily> {
    let ev = prob.evaluate(p)?;
    if let Some(&i) = eq.iter().find(|&&i| i >= prob.n_eq()) {
        return Err(Error::InvalidProblem(format!("no equality constraint {}", i + 1)));
    }
    for &j in ineq {
        if j >= prob.n_ineq() || ev.g[j].abs() > tol_act {
            return Err(Error::NotActive { index: j + 1 });
        }
    }
    Ok(family_of(&ev, eq, ineq))
}

fn all_active(prob: &CroProblem, ev: &Evaluation, tol_act: f64) -> (Vec<usize>, Vec<usize>) {
    (
        (0..prob.n_eq()).collect(),
        crate::problem::active_indices(&ev.g, tol_act),
    )
}

pub fn check_licq(prob: &CroProblem, p: &Point, opts: &CqOptions) -> Result<CqEntry> {
    let ev = prob.evaluate(p)?;
    let (eq, act) = all_active(prob, &ev, opts.tol_act);
    let vecs = vectors_of(&ev, &eq, &act);
    let rank = numerical_rank(&vecs, opts.tol_rank)?;
    let holds = rank == vecs.len();
    let mut w = Witness::subset(&eq, &act);
    w.rank_at_p = Some(rank);
    if !holds {
        let z = linalg::null_vector(&vecs)?;
        let zmax = z.amax();
        let z: Vec<f64> = z.iter().map(|c| c / zmax).collect();
        w.alpha = z[..eq.len()].to_vec();
        w.beta = z[eq.len()..].to_vec();
    }
    Ok(opts.entry(Condition::Licq, Verdict::pointwise(holds), w))
}

pub fn check_mfcq(prob: &CroProblem, p: &Point, opts: &CqOptions) -> Result<CqEntry> {
    let ev = prob.evaluate(p)?;
    let (eq, act) = all_active(prob, &ev, opts.tol_act);
    let fam = family_of(&ev, &eq, &act);
    let cert = positive_linear_dependence(&fam, opts.tol_pld)?;
    let mut w = Witness::subset(&eq, &act);
    let holds = cert.is_none();
    if let Some(c) = cert {
        w.alpha = c.alpha;
        w.beta = c.beta;
    }
    Ok(opts.entry(Condition::Mfcq, Verdict::pointwise(holds), w))
}

/// Active inequalities whose negated gradient lies in the polar of the
/// linearized cone, i.e. `-grad g_j = sum lambda_i grad h_i + sum mu_l grad g_l`
/// with `mu >= 0` over the active set. Decided by phase-one simplex.
pub fn j_minus(prob: &CroProblem, p: &Point, opts: &CqOptions) -> Result<Vec<usize>> {
    let ev = prob.evaluate(p)?;
    let (eq, act) = all_active(prob, &ev, opts.tol_act);
    j_minus_from(&ev, &eq, &act, opts)
}

pub(crate) fn j_minus_from(
    ev: &Evaluation,
    eq: &[usize],
    act: &[usize],
    opts: &CqOptions,
) -> Result<Vec<usize>> {
    let n = ev.grad_f.len();
    let s = eq.len();
    let vecs = vectors_of(ev, eq, act);
    let scale = vecs.iter().map(|v| v.norm()).fold(0.0_f64, f64::max);
    if scale == 0.0 {
        // every gradient vanishes, so each -grad g_j = 0 is trivially representable
        return Ok(act.to_vec());
    }
    // columns: lambda+ (s), lambda- (s), mu (|act|)
    let mut a = nalgebra::DMatrix::zeros(n, 2 * s + act.len());
    for (c, v) in vecs.iter().enumerate() {
        for r in 0..n {
            let x = v[r] / scale;
            if c < s {
                a[(r, c)] = x;
                a[(r, s + c)] = -x;
            } else {
                a[(r, s + c)] = x;
            }
        }
    }
    let lp = SimplexOptions {
        feas_tol: opts.tol_pld,
        ..Default::default()
    };
    let mut out = Vec::new();
    for (pos, &j) in act.iter().enumerate() {
        let b: Vec<f64> = vecs[s + pos].iter().map(|x| -x / scale).collect();
        if simplex::find_feasible(&a, &b, &lp)?.is_some() {
            out.push(j);
        }
    }
    Ok(out)
}

/// Runs every check at `p`. Fails with [`Error::Infeasible`] when the
/// maximal violation exceeds `feas_tol`.
pub fn certify(prob: &CroProblem, p: &Point, opts: &CqOptions, feas_tol: f64) -> Result<CqReport> {
    let ev = prob.evaluate(p)?;
    let violation = ev.max_violation();
    if violation > feas_tol {
        return Err(Error::Infeasible {
            violation,
            tol: feas_tol,
        });
    }
    let (eq, act) = all_active(prob, &ev, opts.tol_act);
    let jm = j_minus_from(&ev, &eq, &act, opts)?;
    let mut conditions = vec![check_licq(prob, p, opts)?, check_mfcq(prob, p, opts)?];
    for c in [
        Condition::Crcq,
        Condition::Rcrcq,
        Condition::Cpld,
        Condition::Rcpld,
        Condition::Crsc,
    ] {
        conditions.push(check_neighborhood_cq(prob, p, c, opts)?);
    }
    conditions.push(qn_evidence(prob, p, opts)?);
    Ok(CqReport {
        problem: prob.name.clone(),
        point: p.as_slice().to_vec(),
        active_set: act.iter().map(|j| j + 1).collect(),
        j_minus: jm.iter().map(|j| j + 1).collect(),
        conditions,
    })
}

pub(crate) fn check_enumeration(n: usize) -> Result<()> {
    if n > MAX_ENUMERATION {
        return Err(Error::EnumerationOverflow(n));
    }
    Ok(())
}

/// Splits a bitmask over `eq ++ act` into the selected index lists.
pub(crate) fn split_mask(mask: u32, eq: &[usize], act: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let s = eq.len();
    let i = (0..s).filter(|b| mask >> b & 1 == 1).map(|b| eq[b]).collect();
    let j = (0..act.len())
        .filter(|b| mask >> (s + b) & 1 == 1)
        .map(|b| act[b])
        .collect();
    (i, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn at_pole(name: &str) -> (CroProblem, Point) {
        let prob = fixtures::problem(name).unwrap();
        let p = prob.point(&[0.0, 0.0, 1.0]).unwrap();
        (prob, p)
    }

    #[test]
    fn cpld_sphere_point_checks() {
        let (prob, p) = at_pole("paper-cpld-sphere");
        let opts = CqOptions::default();
        assert_eq!(check_licq(&prob, &p, &opts).unwrap().verdict, Verdict::Fails);
        let mfcq = check_mfcq(&prob, &p, &opts).unwrap();
        assert_eq!(mfcq.verdict, Verdict::Fails);
        assert!(mfcq.witness.beta[0].abs() < 1e-12 && mfcq.witness.beta[1].abs() < 1e-12);
        assert!((mfcq.witness.beta[2] - mfcq.witness.beta[3]).abs() < 1e-12);
        assert!(mfcq.eps.is_none());
    }

    #[test]
    fn gradient_family_for_opposite_pair() {
        let (prob, p) = at_pole("paper-cpld-sphere");
        let fam = gradient_family(&prob, &p, &[], &[2, 3], 1e-6).unwrap();
        assert_eq!(fam.sign_constrained[0].vec.as_slice(), &[1.0, 1.0, 0.0]);
        assert_eq!(fam.sign_constrained[1].vec.as_slice(), &[-1.0, -1.0, 0.0]);
        assert!(gradient_family(&prob, &p, &[], &[], 1e-6).unwrap().is_empty());
    }

    #[test]
    fn gradient_family_rejects_inactive_index() {
        let prob = fixtures::problem("equator-lp").unwrap();
        let p = prob.point(&[0.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            gradient_family(&prob, &p, &[], &[0], 1e-6),
            Err(Error::NotActive { index: 1 })
        ));
    }

    #[test]
    fn j_minus_examples() {
        let opts = CqOptions::default();
        let (prob, p) = at_pole("paper-crsc-sphere");
        assert_eq!(j_minus(&prob, &p, &opts).unwrap(), vec![0, 1, 2, 3]);
        let (prob, p) = at_pole("paper-cpld-sphere");
        assert_eq!(j_minus(&prob, &p, &opts).unwrap(), vec![2, 3]);
        let prob = CroProblem::parse("one", "sphere:3", &["x", "y", "z"], "0", &[], &["x"]).unwrap();
        assert!(j_minus(&prob, &p, &opts).unwrap().is_empty());
    }

    #[test]
    fn kkt_residual_at_equator() {
        let prob = fixtures::problem("equator-lp").unwrap();
        let p = prob.point(&[1.0, 0.0, 0.0]).unwrap();
        let r = kkt_residual(&prob, &p, &MultiplierEstimate::new(vec![], vec![1.0])).unwrap();
        assert!(r.stationarity <= 1e-12 && r.feasibility <= 1e-12 && r.complementarity <= 1e-12);
        let q = prob.point(&[0.0, 0.0, -1.0]).unwrap();
        assert!(kkt_residual(&prob, &q, &MultiplierEstimate::zeros(0, 1)).unwrap().feasibility > 0.0);
    }

    #[test]
    fn certify_rejects_infeasible_point() {
        let prob = fixtures::problem("equator-lp").unwrap();
        let q = prob.point(&[0.0, 0.0, -1.0]).unwrap();
        assert!(matches!(
            certify(&prob, &q, &CqOptions::default(), 1e-6),
            Err(Error::Infeasible { .. })
        ));
    }
}
