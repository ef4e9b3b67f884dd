//! Sampled neighborhood tests: CRCQ, RCRCQ, CPLD, RCPLD and CRSC.

use nalgebra::DVector;

use super::{
    check_enumeration, check_licq, check_mfcq, family_of, j_minus_from, qn_evidence, split_mask,
    vectors_of, Condition, CqEntry, CqOptions, Verdict, Witness,
};
use crate::linalg::{numerical_rank, positive_linear_dependence, select_basis_subset};
use crate::manifold::Point;
use crate::problem::{active_indices, CroProblem, Evaluation};
use crate::Result;

struct Sampled {
    at_p: Evaluation,
    eq: Vec<usize>,
    act: Vec<usize>,
    qs: Vec<Evaluation>,
}

impl Sampled {
    fn new(prob: &CroProblem, p: &Point, opts: &CqOptions) -> Result<Self> {
        let at_p = prob.evaluate(p)?;
        let eq: Vec<usize> = (0..prob.n_eq()).collect();
        let act = active_indices(&at_p.g, opts.tol_act);
        check_enumeration(eq.len() + act.len())?;
        let qs = prob
            .manifold
            .sample_ball(p, opts.eps, opts.samples, opts.seed)?
            .iter()
            .map(|q| prob.evaluate(q))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { at_p, eq, act, qs })
    }

    fn rank(&self, ev: &Evaluation, eq: &[usize], ineq: &[usize], tol: f64) -> Result<usize> {
        Ok(numerical_rank(&vectors_of(ev, eq, ineq), tol)?)
    }

    /// First sample where the rank of `A(q, eq, ineq)` differs from `target`
    /// (or, with `below`, is not below `target`).
    fn find_rank_violation(
        &self,
        eq: &[usize],
        ineq: &[usize],
        target: usize,
        below: bool,
        tol: f64,
    ) -> Result<Option<(usize, usize)>> {
        for (k, q) in self.qs.iter().enumerate() {
            let r = self.rank(q, eq, ineq, tol)?;
            let bad = if below { r >= target } else { r != target };
            if bad {
                return Ok(Some((k, r)));
            }
        }
        Ok(None)
    }

    fn violation_witness(
        &self,
        eq: &[usize],
        ineq: &[usize],
        rank_p: usize,
        sample: usize,
        rank_q: usize,
    ) -> Witness {
        let mut w = Witness::subset(eq, ineq);
        w.point = Some(self.qs[sample].point.as_slice().to_vec());
        w.rank_at_p = Some(rank_p);
        w.rank_at_q = Some(rank_q);
        w
    }

    fn masks(&self, all_eq: bool) -> impl Iterator<Item = u32> {
        let s = self.eq.len();
        let n = s + self.act.len();
        let eq_bits: u32 = if all_eq { (1u32 << s) - 1 } else { 0 };
        (0..1u32 << n).filter(move |m| m & eq_bits == eq_bits)
    }
}

/// Evaluates one condition. LICQ, MFCQ and QN are forwarded to their own
/// checks so callers can treat all eight uniformly.
pub fn check_neighborhood_cq(
    prob: &CroProblem,
    p: &Point,
    which: Condition,
    opts: &CqOptions,
) -> Result<CqEntry> {
    let tol = opts.tol_rank;
    let entry = |verdict, w| Ok(opts.entry(which, verdict, w));
    match which {
        Condition::Licq => return check_licq(prob, p, opts),
        Condition::Mfcq => return check_mfcq(prob, p, opts),
        Condition::Qn => return qn_evidence(prob, p, opts),
        _ => {}
    }
    let sm = Sampled::new(prob, p, opts)?;

    match which {
        Condition::Crcq | Condition::Rcrcq => {
            for mask in sm.masks(which == Condition::Rcrcq) {
                let (i, j) = split_mask(mask, &sm.eq, &sm.act);
                let rp = sm.rank(&sm.at_p, &i, &j, tol)?;
                if let Some((k, rq)) = sm.find_rank_violation(&i, &j, rp, false, tol)? {
                    return entry(
                        Verdict::EvidenceFails,
                        sm.violation_witness(&i, &j, rp, k, rq),
                    );
                }
            }
            entry(Verdict::EvidenceHolds, Witness::default())
        }
        Condition::Cpld => {
            for mask in sm.masks(false) {
                let (i, j) = split_mask(mask, &sm.eq, &sm.act);
                if let Some(w) = persistence_violation(&sm, &i, &j, opts)? {
                    return entry(Verdict::EvidenceFails, w);
                }
            }
            entry(Verdict::EvidenceHolds, Witness::default())
        }
        Condition::Rcpld => {
            let eq_vecs: Vec<DVector<f64>> = vectors_of(&sm.at_p, &sm.eq, &[]);
            let k: Vec<usize> = select_basis_subset(&eq_vecs, tol)
                .into_iter()
                .map(|b| sm.eq[b])
                .collect();
            let rp = sm.rank(&sm.at_p, &sm.eq, &[], tol)?;
            if let Some((s, rq)) = sm.find_rank_violation(&sm.eq, &[], rp, false, tol)? {
                return entry(
                    Verdict::EvidenceFails,
                    sm.violation_witness(&sm.eq, &[], rp, s, rq),
                );
            }
            for mask in 0..1u32 << sm.act.len() {
                let (_, j) = split_mask(mask << sm.eq.len(), &sm.eq, &sm.act);
                if let Some(w) = persistence_violation(&sm, &k, &j, opts)? {
                    return entry(Verdict::EvidenceFails, w);
                }
            }
            let mut w = Witness::subset(&k, &[]);
            w.rank_at_p = Some(rp);
            entry(Verdict::EvidenceHolds, w)
        }
        Condition::Crsc => {
            let jm = j_minus_from(&sm.at_p, &sm.eq, &sm.act, opts)?;
            let rp = sm.rank(&sm.at_p, &sm.eq, &jm, tol)?;
            if let Some((s, rq)) = sm.find_rank_violation(&sm.eq, &jm, rp, false, tol)? {
                return entry(
                    Verdict::EvidenceFails,
                    sm.violation_witness(&sm.eq, &jm, rp, s, rq),
                );
            }
            let mut w = Witness::subset(&sm.eq, &jm);
            w.rank_at_p = Some(rp);
            entry(Verdict::EvidenceHolds, w)
        }
        Condition::Licq | Condition::Mfcq | Condition::Qn => unreachable!(),
    }
}

/// If `A(p, i, j)` is positively dependent but some sample makes
/// `A(q, i, j)` linearly independent, returns the witness.
fn persistence_violation(
    sm: &Sampled,
    i: &[usize],
    j: &[usize],
    opts: &CqOptions,
) -> Result<Option<Witness>> {
    let Some(cert) = positive_linear_dependence(&family_of(&sm.at_p, i, j), opts.tol_pld)? else {
        return Ok(None);
    };
    let size = i.len() + j.len();
    let rp = sm.rank(&sm.at_p, i, j, opts.tol_rank)?;
    Ok(sm
        .find_rank_violation(i, j, size, true, opts.tol_rank)?
        .map(|(k, rq)| {
            let mut w = sm.violation_witness(i, j, rp, k, rq);
            w.alpha = cert.alpha;
            w.beta = cert.beta;
            w
        }))
}

/// RCRCQ through its equivalent basis description: constant rank of the
/// equality gradients, and persistence of linear dependence of
/// `A(., K, J)` for a basis `K` of the equality gradients at `p`.
/// Used to cross-check [`check_neighborhood_cq`].
pub fn rcrcq_basis_form(prob: &CroProblem, p: &Point, opts: &CqOptions) -> Result<Verdict> {
    let tol = opts.tol_rank;
    let sm = Sampled::new(prob, p, opts)?;
    let rp = sm.rank(&sm.at_p, &sm.eq, &[], tol)?;
    if sm.find_rank_violation(&sm.eq, &[], rp, false, tol)?.is_some() {
        return Ok(Verdict::EvidenceFails);
    }
    let eq_vecs = vectors_of(&sm.at_p, &sm.eq, &[]);
    let k: Vec<usize> = select_basis_subset(&eq_vecs, tol)
        .into_iter()
        .map(|b| sm.eq[b])
        .collect();
    for mask in 0..1u32 << sm.act.len() {
        let (_, j) = split_mask(mask << sm.eq.len(), &sm.eq, &sm.act);
        let size = k.len() + j.len();
        if sm.rank(&sm.at_p, &k, &j, tol)? < size
            && sm.find_rank_violation(&k, &j, size, true, tol)?.is_some()
        {
            return Ok(Verdict::EvidenceFails);
        }
    }
    Ok(Verdict::EvidenceHolds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn verdict(name: &str, c: Condition) -> Verdict {
        let prob = fixtures::problem(name).unwrap();
        let p = prob.point(&fixtures::get(name).unwrap().reference_point()).unwrap();
        check_neighborhood_cq(&prob, &p, c, &CqOptions::default()).unwrap().verdict
    }

    #[test]
    fn cpld_sphere() {
        assert_eq!(verdict("paper-cpld-sphere", Condition::Crcq), Verdict::EvidenceFails);
        assert_eq!(verdict("paper-cpld-sphere", Condition::Cpld), Verdict::EvidenceHolds);
    }

    #[test]
    fn crcq_failure_names_the_jumping_pair() {
        let prob = fixtures::problem("paper-cpld-sphere").unwrap();
        let p = prob.point(&[0.0, 0.0, 1.0]).unwrap();
        let e = check_neighborhood_cq(&prob, &p, Condition::Crcq, &CqOptions::default()).unwrap();
        assert_eq!(e.witness.inequalities, vec![1, 2]);
        assert_eq!((e.witness.rank_at_p, e.witness.rank_at_q), (Some(1), Some(2)));
        assert_eq!(e.eps, Some(1e-2));
        assert_eq!(e.samples, Some(64));
    }

    #[test]
    fn crsc_sphere() {
        assert_eq!(verdict("paper-crsc-sphere", Condition::Rcpld), Verdict::EvidenceFails);
        assert_eq!(verdict("paper-crsc-sphere", Condition::Crsc), Verdict::EvidenceHolds);
    }

    #[test]
    fn plane_examples() {
        assert_eq!(verdict("paper-mfcq-plane", Condition::Crcq), Verdict::EvidenceFails);
        assert_eq!(verdict("paper-rcrcq-plane", Condition::Rcrcq), Verdict::EvidenceHolds);
        assert_eq!(verdict("paper-rcrcq-plane", Condition::Cpld), Verdict::EvidenceFails);
        assert_eq!(verdict("paper-rcrcq-plane", Condition::Rcpld), Verdict::EvidenceHolds);
    }

    #[test]
    fn unconstrained_is_vacuous() {
        let prob = CroProblem::parse("free", "sphere:3", &["x", "y", "z"], "z", &[], &[]).unwrap();
        let p = prob.point(&[0.0, 0.0, 1.0]).unwrap();
        for c in Condition::ALL {
            let v = check_neighborhood_cq(&prob, &p, c, &CqOptions::default()).unwrap().verdict;
            assert!(v.holds(), "{c:?} -> {v:?}");
        }
    }

    #[test]
    fn enumeration_guard() {
        let ineqs: Vec<String> = (0..21).map(|k| format!("x*{k}")).collect();
        let refs: Vec<&str> = ineqs.iter().map(|s| s.as_str()).collect();
        let prob = CroProblem::parse("many", "sphere:3", &["x", "y", "z"], "0", &[], &refs).unwrap();
        let p = prob.point(&[0.0, 0.0, 1.0]).unwrap();
        let err = check_neighborhood_cq(&prob, &p, Condition::Crcq, &CqOptions::default());
        assert!(matches!(err, Err(crate::Error::EnumerationOverflow(21))));
    }

    #[test]
    fn basis_form_agrees_on_fixtures() {
        for f in fixtures::all() {
            let prob = f.problem().unwrap();
            let p = prob.point(&f.reference_point()).unwrap();
            let opts = CqOptions::default();
            let direct = check_neighborhood_cq(&prob, &p, Condition::Rcrcq, &opts).unwrap().verdict;
            assert_eq!(direct, rcrcq_basis_form(&prob, &p, &opts).unwrap(), "{}", f.name);
        }
    }
}
