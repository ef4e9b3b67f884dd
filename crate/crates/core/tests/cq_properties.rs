use proptest::prelude::*;
use ralm_core::alm::{self, AlmConfig, AlmVerdict};
use ralm_core::cq::{
    analyze_sequence, certify, check_mfcq, j_minus, qn_evidence, Condition, CqOptions, CqReport,
    SeqOptions, Verdict,
};
use ralm_core::fixtures;
use ralm_core::problem::{CroProblem, MultiplierEstimate};

const IMPLICATIONS: [(Condition, Condition); 7] = [
    (Condition::Licq, Condition::Mfcq),
    (Condition::Mfcq, Condition::Cpld),
    (Condition::Cpld, Condition::Rcpld),
    (Condition::Licq, Condition::Crcq),
    (Condition::Crcq, Condition::Rcrcq),
    (Condition::Crcq, Condition::Cpld),
    (Condition::Rcrcq, Condition::Rcpld),
];

fn chain_violations(r: &CqReport) -> Vec<(Condition, Condition)> {
    IMPLICATIONS
        .iter()
        .copied()
        .filter(|&(a, b)| r.verdict(a).unwrap().holds() && !r.verdict(b).unwrap().holds())
        .collect()
}

fn pole_report(prob: &CroProblem) -> CqReport {
    let p = prob.point(&[0.0, 0.0, 1.0]).unwrap();
    certify(prob, &p, &CqOptions::default(), 1e-6).unwrap()
}

/// Integer-coefficient search for a nontrivial null combination with
/// nonnegative inequality weights.
fn brute_force_pld(free: &[Vec<i64>], signed: &[Vec<i64>], k: i64) -> bool {
    let vs: Vec<&Vec<i64>> = free.iter().chain(signed).collect();
    let n = vs.len();
    let lo: Vec<i64> = (0..n).map(|i| if i < free.len() { -k } else { 0 }).collect();
    let mut coef = lo.clone();
    loop {
        if coef.iter().any(|&c| c != 0)
            && (0..3).all(|r| vs.iter().zip(&coef).map(|(v, c)| v[r] * c).sum::<i64>() == 0)
        {
            return true;
        }
        let mut i = 0;
        loop {
            if i == n {
                return false;
            }
            if coef[i] < k {
                coef[i] += 1;
                break;
            }
            coef[i] = lo[i];
            i += 1;
        }
    }
}

fn linear(c: &[i64]) -> String {
    format!("{}*x + {}*y + {}*z", c[0], c[1], c[2])
}

#[test]
fn implication_chain_holds_on_fixtures() {
    for f in fixtures::all() {
        let prob = f.problem().unwrap();
        let p = prob.point(&f.reference_point()).unwrap();
        let Ok(r) = certify(&prob, &p, &CqOptions::default(), 1e-6) else {
            assert_eq!(f.name, "infeasible-height");
            continue;
        };
        assert!(chain_violations(&r).is_empty(), "{}: {:?}", f.name, chain_violations(&r));
        if r.verdict(Condition::Licq) == Some(Verdict::Holds) {
            assert!(r.conditions.iter().all(|e| e.verdict.holds()), "{}", f.name);
        }
    }
}

#[test]
fn kkt_traces_are_akkt_and_qn_duals_stay_bounded() {
    let opts = SeqOptions {
        tol: 1e-5,
        ..Default::default()
    };
    for f in fixtures::all() {
        let prob = f.problem().unwrap();
        let start = prob.point(&f.start_point()).unwrap();
        let seed = MultiplierEstimate::zeros(prob.n_eq(), prob.n_ineq());
        let out = alm::run(&prob, &AlmConfig::default(), &start, &seed).unwrap();
        if out.verdict != AlmVerdict::KktApprox {
            continue;
        }
        let r = analyze_sequence(&prob, &out.trace, &out.point, &opts).unwrap();
        assert!(r.akkt.satisfied, "{}", f.name);
        let p = prob.point(&f.reference_point()).unwrap();
        if qn_evidence(&prob, &p, &CqOptions::default()).unwrap().verdict == Verdict::EvidenceHolds {
            assert!(r.dual_bounded && r.dual_sup <= 1e4, "{}", f.name);
        }
    }
}

#[test]
fn split_equality_trace_is_pakkt() {
    let f = fixtures::get("paper-split-equality").unwrap();
    let prob = f.problem().unwrap();
    let start = prob.point(&f.start_point()).unwrap();
    let out = alm::run(&prob, &AlmConfig::default(), &start, &MultiplierEstimate::zeros(0, 2)).unwrap();
    let opts = SeqOptions {
        tol: 1e-5,
        ..Default::default()
    };
    let r = analyze_sequence(&prob, &out.trace, &out.point, &opts).unwrap();
    assert!(r.pakkt.satisfied && r.scaled_pakkt.satisfied);
    assert!(r.pakkt.sign_condition_violations.is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn implication_chain_holds_on_random_sphere_problems(seed in 0u64..100_000) {
        let prob = fixtures::random_sphere_problem(seed).unwrap();
        let r = pole_report(&prob);
        prop_assert!(chain_violations(&r).is_empty(), "{:?}", chain_violations(&r));
    }

    #[test]
    fn mfcq_matches_integer_search(
        eqs in prop::collection::vec(prop::collection::vec(-1i64..=1, 3), 0..=2),
        ineqs in prop::collection::vec(prop::collection::vec(-1i64..=1, 3), 0..=2),
    ) {
        let e: Vec<String> = eqs.iter().map(|c| linear(c)).collect();
        let g: Vec<String> = ineqs.iter().map(|c| linear(c)).collect();
        let er: Vec<&str> = e.iter().map(String::as_str).collect();
        let gr: Vec<&str> = g.iter().map(String::as_str).collect();
        let prob = CroProblem::parse("lin", "euclidean:3", &["x", "y", "z"], "0", &er, &gr).unwrap();
        let p = prob.point(&[0.0, 0.0, 0.0]).unwrap();
        let v = check_mfcq(&prob, &p, &CqOptions::default()).unwrap().verdict;
        prop_assert_eq!(v == Verdict::Holds, !brute_force_pld(&eqs, &ineqs, 4));
    }

    #[test]
    fn j_minus_survives_duplication(seed in 0u64..100_000, pick in 0usize..3) {
        let prob = fixtures::random_sphere_problem(seed).unwrap();
        let p = prob.point(&[0.0, 0.0, 1.0]).unwrap();
        let base = j_minus(&prob, &p, &CqOptions::default()).unwrap();
        let dup = pick % prob.n_ineq();
        let mut ineqs = prob.inequalities.clone();
        ineqs.push(prob.inequalities[dup].clone());
        let bigger = CroProblem::new(
            "dup",
            prob.manifold.clone(),
            prob.objective.clone(),
            prob.equalities.clone(),
            ineqs,
        )
        .unwrap();
        let grown = j_minus(&bigger, &p, &CqOptions::default()).unwrap();
        prop_assert!(base.iter().all(|j| grown.contains(j)), "{:?} vs {:?}", base, grown);
    }
}
