//! Built-in problem registry.

use std::f64::consts::FRAC_1_SQRT_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::problem::CroProblem;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fixture {
    pub name: &'static str,
    pub description: &'static str,
    pub manifold: &'static str,
    pub vars: &'static [&'static str],
    pub objective: &'static str,
    pub equalities: &'static [&'static str],
    pub inequalities: &'static [&'static str],
    /// Solver start; points on sphere blocks are normalized on load.
    pub start: Option<&'static [f64]>,
    /// Point where constraint qualifications are examined.
    pub reference: &'static [f64],
}

impl Fixture {
    pub fn problem(&self) -> Result<CroProblem> {
        CroProblem::parse(
            self.name,
            self.manifold,
            self.vars,
            self.objective,
            self.equalities,
            self.inequalities,
        )
    }

    pub fn reference_point(&self) -> Vec<f64> {
        self.reference.to_vec()
    }

    pub fn start_point(&self) -> Vec<f64> {
        self.start.unwrap_or(self.reference).to_vec()
    }
}

const XYZ: &[&str] = &["x", "y", "z"];
const XY: &[&str] = &["x", "y"];
const POLE: &[f64] = &[0.0, 0.0, 1.0];
const ORIGIN: &[f64] = &[0.0, 0.0];

static BUILTINS: &[Fixture] = &[
    Fixture {
        name: "paper-cpld-sphere",
        description: "four inequalities on the sphere; CPLD holds at the pole, CRCQ and MFCQ do not",
        manifold: "sphere:3",
        vars: XYZ,
        objective: "-z",
        equalities: &[],
        inequalities: &["x", "x + y^2", "x + y", "-x - y"],
        start: Some(&[-0.3, 0.2, 0.9]),
        reference: POLE,
    },
    Fixture {
        name: "paper-crsc-sphere",
        description: "four inequalities on the sphere; CRSC holds at the pole, RCPLD does not",
        manifold: "sphere:3",
        vars: XYZ,
        objective: "-z",
        equalities: &[],
        inequalities: &["x - y^2", "-x", "y - x^2", "-y"],
        start: Some(&[0.2, 0.2, 0.9]),
        reference: POLE,
    },
    Fixture {
        name: "paper-split-equality",
        description: "an equality written as two opposite inequalities",
        manifold: "sphere:3",
        vars: XYZ,
        objective: "x - z",
        equalities: &[],
        inequalities: &["x", "-x"],
        start: Some(&[0.3, 0.4, 0.8]),
        reference: POLE,
    },
    Fixture {
        name: "paper-qn-sphere",
        description: "two equalities with parallel gradients at the pole; quasinormality holds",
        manifold: "sphere:3",
        vars: XYZ,
        objective: "-z",
        equalities: &["x * exp(y)", "x"],
        inequalities: &[],
        start: Some(&[0.3, 0.3, 0.9]),
        reference: POLE,
    },
    Fixture {
        name: "equator-lp",
        description: "minimize height over the upper hemisphere",
        manifold: "sphere:3",
        vars: XYZ,
        objective: "z",
        equalities: &[],
        inequalities: &["-z"],
        start: Some(&[FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2]),
        reference: &[1.0, 0.0, 0.0],
    },
    Fixture {
        name: "infeasible-height",
        description: "height fixed at 2 on the unit sphere",
        manifold: "sphere:3",
        vars: XYZ,
        objective: "0",
        equalities: &["z - 2"],
        inequalities: &[],
        start: Some(&[0.6, 0.0, 0.8]),
        reference: POLE,
    },
    Fixture {
        name: "paper-mfcq-plane",
        description: "two tangent disks in the plane; MFCQ holds at the origin, CRCQ does not",
        manifold: "euclidean:2",
        vars: XY,
        objective: "-x",
        equalities: &[],
        inequalities: &["((x + 1)^2 + y^2 - 1) / 2", "-(((x - 1)^2 + y^2 - 1) / 2)"],
        start: Some(&[-0.5, 0.3]),
        reference: ORIGIN,
    },
    Fixture {
        name: "paper-rcrcq-plane",
        description: "a circle and two disk exteriors in the plane; RCRCQ holds at the origin, CPLD does not",
        manifold: "euclidean:2",
        vars: XY,
        objective: "y",
        equalities: &["-((x^2 + (y - 1)^2 - 1) / 2)"],
        inequalities: &["-(((x + 1)^2 + y^2 - 1) / 2)", "-(((x - 1)^2 + y^2 - 1) / 2)"],
        start: Some(&[0.3, 0.5]),
        reference: ORIGIN,
    },
];

pub fn all() -> &'static [Fixture] {
    BUILTINS
}

pub fn get(name: &str) -> Option<Fixture> {
    BUILTINS.iter().find(|f| f.name == name).copied()
}

pub fn problem(name: &str) -> Result<CroProblem> {
    get(name)
        .ok_or_else(|| Error::InvalidProblem(format!("unknown builtin problem `{name}`")))?
        .problem()
}

const MONOMIALS: [&str; 5] = ["x", "y", "x^2", "y^2", "x*y"];

fn random_constraint(rng: &mut ChaCha8Rng) -> String {
    let mut terms = Vec::new();
    for m in MONOMIALS {
        match rng.random_range(0..4) {
            0 => terms.push(format!("-{m}")),
            1 => terms.push(m.to_string()),
            _ => {}
        }
    }
    if terms.is_empty() {
        terms.push("x".into());
    }
    terms.join(" + ")
}

/// Seeded problem on `sphere:3` whose constraints are low-degree polynomials
/// in `x, y` with coefficients in `{-1, 0, 1}`, all active at the north pole.
pub fn random_sphere_problem(seed: u64) -> Result<CroProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_eq = rng.random_range(0..=1);
    let n_ineq = rng.random_range(1..=3);
    let eqs: Vec<String> = (0..n_eq).map(|_| random_constraint(&mut rng)).collect();
    let ineqs: Vec<String> = (0..n_ineq).map(|_| random_constraint(&mut rng)).collect();
    let eq_refs: Vec<&str> = eqs.iter().map(String::as_str).collect();
    let ineq_refs: Vec<&str> = ineqs.iter().map(String::as_str).collect();
    CroProblem::parse(
        &format!("random-sphere-{seed}"),
        "sphere:3",
        XYZ,
        "-z",
        &eq_refs,
        &ineq_refs,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_builtin_parses() {
        for f in all() {
            let prob = f.problem().unwrap();
            assert!(prob.point(&f.reference_point()).is_ok(), "{}", f.name);
            assert!(prob.point(&f.start_point()).is_ok(), "{}", f.name);
        }
    }

    #[test]
    fn cpld_sphere_shape() {
        let prob = problem("paper-cpld-sphere").unwrap();
        assert_eq!((prob.n_eq(), prob.n_ineq()), (0, 4));
        assert_eq!(prob.manifold.to_string(), "sphere:3");
    }

    #[test]
    fn random_problems_are_seeded_and_active_at_the_pole() {
        for seed in 0..10 {
            let a = random_sphere_problem(seed).unwrap();
            let b = random_sphere_problem(seed).unwrap();
            assert_eq!(format!("{:?}", a.inequalities), format!("{:?}", b.inequalities));
            let p = a.point(POLE).unwrap();
            assert_eq!(a.active_set(&p, 1e-12).unwrap().len(), a.n_ineq());
        }
    }

    #[test]
    fn unknown_name() {
        assert!(get("nope").is_none());
        assert!(problem("nope").is_err());
    }
}
