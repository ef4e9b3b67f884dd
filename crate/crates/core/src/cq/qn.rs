//! Sampled quasinormality test.
//!
//! Candidate multipliers are the circuits (minimal linearly dependent
//! subfamilies) of the equality and active inequality gradients at `p`,
//! oriented so the inequality part is nonnegative. These span the extreme
//! rays of the cone of null positive combinations. A candidate violates QN
//! when every radius of the ladder `eps, eps/4, eps/16` contains a sample
//! where each supported constraint has the sign of its multiplier.

use nalgebra::DVector;

use super::{check_enumeration, split_mask, vectors_of, Condition, CqEntry, CqOptions, Verdict, Witness};
use crate::linalg::{null_vector, numerical_rank};
use crate::manifold::Point;
use crate::problem::{active_indices, CroProblem};
use crate::Result;

/// Radii `eps / 4^level` for these levels.
pub const RADIUS_LADDER: [u32; 3] = [0, 1, 2];

#[derive(Debug, Clone)]
struct Candidate {
    eq: Vec<usize>,
    ineq: Vec<usize>,
    lambda: Vec<f64>,
    mu: Vec<f64>,
}

fn circuits(
    grads: &[DVector<f64>],
    s: usize,
    eq: &[usize],
    act: &[usize],
    tol: f64,
) -> Result<Vec<Candidate>> {
    let n = grads.len();
    let mut out = Vec::new();
    for mask in 1..1u32 << n {
        let cols: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).collect();
        let sub: Vec<DVector<f64>> = cols.iter().map(|&c| grads[c].clone()).collect();
        if numerical_rank(&sub, tol)? + 1 != sub.len() {
            continue;
        }
        let z = null_vector(&sub)?;
        let zmax = z.amax();
        // a circuit's null vector has full support
        if z.iter().any(|c| c.abs() <= tol * zmax) {
            continue;
        }
        let z = z / zmax;
        let ineq_signs: Vec<f64> = cols
            .iter()
            .zip(z.iter())
            .filter(|(c, _)| **c >= s)
            .map(|(_, v)| v.signum())
            .collect();
        let orientations: Vec<f64> = if ineq_signs.is_empty() {
            vec![1.0, -1.0]
        } else if ineq_signs.iter().all(|&x| x > 0.0) {
            vec![1.0]
        } else if ineq_signs.iter().all(|&x| x < 0.0) {
            vec![-1.0]
        } else {
            vec![]
        };
        let (i_idx, j_idx) = split_mask(mask, eq, act);
        for o in orientations {
            let coef: Vec<f64> = z.iter().map(|v| o * v).collect();
            let k = i_idx.len();
            out.push(Candidate {
                eq: i_idx.clone(),
                ineq: j_idx.clone(),
                lambda: coef[..k].to_vec(),
                mu: coef[k..].to_vec(),
            });
        }
    }
    Ok(out)
}

pub fn qn_evidence(prob: &CroProblem, p: &Point, opts: &CqOptions) -> Result<CqEntry> {
    let at_p = prob.evaluate(p)?;
    let eq: Vec<usize> = (0..prob.n_eq()).collect();
    let act = active_indices(&at_p.g, opts.tol_act);
    check_enumeration(eq.len() + act.len())?;
    let grads = vectors_of(&at_p, &eq, &act);
    let candidates = circuits(&grads, eq.len(), &eq, &act, opts.tol_rank)?;
    if candidates.is_empty() {
        return Ok(opts.entry(Condition::Qn, Verdict::EvidenceHolds, Witness::default()));
    }

    // constraint values on each ring of the ladder
    let mut rings = Vec::new();
    for level in RADIUS_LADDER {
        let radius = opts.eps / 4f64.powi(level as i32);
        let pts = prob
            .manifold
            .sample_ball(p, radius, opts.samples, opts.seed + level as u64)?;
        let vals = pts
            .into_iter()
            .map(|q| prob.constraint_values(&q).map(|(h, g)| (q, h, g)))
            .collect::<Result<Vec<_>>>()?;
        rings.push(vals);
    }

    for c in &candidates {
        let mut last_q = None;
        let every_ring = rings.iter().all(|ring| {
            let hit = ring.iter().find(|(_, h, g)| {
                c.eq.iter().zip(&c.lambda).all(|(&i, &l)| l * h[i] > 0.0)
                    && c.ineq.iter().zip(&c.mu).all(|(&j, &m)| m * g[j] > 0.0)
            });
            if let Some((q, _, _)) = hit {
                last_q = Some(q.as_slice().to_vec());
            }
            hit.is_some()
        });
        if every_ring {
            let mut w = Witness::subset(&c.eq, &c.ineq);
            w.alpha = c.lambda.clone();
            w.beta = c.mu.clone();
            w.point = last_q;
            return Ok(opts.entry(Condition::Qn, Verdict::EvidenceFails, w));
        }
    }
    Ok(opts.entry(Condition::Qn, Verdict::EvidenceHolds, Witness::default()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn qn(prob: &CroProblem, at: &[f64]) -> CqEntry {
        let p = prob.point(at).unwrap();
        qn_evidence(prob, &p, &CqOptions::default()).unwrap()
    }

    #[test]
    fn split_and_exponential_examples_hold() {
        for name in ["paper-split-equality", "paper-qn-sphere"] {
            let prob = fixtures::problem(name).unwrap();
            assert_eq!(qn(&prob, &[0.0, 0.0, 1.0]).verdict, Verdict::EvidenceHolds, "{name}");
        }
    }

    #[test]
    fn squared_equality_violates() {
        let prob = CroProblem::parse("sq", "euclidean:2", &["x", "y"], "0", &["x^2"], &[]).unwrap();
        let e = qn(&prob, &[0.0, 0.0]);
        assert_eq!(e.verdict, Verdict::EvidenceFails);
        assert_eq!(e.witness.alpha, vec![1.0]);
        assert!(e.witness.point.is_some());
    }

    #[test]
    fn squared_inequality_violates() {
        let prob = CroProblem::parse("sq", "euclidean:2", &["x", "y"], "0", &[], &["x^2"]).unwrap();
        assert_eq!(qn(&prob, &[0.0, 0.0]).verdict, Verdict::EvidenceFails);
    }

    #[test]
    fn no_constraints_is_vacuous() {
        let prob = CroProblem::parse("free", "euclidean:2", &["x", "y"], "x", &[], &[]).unwrap();
        assert_eq!(qn(&prob, &[0.0, 0.0]).verdict, Verdict::EvidenceHolds);
    }

    #[test]
    fn circuits_of_duplicated_pair() {
        let g = vec![DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![-1.0, 0.0])];
        let c = circuits(&g, 0, &[], &[0, 1], 1e-8).unwrap();
        assert_eq!(c.len(), 1);
        assert!((c[0].mu[0] - c[0].mu[1]).abs() < 1e-12 && c[0].mu[0] > 0.0);
    }
}
