use nalgebra::DVector;
use proptest::prelude::*;
use ralm_core::alm::update_multipliers;
use ralm_core::expr::ExprAst;
use ralm_core::manifold::{ManifoldSpec, Point, Tangent};
use ralm_core::problem::{CroProblem, MultiplierEstimate};

const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-5;

fn spec() -> impl Strategy<Value = ManifoldSpec> {
    prop_oneof![
        (1usize..4).prop_map(ManifoldSpec::Euclidean),
        (2usize..5).prop_map(ManifoldSpec::Sphere),
        Just(ManifoldSpec::Product(vec![
            ManifoldSpec::Sphere(3),
            ManifoldSpec::Euclidean(2)
        ])),
    ]
}

fn point_and_tangent() -> impl Strategy<Value = (ManifoldSpec, Point, Tangent)> {
    spec().prop_flat_map(|m| {
        let n = m.ambient_dim();
        (
            Just(m),
            prop::collection::vec(-1.0f64..1.0, n),
            prop::collection::vec(-1.0f64..1.0, n),
        )
            .prop_filter_map("degenerate sphere block", |(m, x, v)| {
                let x: Vec<f64> = x.iter().map(|c| c + 0.05).collect();
                let p = m.point(&x).ok()?;
                let t = m.project_tangent(&p, &DVector::from_vec(v));
                Some((m, p, t))
            })
    })
}

/// Central difference of `phi(exp_p(t v))` at `t = 0`.
fn directional_fd(m: &ManifoldSpec, v: &Tangent, mut phi: impl FnMut(&Point) -> f64) -> f64 {
    let fwd = m.exp(&v.scaled(FD_STEP));
    let bwd = m.exp(&v.scaled(-FD_STEP));
    (phi(&fwd) - phi(&bwd)) / (2.0 * FD_STEP)
}

fn random_problem() -> CroProblem {
    CroProblem::parse(
        "fd",
        "sphere:3",
        &["x", "y", "z"],
        "x*y - z^2 + sin(x + z)",
        &["x^2 + y - 0.3", "exp(y) * z - 1"],
        &["x - y*z", "z^3 + x - 0.5", "cos(y) - x"],
    )
    .unwrap()
}

proptest! {
    #[test]
    fn exp_log_round_trip((m, p, v) in point_and_tangent()) {
        // keep the step well inside the injectivity radius
        let v = if v.norm() > 2.0 { v.scaled(2.0 / v.norm()) } else { v };
        let q = m.exp(&v);
        prop_assert!(m.contains(q.as_slice(), 1e-10));
        let back = m.log(&p, &q).unwrap();
        prop_assert!((&back.vec - &v.vec).norm() <= 1e-9 * v.norm().max(1.0));
        prop_assert!((m.dist(&p, &q) - v.norm()).abs() <= 1e-9);
    }

    #[test]
    fn projection_is_idempotent_and_self_adjoint(
        (m, p, _v) in point_and_tangent(),
        a in prop::collection::vec(-1.0f64..1.0, 5),
        b in prop::collection::vec(-1.0f64..1.0, 5),
    ) {
        let n = m.ambient_dim();
        let a = DVector::from_iterator(n, a.into_iter().cycle().take(n));
        let b = DVector::from_iterator(n, b.into_iter().rev().cycle().take(n));
        let pa = m.project_tangent(&p, &a);
        let ppa = m.project_tangent(&p, &pa.vec);
        prop_assert!((&pa.vec - &ppa.vec).norm() <= 1e-12);
        let pb = m.project_tangent(&p, &b);
        prop_assert!((pa.vec.dot(&b) - a.dot(&pb.vec)).abs() <= 1e-12);
    }

    #[test]
    fn half_squared_distance_gradient_is_minus_log(
        (m, p, v) in point_and_tangent(),
        (_, _, w) in point_and_tangent(),
    ) {
        let v = if v.norm() > 1.0 { v.scaled(1.0 / v.norm()) } else { v };
        let q = m.exp(&v);
        let grad = m.log(&p, &q).unwrap().scaled(-1.0);
        // direction in the tangent space at p
        let n = m.ambient_dim();
        let dir = m.project_tangent(&p, &DVector::from_iterator(n, w.vec.iter().cycle().cloned().take(n)));
        let fd = directional_fd(&m, &dir, |x| 0.5 * m.dist(x, &q).powi(2));
        prop_assert!((fd - grad.vec.dot(&dir.vec)).abs() <= FD_TOL * dir.norm().max(1.0));
    }

    #[test]
    fn sampled_points_lie_in_the_ball((m, p, _v) in point_and_tangent(), seed in 0u64..1000) {
        let eps = 0.25 * m.injectivity_radius().min(1.0);
        let pts = m.sample_ball(&p, eps, 8, seed).unwrap();
        prop_assert_eq!(pts.len(), 8);
        for q in &pts {
            prop_assert!(m.contains(q.as_slice(), 1e-10));
            let d = m.dist(&p, q);
            prop_assert!(d > 0.0 && d < eps * (1.0 + 1e-9));
        }
        prop_assert_eq!(pts, m.sample_ball(&p, eps, 8, seed).unwrap());
    }

    #[test]
    fn ad_gradient_matches_finite_differences(
        x in prop::collection::vec(0.2f64..2.0, 3),
        k in 0usize..5,
    ) {
        let sources = [
            "x*y*z + sin(x)*cos(y)",
            "exp(x - y) / (1 + z^2)",
            "sqrt(x*y + z) - (x + y)^3",
            "-(x^-2) + y / z",
            "cos(exp(z) * x) - sin(y)^2",
        ];
        let vars = ["x", "y", "z"].map(String::from);
        let e = ExprAst::parse(sources[k], &vars).unwrap();
        let (v, g) = e.eval_grad(&x).unwrap();
        prop_assert!((v - e.eval(&x).unwrap()).abs() <= 1e-14 * v.abs().max(1.0));
        for i in 0..3 {
            let mut hi = x.clone();
            let mut lo = x.clone();
            hi[i] += FD_STEP;
            lo[i] -= FD_STEP;
            let fd = (e.eval(&hi).unwrap() - e.eval(&lo).unwrap()) / (2.0 * FD_STEP);
            prop_assert!((fd - g[i]).abs() <= FD_TOL * g[i].abs().max(1.0), "{} d{}: {} vs {}", sources[k], i, fd, g[i]);
        }
    }

    #[test]
    fn problem_gradients_match_geodesic_differences(
        x in prop::collection::vec(-1.0f64..1.0, 3),
        d in prop::collection::vec(-1.0f64..1.0, 3),
        lam in prop::collection::vec(-2.0f64..2.0, 2),
        mu in prop::collection::vec(0.0f64..2.0, 3),
        rho in 0.5f64..20.0,
    ) {
        prop_assume!(x.iter().map(|c| c * c).sum::<f64>() > 0.01);
        let prob = random_problem();
        let m = &prob.manifold;
        let p = prob.point(&x).unwrap();
        let dir = m.project_tangent(&p, &DVector::from_vec(d));
        let scale = dir.norm().max(1.0);

        let gf = prob.riemannian_gradient(&prob.objective, &p).unwrap();
        let fd = directional_fd(m, &dir, |q| prob.objective_value(q).unwrap());
        prop_assert!((fd - gf.vec.dot(&dir.vec)).abs() <= FD_TOL * scale);

        let mult = MultiplierEstimate::new(lam, mu);
        let (_, gal) = prob.aug_lagrangian(&p, &mult, rho).unwrap();
        let fd = directional_fd(m, &dir, |q| prob.aug_lagrangian_value(q, &mult, rho).unwrap());
        prop_assert!((fd - gal.vec.dot(&dir.vec)).abs() <= FD_TOL * scale * rho);

        let (_, ginf) = prob.infeasibility(&p).unwrap();
        let fd = directional_fd(m, &dir, |q| prob.infeasibility(q).unwrap().0);
        prop_assert!((fd - ginf.vec.dot(&dir.vec)).abs() <= FD_TOL * scale);

        // grad L_rho(p; lambda_bar, mu_bar) = grad L(p; updated multipliers)
        let (h, g) = prob.constraint_values(&p).unwrap();
        let updated = update_multipliers(&mult, rho, &h, &g);
        let gl = prob.lagrangian_gradient(&p, &updated).unwrap();
        prop_assert!((&gl.vec - &gal.vec).norm() <= 1e-12 * gal.norm().max(1.0));
    }
}
