//! Constrained problems on a manifold and their Lagrangian machinery.
//!
//! All gradients returned here are Riemannian: the ambient AD gradient
//! projected onto the tangent space at the evaluation point.

use nalgebra::DVector;

use crate::expr::ExprAst;
use crate::manifold::{ManifoldSpec, Point, Tangent};
use crate::{Error, Result};

/// Default activity threshold for `|g_j(p)|`.
pub const DEFAULT_TOL_ACT: f64 = 1e-6;

/// `min f(q)` subject to `h(q) = 0`, `g(q) <= 0`, `q` on `manifold`.
#[derive(Debug, Clone, PartialEq)]
pub struct CroProblem {
    pub name: String,
    pub manifold: ManifoldSpec,
    pub objective: ExprAst,
    pub equalities: Vec<ExprAst>,
    pub inequalities: Vec<ExprAst>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierEstimate {
    pub lambda: DVector<f64>,
    pub mu: DVector<f64>,
}

impl MultiplierEstimate {
    pub fn zeros(s: usize, m: usize) -> Self {
        Self {
            lambda: DVector::zeros(s),
            mu: DVector::zeros(m),
        }
    }

    pub fn new(lambda: Vec<f64>, mu: Vec<f64>) -> Self {
        Self {
            lambda: DVector::from_vec(lambda),
            mu: DVector::from_vec(mu),
        }
    }

    /// `||(lambda, mu)||_inf`
    pub fn sup_norm(&self) -> f64 {
        inf_norm(&self.lambda).max(inf_norm(&self.mu))
    }
}

/// Values and Riemannian gradients of every function at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub point: Point,
    pub f: f64,
    pub grad_f: DVector<f64>,
    pub h: DVector<f64>,
    pub grad_h: Vec<DVector<f64>>,
    pub g: DVector<f64>,
    pub grad_g: Vec<DVector<f64>>,
}

impl Evaluation {
    /// `max(||h||_inf, max_j [g_j]_+)`
    pub fn max_violation(&self) -> f64 {
        let gp = self.g.iter().fold(0.0_f64, |a, &x| a.max(x));
        inf_norm(&self.h).max(gp)
    }

    fn tangent(&self, vec: DVector<f64>) -> Tangent {
        Tangent {
            base: self.point.clone(),
            vec,
        }
    }

    pub fn lagrangian_gradient(&self, mult: &MultiplierEstimate) -> Tangent {
        let mut v = self.grad_f.clone();
        for (l, gh) in mult.lambda.iter().zip(&self.grad_h) {
            v.axpy(*l, gh, 1.0);
        }
        for (m, gg) in mult.mu.iter().zip(&self.grad_g) {
            v.axpy(*m, gg, 1.0);
        }
        self.tangent(v)
    }

    /// PHR value and gradient at `(lambda_bar, mu_bar, rho)`.
    pub fn aug_lagrangian(&self, mult_bar: &MultiplierEstimate, rho: f64) -> (f64, Tangent) {
        let shifted_h = &self.h + &mult_bar.lambda / rho;
        let shifted_g = (&self.g + &mult_bar.mu / rho).map(|x| x.max(0.0));
        let value = self.f + 0.5 * rho * (shifted_h.norm_squared() + shifted_g.norm_squared());
        let mult = MultiplierEstimate {
            lambda: shifted_h * rho,
            mu: shifted_g * rho,
        };
        (value, self.lagrangian_gradient(&mult))
    }

    /// `1/2 ||h||^2 + 1/2 ||g_+||^2` and its gradient.
    pub fn infeasibility(&self) -> (f64, Tangent) {
        let gp = self.g.map(|x| x.max(0.0));
        let value = 0.5 * (self.h.norm_squared() + gp.norm_squared());
        let mut v = DVector::zeros(self.grad_f.len());
        for (hi, gh) in self.h.iter().zip(&self.grad_h) {
            v.axpy(*hi, gh, 1.0);
        }
        for (gj, gg) in gp.iter().zip(&self.grad_g) {
            v.axpy(*gj, gg, 1.0);
        }
        (value, self.tangent(v))
    }
}

/// Projects the ambient gradient of `ast` onto `T_p M`.
pub fn riemannian_gradient(ast: &ExprAst, manifold: &ManifoldSpec, p: &Point) -> Result<Tangent> {
    let (_, g) = ast.eval_grad(p.as_slice())?;
    Ok(manifold.project_tangent(p, &g))
}

impl CroProblem {
    pub fn new(
        name: impl Into<String>,
        manifold: ManifoldSpec,
        objective: ExprAst,
        equalities: Vec<ExprAst>,
        inequalities: Vec<ExprAst>,
    ) -> Result<Self> {
        manifold.validate()?;
        let n = manifold.ambient_dim();
        for e in std::iter::once(&objective).chain(&equalities).chain(&inequalities) {
            if e.var_count() != n {
                return Err(Error::DimensionMismatch {
                    what: "expression variables vs manifold ambient dimension",
                    expected: n,
                    got: e.var_count(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            manifold,
            objective,
            equalities,
            inequalities,
        })
    }

    /// Builds a problem from expression source strings.
    pub fn parse(
        name: &str,
        manifold: &str,
        vars: &[&str],
        objective: &str,
        equalities: &[&str],
        inequalities: &[&str],
    ) -> Result<Self> {
        let spec: ManifoldSpec = manifold.parse()?;
        let vars: Vec<String> = vars.iter().map(|s| s.to_string()).collect();
        let parse_all = |srcs: &[&str]| -> Result<Vec<ExprAst>> {
            srcs.iter()
                .map(|s| ExprAst::parse(s, &vars).map_err(Error::from))
                .collect()
        };
        Self::new(
            name,
            spec,
            ExprAst::parse(objective, &vars)?,
            parse_all(equalities)?,
            parse_all(inequalities)?,
        )
    }

    pub fn n_eq(&self) -> usize {
        self.equalities.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.inequalities.len()
    }

    pub fn point(&self, coords: &[f64]) -> Result<Point> {
        Ok(self.manifold.point(coords)?)
    }

    fn check_point(&self, p: &Point) -> Result<()> {
        if p.dim() != self.manifold.ambient_dim() {
            return Err(Error::DimensionMismatch {
                what: "point",
                expected: self.manifold.ambient_dim(),
                got: p.dim(),
            });
        }
        Ok(())
    }

    fn check_mult(&self, mult: &MultiplierEstimate) -> Result<()> {
        if mult.lambda.len() != self.n_eq() {
            return Err(Error::DimensionMismatch {
                what: "lambda",
                expected: self.n_eq(),
                got: mult.lambda.len(),
            });
        }
        if mult.mu.len() != self.n_ineq() {
            return Err(Error::DimensionMismatch {
                what: "mu",
                expected: self.n_ineq(),
                got: mult.mu.len(),
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, p: &Point) -> Result<Evaluation> {
        self.check_point(p)?;
        let x = p.as_slice();
        let grad = |e: &ExprAst| -> Result<(f64, DVector<f64>)> {
            let (v, g) = e.eval_grad(x)?;
            Ok((v, self.manifold.project_tangent(p, &g).vec))
        };
        let (f, grad_f) = grad(&self.objective)?;
        let mut h = DVector::zeros(self.n_eq());
        let mut grad_h = Vec::with_capacity(self.n_eq());
        for (i, e) in self.equalities.iter().enumerate() {
            let (v, gv) = grad(e)?;
            h[i] = v;
            grad_h.push(gv);
        }
        let mut g = DVector::zeros(self.n_ineq());
        let mut grad_g = Vec::with_capacity(self.n_ineq());
        for (j, e) in self.inequalities.iter().enumerate() {
            let (v, gv) = grad(e)?;
            g[j] = v;
            grad_g.push(gv);
        }
        Ok(Evaluation {
            point: p.clone(),
            f,
            grad_f,
            h,
            grad_h,
            g,
            grad_g,
        })
    }

    pub fn objective_value(&self, p: &Point) -> Result<f64> {
        self.check_point(p)?;
        Ok(self.objective.eval(p.as_slice())?)
    }

    /// `(h(p), g(p))`
    pub fn constraint_values(&self, p: &Point) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_point(p)?;
        let x = p.as_slice();
        let eval_all = |es: &[ExprAst]| -> Result<DVector<f64>> {
            let v: Vec<f64> = es
                .iter()
                .map(|e| e.eval(x).map_err(Error::from))
                .collect::<Result<_>>()?;
            Ok(DVector::from_vec(v))
        };
        Ok((eval_all(&self.equalities)?, eval_all(&self.inequalities)?))
    }

    /// `{ j : |g_j(p)| <= tol_act }`, 0-based.
    pub fn active_set(&self, p: &Point, tol_act: f64) -> Result<Vec<usize>> {
        let (_, g) = self.constraint_values(p)?;
        Ok(active_indices(&g, tol_act))
    }

    pub fn riemannian_gradient(&self, ast: &ExprAst, p: &Point) -> Result<Tangent> {
        riemannian_gradient(ast, &self.manifold, p)
    }

    pub fn lagrangian_gradient(&self, p: &Point, mult: &MultiplierEstimate) -> Result<Tangent> {
        self.check_mult(mult)?;
        Ok(self.evaluate(p)?.lagrangian_gradient(mult))
    }

    pub fn aug_lagrangian(
        &self,
        p: &Point,
        mult_bar: &MultiplierEstimate,
        rho: f64,
    ) -> Result<(f64, Tangent)> {
        self.check_mult(mult_bar)?;
        if !(rho > 0.0) {
            return Err(Error::InvalidConfig(format!("rho must be positive, got {rho}")));
        }
        Ok(self.evaluate(p)?.aug_lagrangian(mult_bar, rho))
    }

    /// Value only, without the gradient passes.
    pub fn aug_lagrangian_value(
        &self,
        p: &Point,
        mult_bar: &MultiplierEstimate,
        rho: f64,
    ) -> Result<f64> {
        let f = self.objective_value(p)?;
        let (h, g) = self.constraint_values(p)?;
        let sh = h + &mult_bar.lambda / rho;
        let sg = (g + &mult_bar.mu / rho).map(|x| x.max(0.0));
        Ok(f + 0.5 * rho * (sh.norm_squared() + sg.norm_squared()))
    }

    pub fn infeasibility(&self, p: &Point) -> Result<(f64, Tangent)> {
        Ok(self.evaluate(p)?.infeasibility())
    }
}

pub(crate) fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

pub(crate) fn active_indices(g: &DVector<f64>, tol_act: f64) -> Vec<usize> {
    g.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() <= tol_act)
        .map(|(j, _)| j)
        .collect()
}
