//! Riemannian gradient descent with exponential-map steps and Armijo
//! backtracking.

use crate::manifold::{ManifoldSpec, Point, Tangent};
use crate::{Error, Result};

const MAX_TRIAL_STEP: f64 = 1e10;
const NOISE_ULPS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerConfig {
    pub grad_tol: f64,
    pub max_iters: usize,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub initial_step: f64,
    pub step_floor: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-6,
            max_iters: 10_000,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            initial_step: 1.0,
            step_floor: 1e-14,
        }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.grad_tol >= 0.0
            && self.armijo_c > 0.0
            && self.armijo_c < 1.0
            && self.backtrack_factor > 0.0
            && self.backtrack_factor < 1.0
            && self.initial_step > 0.0
            && self.step_floor > 0.0;
        if !ok {
            return Err(Error::InvalidConfig(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum InnerStatus {
    Converged,
    IterLimit,
    StepFloor,
}

impl InnerStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            InnerStatus::Converged => "Converged",
            InnerStatus::IterLimit => "IterLimit",
            InnerStatus::StepFloor => "StepFloor",
        }
    }
}

impl std::str::FromStr for InnerStatus {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "Converged" => Ok(InnerStatus::Converged),
            "IterLimit" => Ok(InnerStatus::IterLimit),
            "StepFloor" => Ok(InnerStatus::StepFloor),
            _ => Err(format!("unknown inner status `{s}`")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InnerResult {
    pub point: Point,
    pub value: f64,
    pub grad_norm: f64,
    pub status: InnerStatus,
    pub iterations: usize,
}

/// Minimizes `objective` from `start`.
///
/// Each step is `p <- exp_p(-t grad)` with `t` shrunk by `backtrack_factor`
/// until the Armijo condition holds. The first trial step is `initial_step`;
/// later ones use the Barzilai-Borwein step from the previous move, with
/// differences of tangent vectors taken after projecting onto the new
/// tangent space. The decrease test
/// allows a few ulps of slack in the objective value, otherwise steps near
/// a minimizer are rejected by rounding alone. When the required decrease
/// is below the resolution of the value, a step that does not increase the
/// value is accepted if the approximate Wolfe slope test holds. Trial points
/// where the objective is undefined are treated as rejected steps.
pub fn minimize<F>(
    mut objective: F,
    manifold: &ManifoldSpec,
    start: &Point,
    cfg: &InnerConfig,
) -> Result<InnerResult>
where
    F: FnMut(&Point) -> Result<(f64, Tangent)>,
{
    cfg.validate()?;
    let mut p = start.clone();
    let (mut value, mut grad) = objective(&p)?;
    let mut grad_norm = grad.norm();
    let mut iterations = 0;
    let mut trial = cfg.initial_step;

    loop {
        if grad_norm <= cfg.grad_tol {
            return Ok(InnerResult {
                point: p,
                value,
                grad_norm,
                status: InnerStatus::Converged,
                iterations,
            });
        }
        if iterations >= cfg.max_iters {
            return Ok(InnerResult {
                point: p,
                value,
                grad_norm,
                status: InnerStatus::IterLimit,
                iterations,
            });
        }

        let slack = 8.0 * f64::EPSILON * value.abs();
        let mut t = trial;
        let accepted = loop {
            if t < cfg.step_floor {
                break None;
            }
            let q = manifold.exp(&grad.scaled(-t));
            if let Ok((vq, gq)) = objective(&q) {
                let decrease = cfg.armijo_c * t * grad_norm * grad_norm;
                // the slack must never let the value grow
                if !(vq.is_finite() && vq <= value) {
                    t *= cfg.backtrack_factor;
                    continue;
                }
                if vq <= value - decrease + slack {
                    break Some((q, vq, gq));
                }
                // below value resolution: fall back to the slope along the step
                if decrease <= NOISE_ULPS * f64::EPSILON * value.abs() {
                    let d = manifold.project_tangent(&q, &grad.vec.scale(-1.0)).vec;
                    let slope = gq.vec.dot(&d);
                    if slope <= (1.0 - 2.0 * cfg.armijo_c) * grad_norm * grad_norm {
                        break Some((q, vq, gq));
                    }
                }
            }
            t *= cfg.backtrack_factor;
        };
        let Some((q, vq, gq)) = accepted else {
            return Ok(InnerResult {
                point: p,
                value,
                grad_norm,
                status: InnerStatus::StepFloor,
                iterations,
            });
        };
        let step = manifold.project_tangent(&q, &grad.vec.scale(-t)).vec;
        let dgrad = &gq.vec - manifold.project_tangent(&q, &grad.vec).vec;
        let curv = step.dot(&dgrad);
        trial = if curv > 0.0 {
            (step.norm_squared() / curv).clamp(cfg.step_floor, MAX_TRIAL_STEP)
        } else {
            cfg.initial_step
        };
        p = q;
        value = vq;
        grad = gq;
        grad_norm = grad.norm();
        iterations += 1;
    }
}
