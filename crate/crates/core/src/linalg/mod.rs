//! Small dense linear algebra for gradient families.
//!
//! Every routine here works on a handful of vectors in a space of dimension
//! at most a few dozen. Ranks are relative to the largest singular value so
//! that scaling a family never changes a verdict.

pub mod simplex;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use simplex::SimplexOptions;

/// Default relative rank tolerance.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
/// Default residual tolerance for positive-linear-dependence certificates.
pub const DEFAULT_PLD_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("simplex exceeded {pivots} pivots (degenerate input?)")]
    SimplexCycling { pivots: usize },
    #[error("precondition violated: {0}")]
    Precondition(String),
}

/// A vector tagged with the index of the constraint that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Tagged {
    pub index: usize,
    pub vec: DVector<f64>,
}

/// The pair `(V, W)`: free-sign vectors (equality gradients) and
/// sign-constrained vectors (inequality gradients). Duplicates are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFamily {
    dim: usize,
    pub free_sign: Vec<Tagged>,
    pub sign_constrained: Vec<Tagged>,
}

impl VectorFamily {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            free_sign: Vec::new(),
            sign_constrained: Vec::new(),
        }
    }

    /// Builds a family from untagged vectors; tags are positions.
    pub fn from_vectors(
        dim: usize,
        free_sign: Vec<DVector<f64>>,
        sign_constrained: Vec<DVector<f64>>,
    ) -> Result<Self, LinalgError> {
        let mut fam = Self::new(dim);
        for (index, vec) in free_sign.into_iter().enumerate() {
            fam.push_free(index, vec)?;
        }
        for (index, vec) in sign_constrained.into_iter().enumerate() {
            fam.push_signed(index, vec)?;
        }
        Ok(fam)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.free_sign.len() + self.sign_constrained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push_free(&mut self, index: usize, vec: DVector<f64>) -> Result<(), LinalgError> {
        self.check_dim(&vec)?;
        self.free_sign.push(Tagged { index, vec });
        Ok(())
    }

    pub fn push_signed(&mut self, index: usize, vec: DVector<f64>) -> Result<(), LinalgError> {
        self.check_dim(&vec)?;
        self.sign_constrained.push(Tagged { index, vec });
        Ok(())
    }

    fn check_dim(&self, v: &DVector<f64>) -> Result<(), LinalgError> {
        if v.len() != self.dim {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }

    /// All vectors, free-sign first.
    pub fn vectors(&self) -> Vec<DVector<f64>> {
        self.free_sign
            .iter()
            .chain(&self.sign_constrained)
            .map(|t| t.vec.clone())
            .collect()
    }

    pub fn rank(&self, tol_rank: f64) -> usize {
        numerical_rank(&self.vectors(), tol_rank).expect("family dimensions are checked on insert")
    }

    pub fn is_linearly_dependent(&self, tol_rank: f64) -> bool {
        self.rank(tol_rank) < self.len()
    }
}

/// Coefficients `(alpha, beta)` with `beta >= 0` and a vanishing combination.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceCertificate {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// `||(alpha, beta)||_inf`
    pub norm_witness: f64,
    /// `||sum alpha_i v_i + sum beta_j w_j||_2` in the family's own units.
    pub residual: f64,
}

fn columns(vectors: &[DVector<f64>]) -> Result<DMatrix<f64>, LinalgError> {
    let n = vectors.first().map_or(0, |v| v.len());
    for v in vectors {
        if v.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
    }
    Ok(DMatrix::from_fn(n, vectors.len(), |i, j| vectors[j][i]))
}

fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Number of singular values above `tol_rank * sigma_max`.
pub fn numerical_rank(vectors: &[DVector<f64>], tol_rank: f64) -> Result<usize, LinalgError> {
    let a = columns(vectors)?;
    let s = singular_values(&a);
    let Some(&smax) = s.first() else {
        return Ok(0);
    };
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(s.iter().filter(|&&x| x > tol_rank * smax).count())
}

/// Unit vector `z` minimizing `||A z||` over the columns of `vectors`.
///
/// The matrix is padded with zero rows so the SVD returns a complete set of
/// right singular vectors even when there are more columns than rows.
pub fn null_vector(vectors: &[DVector<f64>]) -> Result<DVector<f64>, LinalgError> {
    let a = columns(vectors)?;
    let k = a.ncols();
    if k == 0 {
        return Ok(DVector::zeros(0));
    }
    let rows = a.nrows().max(k);
    let mut padded = DMatrix::zeros(rows, k);
    padded.view_mut((0, 0), (a.nrows(), k)).copy_from(&a);
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("k > 0");
    Ok(v_t.row(imin).transpose())
}

/// Greedy lowest-index-first selection of a basis of the span of `vectors`.
///
/// A vector joins the basis when it raises the numerical rank of the
/// selection, so earlier indices always win ties.
pub fn select_basis_subset(vectors: &[DVector<f64>], tol_rank: f64) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    let mut selection: Vec<DVector<f64>> = Vec::new();
    for (k, v) in vectors.iter().enumerate() {
        selection.push(v.clone());
        match numerical_rank(&selection, tol_rank) {
            Ok(r) if r == selection.len() => chosen.push(k),
            _ => {
                selection.pop();
            }
        }
    }
    chosen
}

/// Decides positive-linear dependence of `(V, W)`.
///
/// Two exhaustive cases: either `V` alone is linearly dependent (certificate
/// with `beta = 0` from a null vector), or there is a null combination with
/// `sum beta = 1`, which is a phase-one feasibility problem with `alpha`
/// split into nonnegative parts. Vectors are scaled by the largest norm in
/// the family before the residual is compared with `tol`.
pub fn positive_linear_dependence(
    family: &VectorFamily,
    tol: f64,
) -> Result<Option<DependenceCertificate>, LinalgError> {
    let s = family.free_sign.len();
    let m = family.sign_constrained.len();
    let n = family.dim();
    let scale = family
        .free_sign
        .iter()
        .chain(&family.sign_constrained)
        .map(|t| t.vec.norm())
        .fold(0.0_f64, f64::max);
    if family.is_empty() {
        return Ok(None);
    }
    if scale == 0.0 {
        // every vector is zero; any unit coefficient works
        let (alpha, beta) = if s > 0 {
            let mut a = vec![0.0; s];
            a[0] = 1.0;
            (a, vec![0.0; m])
        } else {
            let mut b = vec![0.0; m];
            b[0] = 1.0;
            (vec![], b)
        };
        return Ok(Some(certificate(family, alpha, beta)));
    }

    let free: Vec<DVector<f64>> = family.free_sign.iter().map(|t| &t.vec / scale).collect();
    if s > 0 && numerical_rank(&free, DEFAULT_RANK_TOL)? < s {
        let z = null_vector(&free)?;
        let zmax = z.amax();
        let alpha: Vec<f64> = z.iter().map(|x| x / zmax).collect();
        return Ok(Some(certificate(family, alpha, vec![0.0; m])));
    }
    if m == 0 {
        return Ok(None);
    }

    // columns: alpha+ (s), alpha- (s), beta (m); rows: n coordinates, normalization
    let mut a = DMatrix::zeros(n + 1, 2 * s + m);
    for (i, t) in family.free_sign.iter().enumerate() {
        for r in 0..n {
            a[(r, i)] = t.vec[r] / scale;
            a[(r, s + i)] = -t.vec[r] / scale;
        }
    }
    for (j, t) in family.sign_constrained.iter().enumerate() {
        for r in 0..n {
            a[(r, 2 * s + j)] = t.vec[r] / scale;
        }
        a[(n, 2 * s + j)] = 1.0;
    }
    let mut b = vec![0.0; n + 1];
    b[n] = 1.0;
    let opts = SimplexOptions {
        feas_tol: tol,
        ..Default::default()
    };
    let Some(x) = simplex::find_feasible(&a, &b, &opts)? else {
        return Ok(None);
    };
    let alpha: Vec<f64> = (0..s).map(|i| x[i] - x[s + i]).collect();
    let beta: Vec<f64> = (0..m).map(|j| x[2 * s + j]).collect();
    let cert = certificate(family, alpha, beta);
    // the LP residual is measured in l1 over artificials; confirm in l2
    if cert.residual > tol.max(1e-12) * scale * cert.norm_witness.max(1.0) * 10.0 {
        return Ok(None);
    }
    Ok(Some(cert))
}

fn certificate(family: &VectorFamily, alpha: Vec<f64>, beta: Vec<f64>) -> DependenceCertificate {
    let mut sum = DVector::zeros(family.dim());
    for (c, t) in alpha.iter().zip(&family.free_sign) {
        sum += &t.vec * *c;
    }
    for (c, t) in beta.iter().zip(&family.sign_constrained) {
        sum += &t.vec * *c;
    }
    let norm_witness = alpha
        .iter()
        .chain(&beta)
        .fold(0.0_f64, |acc, x| acc.max(x.abs()));
    DependenceCertificate {
        alpha,
        beta,
        norm_witness,
        residual: sum.norm(),
    }
}

/// Output of [`caratheodory_reduce`]. `subset` indexes into the `v` input.
#[derive(Debug, Clone, PartialEq)]
pub struct CaratheodoryReduction {
    pub subset: Vec<usize>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

fn combination(u: &[DVector<f64>], alpha: &[f64], v: &[&DVector<f64>], beta: &[f64], n: usize) -> DVector<f64> {
    let mut acc = DVector::zeros(n);
    for (c, x) in alpha.iter().zip(u) {
        acc += x * *c;
    }
    for (c, x) in beta.iter().zip(v) {
        acc += *x * *c;
    }
    acc
}

/// Rewrites `x = sum alpha_i u_i + sum beta_j v_j` using a subset of the
/// `v_j` that is linearly independent together with `u`, keeping the sign
/// of every surviving `beta_j`.
///
/// While the active family is dependent, a null combination is used to shift
/// the coefficients until one `beta_j` reaches zero; among the candidates the
/// one needing the smallest shift is eliminated (lowest index on ties).
pub fn caratheodory_reduce(
    u: &[DVector<f64>],
    v: &[DVector<f64>],
    alpha: &[f64],
    beta: &[f64],
    x: &DVector<f64>,
    tol: f64,
) -> Result<CaratheodoryReduction, LinalgError> {
    let n = x.len();
    if alpha.len() != u.len() {
        return Err(LinalgError::DimensionMismatch {
            expected: u.len(),
            got: alpha.len(),
        });
    }
    if beta.len() != v.len() {
        return Err(LinalgError::DimensionMismatch {
            expected: v.len(),
            got: beta.len(),
        });
    }
    for w in u.iter().chain(v) {
        if w.len() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                got: w.len(),
            });
        }
    }
    if beta.contains(&0.0) {
        return Err(LinalgError::Precondition("every beta_j must be nonzero".into()));
    }
    if numerical_rank(u, tol)? < u.len() {
        return Err(LinalgError::Precondition("u is not linearly independent".into()));
    }
    let vrefs: Vec<&DVector<f64>> = v.iter().collect();
    let recon_tol = tol * x.norm().max(1.0);
    if (combination(u, alpha, &vrefs, beta, n) - x).norm() > recon_tol {
        return Err(LinalgError::Precondition(
            "x is not reconstructed by the given coefficients".into(),
        ));
    }

    let mut active: Vec<usize> = (0..v.len()).collect();
    let mut a = alpha.to_vec();
    let mut b = beta.to_vec();

    loop {
        let mut fam: Vec<DVector<f64>> = u.to_vec();
        fam.extend(active.iter().map(|&j| v[j].clone()));
        if numerical_rank(&fam, tol)? == fam.len() {
            break;
        }
        let z = null_vector(&fam)?;
        let (gamma, delta) = z.as_slice().split_at(u.len());

        let mut best: Option<(usize, f64)> = None;
        for (pos, &j) in active.iter().enumerate() {
            if delta[pos].abs() <= f64::EPSILON * z.amax() {
                continue;
            }
            let t = b[j] / delta[pos];
            if best.is_none_or(|(_, bt)| t.abs() < bt.abs()) {
                best = Some((pos, t));
            }
        }
        let Some((drop_pos, t)) = best else {
            return Err(LinalgError::Precondition(
                "null combination does not involve v (u dependent?)".into(),
            ));
        };
        for (ai, gi) in a.iter_mut().zip(gamma) {
            *ai -= t * gi;
        }
        for (pos, &j) in active.iter().enumerate() {
            b[j] -= t * delta[pos];
        }
        let dropped = active[drop_pos];
        b[dropped] = 0.0;
        active.retain(|&j| j != dropped && b[j] * beta[j] > 0.0);
        for j in 0..v.len() {
            if !active.contains(&j) {
                b[j] = 0.0;
            }
        }
    }

    // least-squares refit on the independent family removes accumulated drift
    let mut fam: Vec<DVector<f64>> = u.to_vec();
    fam.extend(active.iter().map(|&j| v[j].clone()));
    if !fam.is_empty() {
        let m = columns(&fam)?;
        if let Ok(coef) = m.clone().svd(true, true).solve(x, 1e-14) {
            let signs_kept = active
                .iter()
                .enumerate()
                .all(|(pos, &j)| coef[u.len() + pos] * beta[j] > 0.0);
            let refit_resid = (&m * &coef - x).norm();
            let active_refs: Vec<&DVector<f64>> = active.iter().map(|&j| &v[j]).collect();
            let active_beta: Vec<f64> = active.iter().map(|&j| b[j]).collect();
            let shift_resid = (combination(u, &a, &active_refs, &active_beta, n) - x).norm();
            if signs_kept && refit_resid <= shift_resid {
                a.copy_from_slice(&coef.as_slice()[..u.len()]);
                for (pos, &j) in active.iter().enumerate() {
                    b[j] = coef[u.len() + pos];
                }
            }
        }
    }

    Ok(CaratheodoryReduction {
        beta: active.iter().map(|&j| b[j]).collect(),
        subset: active,
        alpha: a,
    })
}
