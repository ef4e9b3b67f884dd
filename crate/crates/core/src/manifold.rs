//! Euclidean spaces, unit spheres and finite products of them.
//!
//! Points and tangent vectors are stored as ambient coordinates. A product
//! manifold concatenates the ambient coordinates of its factors in order.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

/// `<p, q> <= -1 + ANTIPODAL_CUTOFF` counts as antipodal on a sphere.
pub const ANTIPODAL_CUTOFF: f64 = 1e-8;
/// Below this norm the sphere exponential map uses its Taylor expansion.
pub const SMALL_STEP: f64 = 1e-8;
/// Tangent vectors may differ in base point by at most this much.
pub const BASE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifoldError {
    #[error("invalid manifold spec `{spec}`: {reason}")]
    Parse { spec: String, reason: String },
    #[error("invalid manifold: {0}")]
    Invalid(String),
    #[error("expected {expected} ambient coordinates, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("point has zero norm on a sphere block")]
    ZeroNorm,
    #[error("tangent vectors have different base points")]
    BaseMismatch,
    #[error("logarithm undefined: points are antipodal")]
    Antipodal,
    #[error("radius {eps} outside (0, {bound})")]
    RadiusOutOfRange { eps: f64, bound: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ManifoldSpec {
    Euclidean(usize),
    /// Unit sphere in `R^ambient`, of intrinsic dimension `ambient - 1`.
    Sphere(usize),
    Product(Vec<ManifoldSpec>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: DVector<f64>,
}

impl Point {
    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub base: Point,
    pub vec: DVector<f64>,
}

impl Tangent {
    pub fn zero(base: &Point) -> Self {
        Self {
            vec: DVector::zeros(base.dim()),
            base: base.clone(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            base: self.base.clone(),
            vec: &self.vec * s,
        }
    }
}

impl ManifoldSpec {
    /// Checks the factor invariants (every factor has intrinsic dimension >= 1).
    pub fn validate(&self) -> Result<(), ManifoldError> {
        match self {
            ManifoldSpec::Euclidean(0) => Err(ManifoldError::Invalid("euclidean:0".into())),
            ManifoldSpec::Sphere(n) if *n < 2 => Err(ManifoldError::Invalid(format!(
                "sphere:{n} needs ambient dimension >= 2"
            ))),
            ManifoldSpec::Product(fs) if fs.is_empty() => {
                Err(ManifoldError::Invalid("empty product".into()))
            }
            ManifoldSpec::Product(fs) => fs.iter().try_for_each(|f| f.validate()),
            _ => Ok(()),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self {
            ManifoldSpec::Euclidean(n) | ManifoldSpec::Sphere(n) => *n,
            ManifoldSpec::Product(fs) => fs.iter().map(|f| f.ambient_dim()).sum(),
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            ManifoldSpec::Euclidean(n) => *n,
            ManifoldSpec::Sphere(n) => n - 1,
            ManifoldSpec::Product(fs) => fs.iter().map(|f| f.intrinsic_dim()).sum(),
        }
    }

    /// Lower bound on the injectivity radius; infinite for Euclidean space.
    pub fn injectivity_radius(&self) -> f64 {
        match self {
            ManifoldSpec::Euclidean(_) => f64::INFINITY,
            ManifoldSpec::Sphere(_) => PI,
            ManifoldSpec::Product(fs) => fs
                .iter()
                .map(|f| f.injectivity_radius())
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn blocks(&self) -> Vec<(usize, &ManifoldSpec)> {
        match self {
            ManifoldSpec::Product(fs) => {
                let mut offset = 0;
                let mut out = Vec::new();
                for f in fs {
                    for (o, leaf) in f.blocks() {
                        out.push((offset + o, leaf));
                    }
                    offset += f.ambient_dim();
                }
                out
            }
            leaf => vec![(0, leaf)],
        }
    }

    fn check_len(&self, len: usize) -> Result<(), ManifoldError> {
        if len != self.ambient_dim() {
            return Err(ManifoldError::Dimension {
                expected: self.ambient_dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Builds a point, normalizing every sphere block.
    pub fn point(&self, coords: &[f64]) -> Result<Point, ManifoldError> {
        self.check_len(coords.len())?;
        let mut c = DVector::from_column_slice(coords);
        for (off, leaf) in self.blocks() {
            if let ManifoldSpec::Sphere(n) = leaf {
                let mut block = c.rows_mut(off, *n);
                let norm = block.norm();
                if norm == 0.0 || !norm.is_finite() {
                    return Err(ManifoldError::ZeroNorm);
                }
                block /= norm;
            }
        }
        Ok(Point { coords: c })
    }

    /// Whether `coords` satisfies the point invariant within `tol`.
    pub fn contains(&self, coords: &[f64], tol: f64) -> bool {
        if coords.len() != self.ambient_dim() {
            return false;
        }
        self.blocks().into_iter().all(|(off, leaf)| match leaf {
            ManifoldSpec::Sphere(n) => {
                let norm: f64 = coords[off..off + n].iter().map(|x| x * x).sum::<f64>().sqrt();
                (norm - 1.0).abs() <= tol
            }
            _ => true,
        })
    }

    pub fn tangent(&self, base: &Point, vec: &[f64]) -> Result<Tangent, ManifoldError> {
        self.check_len(vec.len())?;
        Ok(Tangent {
            base: base.clone(),
            vec: DVector::from_column_slice(vec),
        })
    }

    /// Induced ambient inner product.
    pub fn inner(&self, u: &Tangent, v: &Tangent) -> Result<f64, ManifoldError> {
        self.check_len(u.vec.len())?;
        self.check_len(v.vec.len())?;
        if (&u.base.coords - &v.base.coords).amax() > BASE_TOL {
            return Err(ManifoldError::BaseMismatch);
        }
        Ok(u.vec.dot(&v.vec))
    }

    /// Orthogonal projection of an ambient vector onto `T_p M`.
    pub fn project_tangent(&self, p: &Point, ambient: &DVector<f64>) -> Tangent {
        let mut out = ambient.clone();
        for (off, leaf) in self.blocks() {
            if let ManifoldSpec::Sphere(n) = leaf {
                let pb = p.coords.rows(off, *n);
                let d = pb.dot(&ambient.rows(off, *n));
                let mut ob = out.rows_mut(off, *n);
                ob -= pb * d;
            }
        }
        Tangent {
            base: p.clone(),
            vec: out,
        }
    }

    pub fn exp(&self, v: &Tangent) -> Point {
        let mut q = v.base.coords.clone();
        for (off, leaf) in self.blocks() {
            let pb = v.base.coords.rows(off, leaf.ambient_dim());
            let vb = v.vec.rows(off, leaf.ambient_dim());
            let mut qb = q.rows_mut(off, leaf.ambient_dim());
            match leaf {
                ManifoldSpec::Sphere(_) => {
                    let t = vb.norm();
                    if t < SMALL_STEP {
                        // cos t ~ 1 - t^2/2, sin t / t ~ 1 - t^2/6
                        qb.copy_from(&(pb * (1.0 - t * t / 2.0) + vb * (1.0 - t * t / 6.0)));
                    } else {
                        qb.copy_from(&(pb * t.cos() + vb * (t.sin() / t)));
                    }
                    let n = qb.norm();
                    qb /= n;
                }
                _ => qb.copy_from(&(pb + vb)),
            }
        }
        Point { coords: q }
    }

    pub fn log(&self, p: &Point, q: &Point) -> Result<Tangent, ManifoldError> {
        self.check_len(p.dim())?;
        self.check_len(q.dim())?;
        let mut v = DVector::zeros(p.dim());
        for (off, leaf) in self.blocks() {
            let n = leaf.ambient_dim();
            let pb = p.coords.rows(off, n);
            let qb = q.coords.rows(off, n);
            let mut vb = v.rows_mut(off, n);
            match leaf {
                ManifoldSpec::Sphere(_) => {
                    let c = pb.dot(&qb).clamp(-1.0, 1.0);
                    if c <= -1.0 + ANTIPODAL_CUTOFF {
                        return Err(ManifoldError::Antipodal);
                    }
                    let w = qb - pb * c;
                    let wn = w.norm();
                    if wn > 0.0 {
                        let theta = c.acos();
                        vb.copy_from(&(w * (theta / wn)));
                    }
                }
                _ => vb.copy_from(&(qb - pb)),
            }
        }
        Ok(Tangent {
            base: p.clone(),
            vec: v,
        })
    }

    pub fn dist(&self, p: &Point, q: &Point) -> f64 {
        self.blocks()
            .into_iter()
            .map(|(off, leaf)| {
                let n = leaf.ambient_dim();
                let pb = p.coords.rows(off, n);
                let qb = q.coords.rows(off, n);
                let d = match leaf {
                    ManifoldSpec::Sphere(_) => pb.dot(&qb).clamp(-1.0, 1.0).acos(),
                    _ => (qb - pb).norm(),
                };
                d * d
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `count` points `exp_p(r u)`, `u` uniform on the unit tangent sphere and
    /// `r` uniform in `(0, eps)`. Deterministic for a given seed.
    pub fn sample_ball(
        &self,
        p: &Point,
        eps: f64,
        count: usize,
        seed: u64,
    ) -> Result<Vec<Point>, ManifoldError> {
        let bound = self.injectivity_radius();
        if !(eps > 0.0 && eps < bound) {
            return Err(ManifoldError::RadiusOutOfRange { eps, bound });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.ambient_dim();
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let g = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            let t = self.project_tangent(p, &g);
            let norm = t.norm();
            let r: f64 = rng.random_range(0.0..eps);
            if norm < 1e-12 || r == 0.0 {
                continue;
            }
            out.push(self.exp(&t.scaled(r / norm)));
        }
        Ok(out)
    }
}

impl fmt::Display for ManifoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ManifoldSpec::Euclidean(n) => write!(f, "euclidean:{n}"),
            ManifoldSpec::Sphere(n) => write!(f, "sphere:{n}"),
            ManifoldSpec::Product(fs) => {
                write!(f, "product:[")?;
                for (i, s) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{s}")?;
                }
                write!(f, "]")
            }
        }
    }
}

impl FromStr for ManifoldSpec {
    type Err = ManifoldError;

    /// Parses `euclidean:<n>`, `sphere:<ambient>` or `product:[<spec>,...]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| ManifoldError::Parse {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let s = s.trim();
        let (kind, rest) = s.split_once(':').ok_or_else(|| err("missing `:`"))?;
        let spec = match kind.trim() {
            "euclidean" => ManifoldSpec::Euclidean(
                rest.trim().parse().map_err(|_| err("bad dimension"))?,
            ),
            "sphere" => {
                ManifoldSpec::Sphere(rest.trim().parse().map_err(|_| err("bad dimension"))?)
            }
            "product" => {
                let inner = rest
                    .trim()
                    .strip_prefix('[')
                    .and_then(|r| r.strip_suffix(']'))
                    .ok_or_else(|| err("product factors must be in brackets"))?;
                let mut factors = Vec::new();
                let mut depth = 0usize;
                let mut start = 0;
                for (i, ch) in inner.char_indices() {
                    match ch {
                        '[' => depth += 1,
                        ']' => depth = depth.checked_sub(1).ok_or_else(|| err("unbalanced"))?,
                        ',' if depth == 0 => {
                            factors.push(inner[start..i].parse()?);
                            start = i + 1;
                        }
                        _ => {}
                    }
                }
                if depth != 0 {
                    return Err(err("unbalanced brackets"));
                }
                if !inner[start..].trim().is_empty() {
                    factors.push(inner[start..].parse()?);
                }
                ManifoldSpec::Product(factors)
            }
            _ => return Err(err("unknown manifold kind")),
        };
        spec.validate()?;
        Ok(spec)
    }
}
