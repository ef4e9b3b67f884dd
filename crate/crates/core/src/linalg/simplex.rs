//! Dense two-phase simplex for tiny standard-form linear programs
//!
//! ```text
//! minimize c^T x  subject to  A x = b,  x >= 0
//! ```
//!
//! Pivoting follows Bland's rule (lowest eligible index enters, ties in the
//! ratio test leave by lowest basic index), which rules out cycling in exact
//! arithmetic. An iteration guard still reports [`LinalgError::SimplexCycling`]
//! because floating point can defeat the guarantee on degenerate input.

use nalgebra::DMatrix;

use super::LinalgError;

/// Tolerances for [`solve`].
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Phase-one optimum above this value declares the program infeasible.
    pub feas_tol: f64,
    /// Smallest admissible pivot magnitude.
    pub pivot_tol: f64,
    /// Reduced costs above `-cost_tol` count as non-improving.
    pub cost_tol: f64,
    /// Pivot budget per phase; `None` means `50 * (rows + cols) + 100`.
    pub max_pivots: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-9,
            pivot_tol: 1e-11,
            cost_tol: 1e-11,
            max_pivots: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    /// `phase_one` is the minimal sum of artificial variables found.
    Infeasible { phase_one: f64 },
    Unbounded,
}

impl LpOutcome {
    pub fn solution(&self) -> Option<&[f64]> {
        match self {
            LpOutcome::Optimal { x, .. } => Some(x),
            _ => None,
        }
    }
}

struct Tableau {
    // rows x (cols + 1); last column holds the right-hand side
    t: DMatrix<f64>,
    basis: Vec<usize>,
    // rows whose artificial could not be driven out; they are redundant
    dead_rows: Vec<bool>,
    n_orig: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.t[(i, self.t.ncols() - 1)]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let ncols = self.t.ncols();
        let p = self.t[(row, col)];
        for j in 0..ncols {
            self.t[(row, j)] /= p;
        }
        for i in 0..self.t.nrows() {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f != 0.0 {
                for j in 0..ncols {
                    let v = self.t[(row, j)];
                    self.t[(i, j)] -= f * v;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Reduced costs `c_j - c_B^T B^{-1} A_j` for the first `allowed` columns.
    fn reduced_costs(&self, cost: &[f64], allowed: usize) -> Vec<f64> {
        let mut r: Vec<f64> = cost[..allowed].to_vec();
        for (i, &bi) in self.basis.iter().enumerate() {
            if self.dead_rows[i] {
                continue;
            }
            let cb = cost[bi];
            if cb != 0.0 {
                for (j, rj) in r.iter_mut().enumerate() {
                    *rj -= cb * self.t[(i, j)];
                }
            }
        }
        r
    }

    /// Runs Bland-rule pivots until optimal. Returns `false` when unbounded.
    fn optimize(
        &mut self,
        cost: &[f64],
        allowed: usize,
        opts: &SimplexOptions,
        budget: usize,
    ) -> Result<bool, LinalgError> {
        for _ in 0..budget {
            let r = self.reduced_costs(cost, allowed);
            let Some(enter) = (0..allowed)
                .find(|&j| r[j] < -opts.cost_tol && !self.basis.contains(&j))
            else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.nrows() {
                if self.dead_rows[i] {
                    continue;
                }
                let a = self.t[(i, enter)];
                if a > opts.pivot_tol {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            let tie = (ratio - lr).abs() <= 1e-12 * (1.0 + lr.abs());
                            if (ratio < lr && !tie) || (tie && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            match leave {
                None => return Ok(false),
                Some((row, _)) => self.pivot(row, enter),
            }
        }
        Err(LinalgError::SimplexCycling { pivots: budget })
    }
}

/// Solves `min c^T x, A x = b, x >= 0` by the two-phase method.
pub fn solve(
    c: &[f64],
    a: &DMatrix<f64>,
    b: &[f64],
    opts: &SimplexOptions,
) -> Result<LpOutcome, LinalgError> {
    let (m, n) = a.shape();
    if c.len() != n || b.len() != m {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            got: c.len(),
        });
    }
    let budget = opts.max_pivots.unwrap_or(50 * (m + n) + 100);

    // columns: original n, artificials m, rhs
    let mut t = DMatrix::<f64>::zeros(m, n + m + 1);
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = sign * a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, n + m)] = sign * b[i];
    }
    let mut tab = Tableau {
        t,
        basis: (n..n + m).collect(),
        dead_rows: vec![false; m],
        n_orig: n,
    };

    // phase one
    let mut phase_one_cost = vec![0.0; n + m];
    for cost in phase_one_cost.iter_mut().skip(n) {
        *cost = 1.0;
    }
    tab.optimize(&phase_one_cost, n + m, opts, budget)?;
    let infeas: f64 = (0..m)
        .filter(|&i| tab.basis[i] >= n)
        .map(|i| tab.rhs(i).max(0.0))
        .sum();
    if infeas > opts.feas_tol {
        return Ok(LpOutcome::Infeasible { phase_one: infeas });
    }

    // drive remaining artificials out of the basis
    for i in 0..m {
        if tab.basis[i] < n {
            continue;
        }
        let col = (0..n).find(|&j| tab.t[(i, j)].abs() > opts.pivot_tol && !tab.basis.contains(&j));
        match col {
            Some(j) => tab.pivot(i, j),
            None => tab.dead_rows[i] = true,
        }
    }

    // phase two over the original columns only
    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat_n(0.0, m));
    if !tab.optimize(&cost, n, opts, budget)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![0.0; tab.n_orig];
    for (i, &bi) in tab.basis.iter().enumerate() {
        if bi < n && !tab.dead_rows[i] {
            x[bi] = tab.rhs(i).max(0.0);
        }
    }
    let value = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpOutcome::Optimal { x, value })
}

/// Phase-one only: returns a point of `{A x = b, x >= 0}` if one exists.
pub fn find_feasible(
    a: &DMatrix<f64>,
    b: &[f64],
    opts: &SimplexOptions,
) -> Result<Option<Vec<f64>>, LinalgError> {
    let zero = vec![0.0; a.ncols()];
    Ok(match solve(&zero, a, b, opts)? {
        LpOutcome::Optimal { x, .. } => Some(x),
        LpOutcome::Infeasible { .. } => None,
        // a zero objective is never unbounded
        LpOutcome::Unbounded => unreachable!("zero objective reported unbounded"),
    })
}
