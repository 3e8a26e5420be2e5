//! Dense linear programming with dual values, plus branch and bound for
//! bounded integer variables.
//!
//! Problems have the form
//!
//! ```text
//! min  cᵀx   s.t.  A x = b,  D x ≤ e,  lo ≤ x ≤ hi
//! ```
//!
//! Duals follow the Lagrangian `cᵀx + μᵀ(Ax − b) + λᵀ(Dx − e)`, so at an
//! optimum `c + Aᵀμ + Dᵀλ ≥ 0` on unbounded-above columns, `λ ≥ 0`, and the
//! optimal value equals `−μᵀb − λᵀe` when all bounds are `[0, ∞)`.

mod bb;
mod simplex;

pub use bb::solve_bb;
pub use simplex::solve_lp;

use serde::{Deserialize, Serialize};

/// Feasibility and optimality tolerances.
pub const TOL_FEAS: f64 = 1e-7;
/// Relative duality-gap tolerance.
pub const TOL_GAP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub eq_rows: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    pub le_rows: Vec<Vec<f64>>,
    pub le_rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl LpProblem {
    /// A problem in `n` variables with bounds `[0, ∞)` and no rows.
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LpProblem {
            objective,
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
            le_rows: Vec::new(),
            le_rhs: Vec::new(),
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) {
        debug_assert_eq!(row.len(), self.num_vars());
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) {
        debug_assert_eq!(row.len(), self.num_vars());
        self.le_rows.push(row);
        self.le_rhs.push(rhs);
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) {
        self.add_le(row.into_iter().map(|v| -v).collect(), -rhs);
    }

    /// Flags non-finite data and inverted bounds.
    pub fn check(&self) -> Result<(), String> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err("bound vectors do not match the number of variables".into());
        }
        if self.eq_rows.len() != self.eq_rhs.len() || self.le_rows.len() != self.le_rhs.len() {
            return Err("row and right-hand-side counts differ".into());
        }
        for row in self.eq_rows.iter().chain(&self.le_rows) {
            if row.len() != n {
                return Err("row length does not match the number of variables".into());
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err("non-finite constraint coefficient".into());
            }
        }
        if self.objective.iter().any(|v| !v.is_finite())
            || self.eq_rhs.iter().chain(&self.le_rhs).any(|v| !v.is_finite())
        {
            return Err("non-finite objective or right-hand side".into());
        }
        for j in 0..n {
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(format!("inconsistent bounds on variable {j}"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Iteration cap reached or the problem data was unusable.
    NumericalFailure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// One per equality row, free sign.
    pub mu: Vec<f64>,
    /// One per inequality row, non-negative.
    pub lambda: Vec<f64>,
    /// Multipliers on finite upper bounds, non-negative (zero where the bound
    /// is infinite).
    pub upper_duals: Vec<f64>,
    /// Multipliers on finite lower bounds, non-negative.
    pub lower_duals: Vec<f64>,
    pub iterations: usize,
}

impl LpSolution {
    pub fn failed(status: LpStatus, p: &LpProblem) -> Self {
        let objective = match status {
            LpStatus::Infeasible => f64::INFINITY,
            LpStatus::Unbounded => f64::NEG_INFINITY,
            _ => f64::NAN,
        };
        LpSolution {
            status,
            x: Vec::new(),
            objective,
            mu: vec![0.0; p.eq_rows.len()],
            lambda: vec![0.0; p.le_rows.len()],
            upper_duals: vec![0.0; p.num_vars()],
            lower_duals: vec![0.0; p.num_vars()],
            iterations: 0,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Value of the Lagrangian dual at the reported multipliers.
    pub fn dual_objective(&self, p: &LpProblem) -> f64 {
        let mut v = 0.0;
        for (m, r) in self.mu.iter().zip(&p.eq_rhs) {
            v -= m * r;
        }
        for (l, r) in self.lambda.iter().zip(&p.le_rhs) {
            v -= l * r;
        }
        for j in 0..p.num_vars() {
            if self.upper_duals[j] != 0.0 {
                v -= self.upper_duals[j] * p.upper[j];
            }
            if self.lower_duals[j] != 0.0 {
                v += self.lower_duals[j] * p.lower[j];
            }
        }
        v
    }

    /// Reduced costs `c + Aᵀμ + Dᵀλ`, one per variable.
    pub fn reduced_costs(&self, p: &LpProblem) -> Vec<f64> {
        let mut r = p.objective.clone();
        for (m, row) in self.mu.iter().zip(&p.eq_rows) {
            if *m != 0.0 {
                for (rj, a) in r.iter_mut().zip(row) {
                    *rj += m * a;
                }
            }
        }
        for (l, row) in self.lambda.iter().zip(&p.le_rows) {
            if *l != 0.0 {
                for (rj, d) in r.iter_mut().zip(row) {
                    *rj += l * d;
                }
            }
        }
        r
    }

    /// Largest primal violation of `x` against the rows and bounds.
    pub fn primal_violation(&self, p: &LpProblem) -> f64 {
        primal_violation(p, &self.x)
    }
}

/// Largest violation of any row or bound by `x`.
pub fn primal_violation(p: &LpProblem, x: &[f64]) -> f64 {
    let dot = |row: &[f64]| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
    let mut worst: f64 = 0.0;
    for (row, r) in p.eq_rows.iter().zip(&p.eq_rhs) {
        worst = worst.max((dot(row) - r).abs());
    }
    for (row, r) in p.le_rows.iter().zip(&p.le_rhs) {
        worst = worst.max(dot(row) - r);
    }
    for (j, v) in x.iter().enumerate() {
        worst = worst.max(p.lower[j] - v).max(v - p.upper[j]);
    }
    worst
}

/// `|a − b| ≤ tol · max(1, |a|, |b|)`.
pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a.is_infinite() || b.is_infinite() {
        return a == b;
    }
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
