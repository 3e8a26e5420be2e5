//! Two-phase dense tableau simplex.

use super::{LpProblem, LpSolution, LpStatus, TOL_FEAS};

const PIVOT_EPS: f64 = 1e-9;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const STALL_LIMIT: usize = 50;

#[derive(Clone, Copy)]
enum VarMap {
    /// `x = lo + s`.
    Shift { col: usize, lo: f64 },
    /// `x = hi − s`.
    Mirror { col: usize, hi: f64 },
    /// `x = s⁺ − s⁻`.
    Split { pos: usize, neg: usize },
}

struct Tableau {
    rows: usize,
    width: usize,
    data: Vec<f64>,
    /// Reduced-cost row, `width` entries, last entry is −objective.
    cost_row: Vec<f64>,
    basis: Vec<usize>,
    iterations: usize,
    cap: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
    Cap,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.width + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.data[i * self.width + self.width - 1]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let inv = 1.0 / self.data[r * w + c];
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v *= inv;
        }
        self.data[r * w + c] = 1.0;
        let pivot_row: Vec<(usize, f64)> = self.data[r * w..(r + 1) * w]
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .collect();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.data[i * w + c];
            if f != 0.0 {
                let row = &mut self.data[i * w..(i + 1) * w];
                for &(j, v) in &pivot_row {
                    row[j] -= f * v;
                }
                row[c] = 0.0;
            }
        }
        let f = self.cost_row[c];
        if f != 0.0 {
            for &(j, v) in &pivot_row {
                self.cost_row[j] -= f * v;
            }
            self.cost_row[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Runs simplex iterations with columns `0..enter_limit` eligible to enter.
    fn optimize(&mut self, enter_limit: usize, d_tol: f64) -> Outcome {
        let mut bland = false;
        let mut stall = 0usize;
        loop {
            if self.iterations >= self.cap {
                return Outcome::Cap;
            }
            let entering = if bland {
                (0..enter_limit).find(|&j| self.cost_row[j] < -d_tol)
            } else {
                let mut best = None;
                let mut best_val = -d_tol;
                for j in 0..enter_limit {
                    if self.cost_row[j] < best_val {
                        best_val = self.cost_row[j];
                        best = Some(j);
                    }
                }
                best
            };
            let Some(c) = entering else {
                return Outcome::Optimal;
            };
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for i in 0..self.rows {
                let a = self.at(i, c);
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some(l) => {
                            let scale = 1e-12 * best_ratio.abs().max(1.0);
                            ratio < best_ratio - scale
                                || (ratio <= best_ratio + scale && self.basis[i] < self.basis[l])
                        }
                    };
                    if better {
                        leave = Some(i);
                        best_ratio = ratio;
                    }
                }
            }
            let Some(r) = leave else {
                return Outcome::Unbounded;
            };
            if best_ratio <= 1e-12 {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            } else {
                stall = 0;
            }
            self.pivot(r, c);
            self.iterations += 1;
        }
    }
}

/// Solves an LP by the two-phase simplex method.
///
/// Every row carries an artificial column for the whole solve, which is
/// never allowed back into the basis after phase one; its final reduced cost
/// is the row's dual value.
pub fn solve_lp(p: &LpProblem) -> LpSolution {
    if p.check().is_err() {
        return LpSolution::failed(LpStatus::NumericalFailure, p);
    }
    let n = p.num_vars();

    // Variable substitution.
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut ub_rows: Vec<(usize, usize, f64)> = Vec::new(); // (orig var, col, bound)
    for j in 0..n {
        let (lo, hi) = (p.lower[j], p.upper[j]);
        if lo.is_finite() {
            maps.push(VarMap::Shift { col: ncols, lo });
            if hi.is_finite() {
                ub_rows.push((j, ncols, hi - lo));
            }
            ncols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Mirror { col: ncols, hi });
            ncols += 1;
        } else {
            maps.push(VarMap::Split {
                pos: ncols,
                neg: ncols + 1,
            });
            ncols += 2;
        }
    }
    let n_eq = p.eq_rows.len();
    let n_le = p.le_rows.len();
    let n_ub = ub_rows.len();
    let m = n_eq + n_le + n_ub;
    let n_slack = n_le + n_ub;
    let cols = ncols + n_slack;
    let width = cols + m + 1;

    let mut cost = vec![0.0; cols];
    for (j, map) in maps.iter().enumerate() {
        match *map {
            VarMap::Shift { col, .. } => cost[col] = p.objective[j],
            VarMap::Mirror { col, .. } => cost[col] = -p.objective[j],
            VarMap::Split { pos, neg } => {
                cost[pos] = p.objective[j];
                cost[neg] = -p.objective[j];
            }
        }
    }
    let offset = |j: usize| match maps[j] {
        VarMap::Shift { lo, .. } => lo,
        VarMap::Mirror { hi, .. } => hi,
        VarMap::Split { .. } => 0.0,
    };

    let mut data = vec![0.0; m * width];
    let mut row_sign = vec![1.0; m];
    let fill_row = |data: &mut [f64], i: usize, row: &[f64], rhs: f64| {
        let base = i * width;
        let mut r = rhs;
        for (j, &a) in row.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            r -= a * offset(j);
            match maps[j] {
                VarMap::Shift { col, .. } => data[base + col] += a,
                VarMap::Mirror { col, .. } => data[base + col] -= a,
                VarMap::Split { pos, neg } => {
                    data[base + pos] += a;
                    data[base + neg] -= a;
                }
            }
        }
        data[base + width - 1] = r;
    };
    for (i, (row, &rhs)) in p.eq_rows.iter().zip(&p.eq_rhs).enumerate() {
        fill_row(&mut data, i, row, rhs);
    }
    for (l, (row, &rhs)) in p.le_rows.iter().zip(&p.le_rhs).enumerate() {
        let i = n_eq + l;
        fill_row(&mut data, i, row, rhs);
        data[i * width + ncols + l] = 1.0;
    }
    for (u, &(_, col, bound)) in ub_rows.iter().enumerate() {
        let i = n_eq + n_le + u;
        data[i * width + col] = 1.0;
        data[i * width + ncols + n_le + u] = 1.0;
        data[i * width + width - 1] = bound;
    }
    let mut basis = vec![0usize; m];
    let mut artificial_basic = vec![false; m];
    for i in 0..m {
        let base = i * width;
        if data[base + width - 1] < 0.0 {
            row_sign[i] = -1.0;
            for v in &mut data[base..base + cols] {
                *v = -*v;
            }
            data[base + width - 1] = -data[base + width - 1];
        }
        data[base + cols + i] = 1.0;
        let slack_ok = i >= n_eq && row_sign[i] > 0.0;
        if slack_ok {
            basis[i] = ncols + (i - n_eq);
        } else {
            basis[i] = cols + i;
            artificial_basic[i] = true;
        }
    }

    let cap = 50 * (m + cols) + 1000;
    let mut t = Tableau {
        rows: m,
        width,
        data,
        cost_row: vec![0.0; width],
        basis,
        iterations: 0,
        cap,
    };

    // Phase one: minimise the sum of basic artificials.
    let scale_b = (0..m).map(|i| t.rhs(i).abs()).fold(1.0, f64::max);
    if artificial_basic.iter().any(|&a| a) {
        for i in 0..m {
            if artificial_basic[i] {
                t.cost_row[cols + i] = 1.0;
            }
        }
        for i in 0..m {
            if artificial_basic[i] {
                for j in 0..width {
                    t.cost_row[j] -= t.data[i * width + j];
                }
            }
        }
        match t.optimize(cols, 1e-11) {
            Outcome::Optimal => {}
            Outcome::Cap | Outcome::Unbounded => {
                return LpSolution::failed(LpStatus::NumericalFailure, p);
            }
        }
        let infeasibility = -t.cost_row[width - 1];
        if infeasibility > TOL_FEAS * scale_b {
            let mut s = LpSolution::failed(LpStatus::Infeasible, p);
            s.iterations = t.iterations;
            return s;
        }
        // Drive remaining artificials out of the basis where possible.
        for i in 0..m {
            if t.basis[i] >= cols {
                if let Some(j) = (0..cols).find(|&j| t.at(i, j).abs() > 1e-7) {
                    t.pivot(i, j);
                }
            }
        }
        for i in 0..m {
            if t.basis[i] >= cols {
                t.data[i * width + width - 1] = 0.0;
            }
        }
    }

    // Phase two.
    let cmax = cost.iter().fold(1.0f64, |a, c| a.max(c.abs()));
    t.cost_row.iter_mut().for_each(|v| *v = 0.0);
    t.cost_row[..cols].copy_from_slice(&cost);
    for i in 0..m {
        let cb = if t.basis[i] < cols { cost[t.basis[i]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..width {
                t.cost_row[j] -= cb * t.data[i * width + j];
            }
        }
    }
    match t.optimize(cols, 1e-10 * cmax) {
        Outcome::Optimal => {}
        Outcome::Unbounded => {
            let mut s = LpSolution::failed(LpStatus::Unbounded, p);
            s.iterations = t.iterations;
            return s;
        }
        Outcome::Cap => return LpSolution::failed(LpStatus::NumericalFailure, p),
    }

    let mut std_x = vec![0.0; cols];
    for i in 0..m {
        if t.basis[i] < cols {
            std_x[t.basis[i]] = t.rhs(i).max(0.0);
        }
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shift { col, lo } => lo + std_x[col],
            VarMap::Mirror { col, hi } => hi - std_x[col],
            VarMap::Split { pos, neg } => std_x[pos] - std_x[neg],
        })
        .collect();
    let objective: f64 = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

    // Row duals in the textbook convention, then flipped to the Lagrangian one.
    let y: Vec<f64> = (0..m)
        .map(|i| -t.cost_row[cols + i] * row_sign[i])
        .collect();
    let mu: Vec<f64> = y[..n_eq].iter().map(|v| -v).collect();
    let lambda: Vec<f64> = y[n_eq..n_eq + n_le].iter().map(|v| (-v).max(0.0)).collect();
    let mut sol = LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        mu,
        lambda,
        upper_duals: vec![0.0; n],
        lower_duals: vec![0.0; n],
        iterations: t.iterations,
    };
    let reduced = sol.reduced_costs(p);
    for (u, &(j, _, _)) in ub_rows.iter().enumerate() {
        sol.upper_duals[j] = (-y[n_eq + n_le + u]).max(0.0);
    }
    for j in 0..n {
        match maps[j] {
            VarMap::Shift { .. } => {
                sol.lower_duals[j] = (reduced[j] + sol.upper_duals[j]).max(0.0);
            }
            VarMap::Mirror { .. } => sol.upper_duals[j] = (-reduced[j]).max(0.0),
            VarMap::Split { .. } => {}
        }
    }
    sol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linprog::rel_close;

    #[test]
    fn single_variable_equality() {
        let mut p = LpProblem::new(vec![2.0]);
        p.add_eq(vec![1.0], 10.0);
        let s = solve_lp(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.x[0] - 10.0).abs() < 1e-9);
        assert!((s.objective - 20.0).abs() < 1e-9);
        assert!((s.mu[0] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_bound_is_infeasible() {
        let mut p = LpProblem::new(vec![1.0]);
        p.add_eq(vec![1.0], 10.0);
        p.add_le(vec![1.0], 5.0);
        assert_eq!(solve_lp(&p).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut p = LpProblem::new(vec![-1.0, 0.0]);
        p.add_le(vec![1.0, -1.0], 1.0);
        assert_eq!(solve_lp(&p).status, LpStatus::Unbounded);
    }

    #[test]
    fn bounded_and_free_variables() {
        // min x0 - x1 + x2, x0 in [2, 5], x1 <= 3, x2 free, x0 + x2 = 4, x2 >= -10
        let mut p = LpProblem::new(vec![1.0, -1.0, 1.0]);
        p.lower = vec![2.0, f64::NEG_INFINITY, f64::NEG_INFINITY];
        p.upper = vec![5.0, 3.0, f64::INFINITY];
        p.add_eq(vec![1.0, 0.0, 1.0], 4.0);
        p.add_ge(vec![0.0, 0.0, 1.0], -10.0);
        let s = solve_lp(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(rel_close(s.objective, 1.0, 1e-9), "{}", s.objective);
        assert!(rel_close(s.dual_objective(&p), s.objective, 1e-9));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // A classic cycling example under the textbook rule.
        let mut p = LpProblem::new(vec![-0.75, 150.0, -0.02, 6.0]);
        p.add_le(vec![0.25, -60.0, -0.04, 9.0], 0.0);
        p.add_le(vec![0.5, -90.0, -0.02, 3.0], 0.0);
        p.add_le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let s = solve_lp(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!(rel_close(s.objective, -0.05, 1e-9), "{}", s.objective);
    }
}
