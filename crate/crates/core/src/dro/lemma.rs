//! Numerical check of the duality behind the robust objective on a
//! one-dimensional support grid.
//!
//! The worst-case expectation `sup { E_P[Q] : W(P, P̂_N) ≤ θ }` over
//! distributions supported on the grid is a transport LP. Its dual is
//! `min_{β ≥ 0} θβ + (1/N) Σ_j max_s [Q(s) − β |s − ξ_j|]`, a convex
//! piecewise-linear function of β whose minimum sits at zero or at a
//! crossing point of two of its lines. Both sides are computed exactly.

use crate::linprog::{solve_lp, LpProblem, LpStatus};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LemmaCheck {
    /// Worst-case expectation from the transport LP.
    pub lhs: f64,
    /// Minimum of the penalised dual.
    pub rhs: f64,
    /// A minimising β.
    pub beta: f64,
}

impl LemmaCheck {
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.lhs.abs().max(1.0)
    }
}

fn dual_value(grid: &[f64], q: &[f64], samples: &[f64], theta: f64, beta: f64) -> f64 {
    let n = samples.len() as f64;
    let inner: f64 = samples
        .iter()
        .map(|&xi| {
            grid.iter()
                .zip(q)
                .map(|(&s, &v)| v - beta * (s - xi).abs())
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum();
    theta * beta + inner / n
}

/// Compares the transport LP with its penalised dual.
///
/// `q[s]` is the recourse value at `grid[s]`. Samples must lie on the grid so
/// that the empirical distribution itself is feasible.
///
/// # Panics
/// If the inputs are empty, `q` and `grid` differ in length, a sample is
/// off the grid or `theta` is negative.
pub fn prop1_smallscale_check(grid: &[f64], q: &[f64], samples: &[f64], theta: f64) -> LemmaCheck {
    assert!(!grid.is_empty() && !samples.is_empty());
    assert_eq!(grid.len(), q.len());
    assert!(theta >= 0.0);
    for xi in samples {
        assert!(grid.iter().any(|s| (s - xi).abs() <= 1e-12), "sample {xi} is off the grid");
    }
    let g = grid.len();
    let n = samples.len();

    // Variables π[j][s]: mass moved from sample j to grid point s.
    let mut objective = Vec::with_capacity(n * g);
    for _ in 0..n {
        objective.extend(q.iter().map(|v| -v));
    }
    let mut p = LpProblem::new(objective);
    for j in 0..n {
        let mut row = vec![0.0; n * g];
        row[j * g..(j + 1) * g].iter_mut().for_each(|x| *x = 1.0);
        p.add_eq(row, 1.0 / n as f64);
    }
    let mut transport = vec![0.0; n * g];
    for (j, xi) in samples.iter().enumerate() {
        for (s, gs) in grid.iter().enumerate() {
            transport[j * g + s] = (gs - xi).abs();
        }
    }
    p.add_le(transport, theta);
    let sol = solve_lp(&p);
    assert_eq!(sol.status, LpStatus::Optimal, "the empirical coupling is always feasible");
    let lhs = -sol.objective;

    let mut candidates = vec![0.0];
    for xi in samples {
        for s in 0..g {
            for t in 0..s {
                let ds = (grid[s] - xi).abs();
                let dt = (grid[t] - xi).abs();
                if (ds - dt).abs() > 1e-15 {
                    let beta = (q[s] - q[t]) / (ds - dt);
                    if beta > 0.0 {
                        candidates.push(beta);
                    }
                }
            }
        }
    }
    let (beta, rhs) = candidates
        .into_iter()
        .map(|b| (b, dual_value(grid, q, samples, theta, b)))
        .fold((0.0, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
    LemmaCheck { lhs, rhs, beta }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_radius_gives_the_sample_mean() {
        let grid = [0.0, 1.0, 2.0, 3.0];
        let q = [0.0, 5.0, 1.0, 7.0];
        let c = prop1_smallscale_check(&grid, &q, &[1.0, 2.0], 0.0);
        assert!((c.lhs - 3.0).abs() < 1e-9);
        assert!((c.rhs - 3.0).abs() < 1e-9);
    }

    #[test]
    fn large_radius_reaches_the_maximum() {
        let grid = [0.0, 1.0, 2.0];
        let q = [1.0, 2.0, 4.0];
        let c = prop1_smallscale_check(&grid, &q, &[0.0], 10.0);
        assert!((c.lhs - 4.0).abs() < 1e-9);
        assert!((c.rhs - 4.0).abs() < 1e-9);
        assert_eq!(c.beta, 0.0);
    }

    #[test]
    fn partial_move_is_linear_in_radius() {
        // Moving mass from 0 to 1 gains 3 per unit of distance.
        let grid = [0.0, 1.0];
        let q = [0.0, 3.0];
        let c = prop1_smallscale_check(&grid, &q, &[0.0], 0.25);
        assert!((c.lhs - 0.75).abs() < 1e-9);
        assert!((c.rhs - 0.75).abs() < 1e-9);
        assert!((c.beta - 3.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn primal_and_dual_agree(
            q in proptest::collection::vec(0.0f64..100.0, 2..12),
            picks in proptest::collection::vec(0usize..100, 1..5),
            theta in 0.0f64..5.0,
        ) {
            let grid: Vec<f64> = (0..q.len()).map(|i| i as f64 * 0.5).collect();
            let samples: Vec<f64> = picks.iter().map(|p| grid[p % grid.len()]).collect();
            let c = prop1_smallscale_check(&grid, &q, &samples, theta);
            prop_assert!(c.relative_gap() <= 1e-6, "{:?}", c);
        }
    }
}
