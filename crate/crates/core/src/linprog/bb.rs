//! Depth-first branch and bound over bounded integer variables.

use super::{solve_lp, LpProblem, LpSolution, LpStatus};

const INT_TOL: f64 = 1e-6;

/// Minimises `p` with the variables in `integer_vars` restricted to integers.
///
/// Branches on the lowest-index fractional variable, down branch first, and
/// prunes nodes whose relaxation cannot beat the incumbent.
pub fn solve_bb(p: &LpProblem, integer_vars: &[usize]) -> LpSolution {
    let root = solve_lp(p);
    if integer_vars.is_empty() || root.status != LpStatus::Optimal {
        return root;
    }
    let mut best: Option<LpSolution> = None;
    let mut iterations = 0usize;
    let mut stack: Vec<(Vec<f64>, Vec<f64>)> = vec![(p.lower.clone(), p.upper.clone())];
    let mut first = Some(root);
    while let Some((lower, upper)) = stack.pop() {
        let sol = match first.take() {
            Some(s) => s,
            None => {
                let mut q = p.clone();
                q.lower = lower.clone();
                q.upper = upper.clone();
                solve_lp(&q)
            }
        };
        iterations += sol.iterations;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            _ => {
                let mut s = sol;
                s.iterations = iterations;
                return s;
            }
        }
        if let Some(b) = &best {
            let slack = 1e-9 * b.objective.abs().max(1.0);
            if sol.objective >= b.objective - slack {
                continue;
            }
        }
        let fractional = integer_vars
            .iter()
            .copied()
            .find(|&j| (sol.x[j] - sol.x[j].round()).abs() > INT_TOL);
        match fractional {
            None => {
                let mut s = sol;
                for &j in integer_vars {
                    s.x[j] = s.x[j].round();
                }
                best = Some(s);
            }
            Some(j) => {
                let v = sol.x[j];
                let mut up_lo = lower.clone();
                up_lo[j] = v.ceil();
                let mut down_hi = upper.clone();
                down_hi[j] = v.floor();
                // Pushed in reverse so the down branch is explored first.
                if up_lo[j] <= upper[j] {
                    stack.push((up_lo, upper.clone()));
                }
                if lower[j] <= down_hi[j] {
                    stack.push((lower, down_hi));
                }
            }
        }
    }
    match best {
        Some(mut s) => {
            s.iterations = iterations;
            s
        }
        None => {
            let mut s = LpSolution::failed(LpStatus::Infeasible, p);
            s.iterations = iterations;
            s
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_up_is_forced() {
        let mut p = LpProblem::new(vec![1.0]);
        p.upper = vec![1.0];
        p.add_ge(vec![1.0], 0.3);
        let s = solve_bb(&p, &[0]);
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.x[0], 1.0);
    }

    #[test]
    fn no_integers_is_plain_lp() {
        let mut p = LpProblem::new(vec![1.0, 2.0]);
        p.add_ge(vec![1.0, 1.0], 1.5);
        assert_eq!(solve_bb(&p, &[]), solve_lp(&p));
    }

    #[test]
    fn knapsack_matches_enumeration() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 4, binaries.
        let value = [5.0, 4.0, 3.0];
        let weight = [2.0, 3.0, 1.0];
        let mut p = LpProblem::new(value.iter().map(|v| -v).collect());
        p.upper = vec![1.0; 3];
        p.add_le(weight.to_vec(), 4.0);
        let s = solve_bb(&p, &[0, 1, 2]);
        let mut best = f64::INFINITY;
        for mask in 0..8u32 {
            let pick: Vec<f64> = (0..3).map(|i| f64::from((mask >> i) & 1)).collect();
            let w: f64 = pick.iter().zip(&weight).map(|(a, b)| a * b).sum();
            if w <= 4.0 {
                let v: f64 = pick.iter().zip(&value).map(|(a, b)| -a * b).sum();
                best = best.min(v);
            }
        }
        assert!((s.objective - best).abs() < 1e-9);
        assert_eq!(best, -8.0);
    }
}
