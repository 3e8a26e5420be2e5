//! Inner maximisation `max_b [Q(η, b) − β ρʲ(b)]` over the demand box.
//!
//! The maximum is attained at a vertex where every pair sits at its sample
//! value, its upper bound or its lower bound, so all strategies search over
//! [`VertexPattern`]s. Ties are broken towards the smaller transport distance,
//! then towards the lexicographically smaller pattern.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::penalty::{wasserstein_penalty, VertexPattern, VertexState};
use super::second_stage::Recourse;
use crate::linprog::{solve_lp, LpProblem, LpStatus};
use crate::model::{DemandModel, Design, NetworkSpec, Tolerances, WorstCaseStrategy};
use crate::par::ExecPolicy;

/// The worst case for one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseEntry {
    pub sample: usize,
    pub b_star: Vec<f64>,
    pub pattern: VertexPattern,
    /// `Q(η, b*) − β ρ(b*)`; `+∞` if some vertex is infeasible.
    pub value: f64,
    /// `Q(η, b*)`.
    pub recourse: f64,
    pub rho: f64,
    /// Attaining flows, extensive-form column order. Empty when infeasible.
    pub flows: Vec<f64>,
    pub lp_solves: usize,
}

impl WorstCaseEntry {
    pub fn is_feasible(&self) -> bool {
        self.value.is_finite()
    }
}

/// Resolves [`WorstCaseStrategy::Auto`] for a given number of uncertain pairs.
pub fn resolve_strategy(strategy: WorstCaseStrategy, active: usize, tol: &Tolerances) -> WorstCaseStrategy {
    match strategy {
        WorstCaseStrategy::Auto if active <= tol.enum_max_pairs => WorstCaseStrategy::PrimalEnum,
        WorstCaseStrategy::Auto => WorstCaseStrategy::Pruned,
        s => s,
    }
}

fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * 1f64.max(a.abs()).max(b.abs())
}

/// True if `(value, rho)` should replace the incumbent `(best_value, best_rho)`.
fn improves(value: f64, rho: f64, best: Option<(f64, f64)>) -> bool {
    match best {
        None => true,
        Some((bv, br)) => {
            if ties(value, bv) {
                rho < br && !ties(rho, br)
            } else {
                value > bv
            }
        }
    }
}

/// Shared inputs of one inner maximisation.
pub struct InnerProblem<'a> {
    pub recourse: &'a Recourse,
    pub b_ref: &'a [f64],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
    pub beta: f64,
    /// Pairs whose demand box is not pinned at zero.
    pub active: &'a [usize],
}

impl InnerProblem<'_> {
    fn pattern_demand(&self, p: &VertexPattern) -> Vec<f64> {
        p.demand(self.b_ref, self.lower, self.upper)
    }

    fn rho(&self, b: &[f64]) -> f64 {
        wasserstein_penalty(b, self.b_ref).expect("pattern demand has instance length")
    }

    fn finish(&self, sample: usize, pattern: VertexPattern, lp_solves: usize) -> WorstCaseEntry {
        let b = self.pattern_demand(&pattern);
        let rho = self.rho(&b);
        let s = self.recourse.solve(&b);
        let (value, recourse) = if s.is_feasible() {
            (s.value - self.beta * rho, s.value)
        } else {
            (f64::INFINITY, f64::INFINITY)
        };
        WorstCaseEntry {
            sample,
            b_star: b,
            pattern,
            value,
            recourse,
            rho,
            flows: s.flows,
            lp_solves: lp_solves + 1,
        }
    }

    fn infeasible(&self, sample: usize, pattern: VertexPattern, lp_solves: usize) -> WorstCaseEntry {
        let b = self.pattern_demand(&pattern);
        let rho = self.rho(&b);
        WorstCaseEntry {
            sample,
            b_star: b,
            pattern,
            value: f64::INFINITY,
            recourse: f64::INFINITY,
            rho,
            flows: Vec::new(),
            lp_solves,
        }
    }

    fn count(&self) -> usize {
        3usize.pow(self.active.len() as u32)
    }

    fn primal_enum(&self, sample: usize, exec: ExecPolicy) -> WorstCaseEntry {
        let k = self.b_ref.len();
        let evals = exec.map_range(self.count(), |idx| {
            let pat = VertexPattern::from_index(k, self.active, idx);
            let b = self.pattern_demand(&pat);
            let s = self.recourse.solve(&b);
            (s.is_feasible(), s.value, self.rho(&b))
        });
        self.pick(sample, k, &evals)
    }

    fn dual_enum(&self, sample: usize, exec: ExecPolicy) -> WorstCaseEntry {
        let k = self.b_ref.len();
        let evals = exec.map_range(self.count(), |idx| {
            let pat = VertexPattern::from_index(k, self.active, idx);
            let b = self.pattern_demand(&pat);
            let (feasible, q) = dual_recourse_value(self.recourse, &b);
            (feasible, q, self.rho(&b))
        });
        self.pick(sample, k, &evals)
    }

    fn pick(&self, sample: usize, k: usize, evals: &[(bool, f64, f64)]) -> WorstCaseEntry {
        if let Some(idx) = evals.iter().position(|e| !e.0) {
            let pat = VertexPattern::from_index(k, self.active, idx);
            return self.infeasible(sample, pat, evals.len());
        }
        let mut best: Option<(f64, f64)> = None;
        let mut best_idx = 0;
        for (idx, &(_, q, rho)) in evals.iter().enumerate() {
            let value = q - self.beta * rho;
            if improves(value, rho, best) {
                best = Some((value, rho));
                best_idx = idx;
            }
        }
        let pat = VertexPattern::from_index(k, self.active, best_idx);
        self.finish(sample, pat, evals.len())
    }

    /// Branch and bound over {sample, upper} states. Lower-bound states are
    /// never better: the recourse value is nondecreasing in demand and moving
    /// away from the sample only adds penalty.
    fn pruned(&self, sample: usize) -> WorstCaseEntry {
        let k = self.b_ref.len();
        let mut memo: HashMap<VertexPattern, Option<f64>> = HashMap::new();
        let mut solves = 0usize;
        let mut q_of = |pat: &VertexPattern, memo: &mut HashMap<VertexPattern, Option<f64>>| {
            if let Some(v) = memo.get(pat) {
                return *v;
            }
            let s = self.recourse.solve(&self.pattern_demand(pat));
            solves += 1;
            let v = s.is_feasible().then_some(s.value);
            memo.insert(pat.clone(), v);
            v
        };
        let with_rest_plus = |prefix: &[VertexState]| {
            let mut states = vec![VertexState::Zero; k];
            for (i, &p) in self.active.iter().enumerate() {
                states[p] = prefix.get(i).copied().unwrap_or(VertexState::Plus);
            }
            VertexPattern(states)
        };

        if q_of(&with_rest_plus(&[]), &mut memo).is_none() {
            // Find the lexicographically first infeasible vertex.
            let mut prefix: Vec<VertexState> = Vec::new();
            loop {
                if prefix.len() == self.active.len() {
                    let pat = with_rest_plus(&prefix);
                    drop(q_of);
                    return self.infeasible(sample, pat, solves);
                }
                prefix.push(VertexState::Zero);
                if q_of(&with_rest_plus(&prefix), &mut memo).is_some() {
                    *prefix.last_mut().expect("just pushed") = VertexState::Plus;
                }
            }
        }

        let mut best: Option<(f64, f64)> = None;
        let mut best_pat = VertexPattern::zero(k);
        let mut stack: Vec<Vec<VertexState>> = vec![Vec::new()];
        while let Some(prefix) = stack.pop() {
            let pat = with_rest_plus(&prefix);
            let q = q_of(&pat, &mut memo).expect("dominated by the feasible all-upper vertex");
            if prefix.len() == self.active.len() {
                let rho = self.rho(&self.pattern_demand(&pat));
                let value = q - self.beta * rho;
                if improves(value, rho, best) {
                    best = Some((value, rho));
                    best_pat = pat;
                }
                continue;
            }
            let decided: Vec<VertexState> = prefix.clone();
            let mut partial = vec![VertexState::Zero; k];
            for (i, &p) in self.active.iter().enumerate().take(decided.len()) {
                partial[p] = decided[i];
            }
            let partial_rho = self.rho(&self.pattern_demand(&VertexPattern(partial)));
            let bound = q - self.beta * partial_rho;
            if let Some((bv, _)) = best {
                if bound < bv && !ties(bound, bv) {
                    continue;
                }
            }
            let mut plus = prefix.clone();
            plus.push(VertexState::Plus);
            let mut zero = prefix;
            zero.push(VertexState::Zero);
            stack.push(plus);
            stack.push(zero);
        }
        drop(q_of);
        self.finish(sample, best_pat, solves)
    }

    pub fn solve(&self, sample: usize, strategy: WorstCaseStrategy, tol: &Tolerances, exec: ExecPolicy) -> WorstCaseEntry {
        match resolve_strategy(strategy, self.active.len(), tol) {
            WorstCaseStrategy::PrimalEnum | WorstCaseStrategy::Auto => self.primal_enum(sample, exec),
            WorstCaseStrategy::DualEnum => self.dual_enum(sample, exec),
            WorstCaseStrategy::Pruned => self.pruned(sample),
        }
    }
}

/// `Q(η, b)` through the dual LP `max −μᵀB − λᵀE` over `C + Aᵀμ + Dᵀλ ≥ 0`,
/// `λ ≥ 0`. An unbounded dual means the primal is infeasible.
pub fn dual_recourse_value(recourse: &Recourse, b: &[f64]) -> (bool, f64) {
    let primal = recourse.lp(b);
    let n_eq = primal.eq_rows.len();
    let n_le = primal.le_rows.len();
    let n = primal.num_vars();
    let mut objective = primal.eq_rhs.clone();
    objective.extend_from_slice(&primal.le_rhs);
    let mut p = LpProblem::new(objective);
    for i in 0..n_eq {
        p.lower[i] = f64::NEG_INFINITY;
    }
    for c in 0..n {
        let mut row = Vec::with_capacity(n_eq + n_le);
        row.extend(primal.eq_rows.iter().map(|r| -r[c]));
        row.extend(primal.le_rows.iter().map(|r| -r[c]));
        p.add_le(row, primal.objective[c]);
    }
    let s = solve_lp(&p);
    match s.status {
        LpStatus::Optimal => (true, -s.objective),
        LpStatus::Unbounded => (false, f64::INFINITY),
        _ => (false, f64::NAN),
    }
}

/// Worst case for sample `sample` of `demand` under `design`.
#[allow(clippy::too_many_arguments)]
pub fn worst_case_sample(
    spec: &NetworkSpec,
    design: &Design,
    demand: &DemandModel,
    sample: usize,
    beta: f64,
    strategy: WorstCaseStrategy,
    battery: crate::extensive::BatteryRhsMode,
    tol: &Tolerances,
) -> WorstCaseEntry {
    let big_m = spec.effective_big_m(demand);
    let recourse = Recourse::new(spec, design, battery, big_m);
    let active: Vec<usize> = demand.active_pairs().iter().map(|k| k.0).collect();
    InnerProblem {
        recourse: &recourse,
        b_ref: &demand.samples[sample],
        lower: &demand.lower,
        upper: &demand.upper,
        beta,
        active: &active,
    }
    .solve(sample, strategy, tol, ExecPolicy::Sequential)
}

/// Worst cases for every sample, in sample order.
pub fn worst_case_all(
    recourse: &Recourse,
    demand: &DemandModel,
    beta: f64,
    strategy: WorstCaseStrategy,
    tol: &Tolerances,
    exec: ExecPolicy,
) -> Vec<WorstCaseEntry> {
    let active: Vec<usize> = demand.active_pairs().iter().map(|k| k.0).collect();
    exec.map_range(demand.num_samples(), |j| {
        InnerProblem {
            recourse,
            b_ref: &demand.samples[j],
            lower: &demand.lower,
            upper: &demand.upper,
            beta,
            active: &active,
        }
        .solve(j, strategy, tol, exec)
    })
}
