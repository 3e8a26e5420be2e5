//! Multiplier-based decomposition of the design problem.
//!
//! For dual-feasible multipliers `(μʲ, λʲ)` of every sample's second stage
//! and any demand vector `b`, weak duality gives
//! `Q(η, b) ≥ −μʲᵀB(b) − λʲᵀE(η, b)`. Averaging over samples and dropping the
//! coupling between airports and channels turns the design problem into
//! independent blocks:
//!
//! * channel counts per arc and type, priced at `Cd − λ̄₂ u` (open a channel
//!   exactly when that price is negative),
//! * airport indicators, enumerated jointly, with the airport and battery
//!   multipliers re-optimised for each choice by a small LP.
//!
//! The minimum over both blocks is a lower bound on the optimal objective.
//! The block minimisers are repaired into admissible designs and scored
//! exactly. Multipliers move towards the exact duals of the latest candidate
//! with step `s₀/√t`; since dual feasibility does not involve the design,
//! every iterate stays feasible. The flow multipliers `γʲ` take projected
//! steps against the reduced costs and steer the repair.

use std::collections::HashMap;
use std::time::Instant;

use super::enumeration::{select_best, DesignSpace};
use super::objective::{dro_objective_with, robust_lower_bound, Evaluation};
use super::second_stage::Recourse;
use super::worst_case::resolve_strategy;
use crate::extensive::RowId;
use crate::linprog::{solve_lp, LpProblem, LpStatus};
use crate::model::{BetaMode, DemandModel, Design, DroConfig, NetworkSpec};
use crate::report::{LagrangianDiagnostics, SolveError, SolveReport};

/// Channel counts minimising `Σ (Cd − λ̄₂ u) y` over the allowed arcs.
pub fn channel_block(spec: &NetworkSpec, allowed: &[bool], lambda2_bar: &[f64]) -> Vec<Vec<u32>> {
    spec.arcs
        .iter()
        .enumerate()
        .map(|(a, arc)| {
            arc.channels
                .iter()
                .map(|ch| {
                    if allowed[a] && ch.cost - lambda2_bar[a] * ch.capacity < 0.0 {
                        ch.max_count
                    } else {
                        0
                    }
                })
                .collect()
        })
        .collect()
}

/// Per-sample multiplier state.
#[derive(Clone, Debug)]
struct SampleState {
    mu: Vec<f64>,
    lambda: Vec<f64>,
    gamma: Vec<f64>,
    b_star: Vec<f64>,
    rho: f64,
}

/// Reduced costs `C + Aᵀμ + Dᵀλ`, optionally leaving out some inequality rows.
fn reduced_costs(recourse: &Recourse, mu: &[f64], lambda: &[f64], skip_rows: impl Fn(&RowId) -> bool) -> Vec<f64> {
    let f = recourse.form();
    let mut r = f.cost.clone();
    for (m, row) in mu.iter().zip(&f.a_eq) {
        if *m != 0.0 {
            r.iter_mut().zip(row).for_each(|(x, a)| *x += m * a);
        }
    }
    for ((l, row), id) in lambda.iter().zip(&f.d_ineq).zip(&f.ineq_rows) {
        if *l != 0.0 && !skip_rows(id) {
            r.iter_mut().zip(row).for_each(|(x, d)| *x += l * d);
        }
    }
    r
}

struct Context<'a> {
    spec: &'a NetworkSpec,
    demand: &'a DemandModel,
    config: &'a DroConfig,
    space: DesignSpace,
    big_m: f64,
    cache: HashMap<Design, Evaluation>,
    evaluations: usize,
}

impl Context<'_> {
    fn recourse(&self, d: &Design) -> Recourse {
        Recourse::new(self.spec, d, self.config.battery_rhs, self.big_m)
    }

    fn evaluate(&mut self, d: &Design) -> Evaluation {
        if let Some(e) = self.cache.get(d) {
            return e.clone();
        }
        let r = self.recourse(d);
        let e = dro_objective_with(self.spec, self.demand, d, &r, self.config);
        self.evaluations += 1;
        self.cache.insert(d.clone(), e.clone());
        e
    }

    fn admissible(&self, mut d: Design) -> Design {
        for (i, f) in self.space.forced_open.iter().enumerate() {
            d.open[i] |= *f;
        }
        for (a, ys) in d.channels.iter_mut().enumerate() {
            if !self.space.relevant_arcs[a] {
                ys.iter_mut().for_each(|y| *y = 0);
            }
        }
        d.normalized(self.spec)
    }

    /// Opens the endpoints of every arc with channels.
    fn open_endpoints(&self, mut d: Design) -> Design {
        for (a, arc) in self.spec.arcs.iter().enumerate() {
            if d.has_channels(crate::model::ArcId(a)) {
                d.open[arc.tail.0] = true;
                d.open[arc.head.0] = true;
            }
        }
        self.admissible(d)
    }

    fn full_design(&self) -> Design {
        let mut d = Design::full(self.spec);
        for (i, f) in self.space.forced_open.iter().enumerate() {
            d.open[i] = *f || self.space.free_nodes.contains(&i);
        }
        self.admissible(d)
    }

    /// Exact duals of every sample's second stage at its worst-case demand.
    fn exact_duals(&self, d: &Design, eval: &Evaluation) -> Option<Vec<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64)>> {
        if !eval.is_feasible() {
            return None;
        }
        let r = self.recourse(d);
        let out = self.config.exec.map(&eval.worst_case, |e| {
            let s = r.solve_with_duals(&e.b_star);
            (s.mu, s.lambda, s.flows, e.b_star.clone(), e.rho)
        });
        out.iter().all(|o| !o.0.is_empty()).then_some(out)
    }

    /// Best lower bound over airport choices for the current multipliers.
    /// Returns `(bound, open vector)`.
    fn airport_block(&self, states: &[SampleState], recourse: &Recourse) -> (f64, Vec<bool>) {
        let spec = self.spec;
        let f = recourse.form();
        let n = states.len() as f64;
        let node_rows: Vec<usize> = (0..f.ineq_rows.len())
            .filter(|&r| matches!(f.ineq_rows[r], RowId::Airport { .. }))
            .collect();
        let battery_rows: Vec<usize> = (0..f.ineq_rows.len())
            .filter(|&r| matches!(f.ineq_rows[r], RowId::Battery { .. }))
            .collect();
        // Reduced costs with the airport and battery rows left out.
        let partial: Vec<Vec<f64>> = states
            .iter()
            .map(|s| {
                reduced_costs(recourse, &s.mu, &s.lambda, |id| {
                    matches!(id, RowId::Airport { .. } | RowId::Battery { .. })
                })
            })
            .collect();
        let free = &self.space.free_nodes;
        let masks: Vec<u64> = (0..(1u64 << free.len())).collect();
        let values = self.config.exec.map(&masks, |&mask| {
            let mut open = self.space.forced_open.clone();
            for (bit, &i) in free.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    open[i] = true;
                }
            }
            let mut design = Design::empty(spec);
            design.open = open.clone();
            let open_count = self.config.battery_rhs.open_count(spec, &design);
            let mut fixed = 0.0;
            for (i, node) in spec.nodes.iter().enumerate() {
                if open[i] {
                    fixed += node.infrastructure_cost + node.capacity_unit_cost * node.airport_capacity;
                }
            }
            let e1: Vec<f64> = spec
                .nodes
                .iter()
                .enumerate()
                .map(|(i, node)| if open[i] { node.airport_capacity } else { self.big_m })
                .collect();
            let mut total = 0.0;
            for (s, r) in states.iter().zip(&partial) {
                let e3: Vec<f64> = (0..spec.num_pairs())
                    .map(|k| s.b_star[k] * spec.battery_boost * open_count)
                    .collect();
                // min Σ λ1 E1 + Σ λ3 E3 s.t. D1ᵀλ1 + D3ᵀλ3 ≥ −r, λ ≥ 0.
                let mut objective = e1.clone();
                objective.extend_from_slice(&e3);
                let mut p = LpProblem::new(objective);
                for (c, &rc) in r.iter().enumerate() {
                    if rc >= 0.0 {
                        continue;
                    }
                    let mut row: Vec<f64> = node_rows.iter().map(|&q| f.d_ineq[q][c]).collect();
                    row.extend(battery_rows.iter().map(|&q| f.d_ineq[q][c]));
                    p.add_ge(row, -rc);
                }
                let sol = solve_lp(&p);
                total += match sol.status {
                    LpStatus::Optimal => sol.objective,
                    _ => f64::INFINITY,
                };
            }
            fixed - total / n
        });
        let mut best = 0;
        for (m, v) in values.iter().enumerate() {
            if *v < values[best] - 1e-9 * values[best].abs().max(1.0) {
                best = m;
            }
        }
        let mut open = self.space.forced_open.clone();
        for (bit, &i) in free.iter().enumerate() {
            if masks[best] >> bit & 1 == 1 {
                open[i] = true;
            }
        }
        (values[best], open)
    }
}

fn dual_violation(recourse: &Recourse, states: &[SampleState]) -> f64 {
    states
        .iter()
        .map(|s| {
            reduced_costs(recourse, &s.mu, &s.lambda, |_| false)
                .iter()
                .fold(0.0f64, |m, v| m.max(-v))
        })
        .fold(0.0, f64::max)
}

/// Design by the multiplier method, finished by an exact local search.
pub fn solve_lagrangian(spec: &NetworkSpec, demand: &DemandModel, config: &DroConfig) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    if config.beta_mode != BetaMode::Fixed {
        return Err(SolveError::Unsupported("the multiplier method needs a fixed beta".into()));
    }
    let settings = config.lagrangian;
    let mut ctx = Context {
        spec,
        demand,
        config,
        space: DesignSpace::new(spec, demand),
        big_m: spec.effective_big_m(demand),
        cache: HashMap::new(),
        evaluations: 0,
    };
    let n = demand.num_samples() as f64;

    // The full design is the most capable one: if it is robustly infeasible,
    // so is every other.
    let full = ctx.full_design();
    let full_eval = ctx.evaluate(&full);
    let Some(init) = ctx.exact_duals(&full, &full_eval) else {
        return Err(SolveError::RobustlyInfeasible);
    };
    let mut states: Vec<SampleState> = init
        .into_iter()
        .map(|(mu, lambda, flows, b_star, rho)| SampleState {
            mu,
            lambda,
            gamma: flows,
            b_star,
            rho,
        })
        .collect();
    let mut incumbent = (full.clone(), full_eval.objective);
    let structure = ctx.recourse(&full);
    let f = structure.form();
    let arc_rows: Vec<usize> = (0..f.ineq_rows.len())
        .filter(|&r| matches!(f.ineq_rows[r], RowId::ChannelCapacity { .. }))
        .collect();

    let mut best_bound = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    for t in 1..=settings.max_iter {
        iterations = t;
        let step = (settings.step0 / (t as f64).sqrt()).min(1.0);

        // Channel block.
        let mut lambda2_bar = vec![0.0; spec.num_arcs()];
        for s in &states {
            for (a, &row) in arc_rows.iter().enumerate() {
                lambda2_bar[a] += s.lambda[row] / n;
            }
        }
        let channels = channel_block(spec, &ctx.space.relevant_arcs, &lambda2_bar);
        let mut y_part = 0.0;
        for (a, arc) in spec.arcs.iter().enumerate() {
            for (ch, &y) in arc.channels.iter().zip(&channels[a]) {
                y_part += (ch.cost - lambda2_bar[a] * ch.capacity) * f64::from(y);
            }
        }

        // Airport block.
        let (z_part, open) = ctx.airport_block(&states, &structure);

        // Constant part: −μᵀB(b) − βρ.
        let mut constant = config.theta * config.beta;
        for s in &states {
            let mut v = -config.beta * s.rho;
            for (m, id) in s.mu.iter().zip(&f.eq_rows) {
                match *id {
                    RowId::Origin { pair } => v -= m * s.b_star[pair.0],
                    RowId::Destination { pair } => v += m * s.b_star[pair.0],
                    _ => {}
                }
            }
            constant += v / n;
        }
        let bound = constant + y_part + z_part;
        if bound.is_finite() {
            best_bound = best_bound.max(bound);
        }

        // Candidates.
        let block = Design {
            open: open.clone(),
            channels: channels.clone(),
        };
        let mut candidates = vec![ctx.admissible(block.clone()), ctx.open_endpoints(block.clone())];
        let mut with_flow = block;
        for s in &states {
            for (c, &g) in s.gamma.iter().enumerate() {
                if g > 1e-6 {
                    let a = f.columns[c].1 .0;
                    if ctx.space.relevant_arcs[a] {
                        for (y, ch) in with_flow.channels[a].iter_mut().zip(&spec.arcs[a].channels) {
                            *y = (*y).max(ch.max_count.min(1));
                        }
                    }
                }
            }
        }
        candidates.push(ctx.open_endpoints(with_flow));
        candidates.dedup();
        let mut round_best: Option<(Design, Evaluation)> = None;
        for c in candidates {
            let e = ctx.evaluate(&c);
            let better = match &round_best {
                None => true,
                Some((_, be)) => e.objective < be.objective,
            };
            if better {
                round_best = Some((c, e));
            }
        }
        let (cand, cand_eval) = round_best.expect("at least one candidate");
        if let Some((d, v)) = select_best(spec, [(&incumbent.0, incumbent.1), (&cand, cand_eval.objective)]) {
            incumbent = (d.clone(), v);
        }

        // Multiplier step towards the candidate's exact duals, or the
        // incumbent's when the candidate is infeasible.
        let target = match ctx.exact_duals(&cand, &cand_eval) {
            Some(t) => t,
            None => {
                let inc = incumbent.0.clone();
                let e = ctx.evaluate(&inc);
                ctx.exact_duals(&inc, &e).expect("incumbent is feasible")
            }
        };
        let mut change: f64 = 0.0;
        let mut scale: f64 = 1.0;
        for (s, (mu, lambda, _flows, b_star, rho)) in states.iter_mut().zip(target) {
            for (old, new) in s.mu.iter_mut().zip(&mu) {
                let next = (1.0 - step) * *old + step * new;
                change = change.max((next - *old).abs());
                scale = scale.max(next.abs());
                *old = next;
            }
            for (old, new) in s.lambda.iter_mut().zip(&lambda) {
                let next = ((1.0 - step) * *old + step * new).max(0.0);
                change = change.max((next - *old).abs());
                scale = scale.max(next);
                *old = next;
            }
            s.b_star = b_star;
            s.rho = rho;
        }
        for s in states.iter_mut() {
            let g = reduced_costs(&structure, &s.mu, &s.lambda, |_| false);
            for (gam, gc) in s.gamma.iter_mut().zip(&g) {
                *gam = (*gam - step * gc).max(0.0);
            }
        }
        let violation = dual_violation(&structure, &states);
        if t > 1 && violation <= settings.tol_violation && change <= settings.tol_violation * scale {
            converged = true;
            break;
        }
    }
    let violation = dual_violation(&structure, &states);
    let loop_value = incumbent.1;

    // Exact local search around the incumbent, restarted from perturbed
    // designs that open a free node together with its arcs.
    let mut polish_moves = 0;
    if settings.polish {
        let (d, v, m) = descend(&mut ctx, incumbent);
        incumbent = (d, v);
        polish_moves += m;
        'kicks: loop {
            for kick in kicks(spec, &ctx.space, &incumbent.0) {
                let e = ctx.evaluate(&kick);
                if !e.is_feasible() {
                    continue;
                }
                let (d, v, m) = descend(&mut ctx, (kick, e.objective));
                if v < incumbent.1 - 1e-9 * incumbent.1.abs().max(1.0) {
                    incumbent = (d, v);
                    polish_moves += m + 1;
                    continue 'kicks;
                }
            }
            break;
        }
    }

    let design = incumbent.0.clone();
    let eval = ctx.evaluate(&design);
    if !eval.is_feasible() {
        return Err(SolveError::RobustlyInfeasible);
    }
    let gap = (eval.objective - best_bound) / eval.objective.abs().max(1.0);
    let candidates_evaluated = ctx.evaluations;
    let mut report = SolveReport::from_evaluation(config.mode, config.theta, design, eval, spec);
    report.diagnostics.lattice_size = ctx.space.size(spec);
    report.diagnostics.designs_evaluated = candidates_evaluated;
    report.diagnostics.strategy = Some(resolve_strategy(
        config.strategy,
        demand.active_pairs().len(),
        &config.tolerances,
    ));
    report.diagnostics.lagrangian = Some(LagrangianDiagnostics {
        iterations,
        converged,
        dual_violation: violation,
        lagrangian_value: best_bound,
        loop_incumbent_value: loop_value,
        incumbent_value: report.objective,
        relative_gap: gap,
        candidates_evaluated,
        polish_moves,
    });
    report.diagnostics.elapsed_ms = start.elapsed().as_millis();
    Ok(report)
}

/// Greedy descent: moves to the best-bounded improving neighbour until none
/// improves. Returns the local optimum and the number of moves taken.
fn descend(ctx: &mut Context<'_>, mut current: (Design, f64)) -> (Design, f64, usize) {
    let (spec, demand, config) = (ctx.spec, ctx.demand, ctx.config);
    let mut moves = 0;
    loop {
        let neighbours = neighbourhood(spec, &ctx.space, &current.0);
        let big_m = ctx.big_m;
        let bounds = config.exec.map(&neighbours, |d| {
            let r = Recourse::new(spec, d, config.battery_rhs, big_m);
            robust_lower_bound(spec, demand, d, &r, config)
        });
        let mut order: Vec<usize> = (0..neighbours.len()).collect();
        order.sort_by(|&a, &b| bounds[a].total_cmp(&bounds[b]).then(a.cmp(&b)));
        let mut improved = false;
        for i in order {
            let cutoff = current.1 + 1e-9 * current.1.abs().max(1.0);
            if bounds[i] > cutoff {
                break;
            }
            let e = ctx.evaluate(&neighbours[i]);
            if let Some((d, v)) = select_best(spec, [(&current.0, current.1), (&neighbours[i], e.objective)]) {
                if *d != current.0 {
                    current = (d.clone(), v);
                    moves += 1;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            return (current.0, current.1, moves);
        }
    }
}

/// Restart points for the descent: each closed free node opened with a
/// channel on every relevant arc joining it to an open node, alone and
/// combined with closing one currently open free node.
fn kicks(spec: &NetworkSpec, space: &DesignSpace, d: &Design) -> Vec<Design> {
    let mut out: Vec<Design> = Vec::new();
    for &j in &space.free_nodes {
        if d.open[j] {
            continue;
        }
        let mut bases = vec![d.clone()];
        for &i in &space.free_nodes {
            if d.open[i] {
                let mut c = d.clone();
                c.open[i] = false;
                bases.push(c.normalized(spec));
            }
        }
        for mut c in bases {
            c.open[j] = true;
            for (a, arc) in spec.arcs.iter().enumerate() {
                let other = if arc.tail.0 == j {
                    arc.head.0
                } else if arc.head.0 == j {
                    arc.tail.0
                } else {
                    continue;
                };
                if space.relevant_arcs[a] && c.open[other] {
                    for (y, ch) in c.channels[a].iter_mut().zip(&arc.channels) {
                        *y = (*y).max(ch.max_count.min(1));
                    }
                }
            }
            if c.is_consistent(spec) && !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out
}

/// Designs one move away: add or drop one arc's channels, open a free node,
/// or close one (dropping its channels). Moves that open a node also try
/// every single in-arc plus out-arc through it.
fn neighbourhood(spec: &NetworkSpec, space: &DesignSpace, d: &Design) -> Vec<Design> {
    let mut out = Vec::new();
    let push = |out: &mut Vec<Design>, c: Design| {
        if c != *d && c.is_consistent(spec) && !out.contains(&c) {
            out.push(c);
        }
    };
    for (a, arc) in spec.arcs.iter().enumerate() {
        if !space.relevant_arcs[a] || !(d.open[arc.tail.0] && d.open[arc.head.0]) {
            continue;
        }
        for (t, ch) in arc.channels.iter().enumerate() {
            let y = d.channels[a][t];
            if y < ch.max_count {
                let mut c = d.clone();
                c.channels[a][t] = y + 1;
                push(&mut out, c);
            }
            if y > 0 {
                let mut c = d.clone();
                c.channels[a][t] = y - 1;
                push(&mut out, c);
            }
        }
    }
    for &i in &space.free_nodes {
        let mut c = d.clone();
        if d.open[i] {
            c.open[i] = false;
            push(&mut out, c.normalized(spec));
        } else {
            c.open[i] = true;
            push(&mut out, c.clone());
            let ins: Vec<usize> = (0..spec.num_arcs())
                .filter(|&a| space.relevant_arcs[a] && spec.arcs[a].head.0 == i && c.open[spec.arcs[a].tail.0])
                .collect();
            let outs: Vec<usize> = (0..spec.num_arcs())
                .filter(|&a| space.relevant_arcs[a] && spec.arcs[a].tail.0 == i && c.open[spec.arcs[a].head.0])
                .collect();
            for &ai in &ins {
                for &ao in &outs {
                    let mut e = c.clone();
                    e.channels[ai].iter_mut().for_each(|y| *y = (*y).max(1));
                    e.channels[ao].iter_mut().for_each(|y| *y = (*y).max(1));
                    push(&mut out, e);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::single_arc;
    use proptest::prelude::*;

    #[test]
    fn free_channel_with_positive_price_opens() {
        let (mut spec, _) = single_arc(2.0, 10.0, 5.0);
        spec.arcs[0].channels[0].cost = 0.0;
        assert_eq!(channel_block(&spec, &[true], &[0.5]), vec![vec![1]]);
        assert_eq!(channel_block(&spec, &[true], &[0.0]), vec![vec![0]]);
        assert_eq!(channel_block(&spec, &[false], &[0.5]), vec![vec![0]]);
    }

    #[test]
    fn single_arc_instance_matches_enumeration() {
        let (spec, demand) = single_arc(2.0, 100.0, 10.0);
        let config = DroConfig::default().with_theta_beta(1.0, 5.0);
        let lag = solve_lagrangian(&spec, &demand, &config).unwrap();
        let en = super::super::solve_enumeration(&spec, &demand, &config).unwrap();
        assert_eq!(lag.design, en.design);
        let diag = lag.diagnostics.lagrangian.unwrap();
        assert!(diag.lagrangian_value <= en.objective + 1e-6);
    }

    proptest! {
        #[test]
        fn channel_rule_matches_brute_force(
            cost in 0.0f64..100.0,
            cap in 0.1f64..50.0,
            lambda in 0.0f64..10.0,
        ) {
            let (mut spec, _) = single_arc(1.0, cap, 1.0);
            spec.arcs[0].channels[0].cost = cost;
            let y = channel_block(&spec, &[true], &[lambda])[0][0];
            let value = |y: u32| (cost - lambda * cap) * f64::from(y);
            let brute = if value(1) < value(0) { 1 } else { 0 };
            prop_assert_eq!(y, brute);
        }
    }
}
