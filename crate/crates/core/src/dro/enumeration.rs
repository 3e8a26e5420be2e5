//! Exhaustive search over the candidate design lattice.
//!
//! The lattice only contains designs that can pass the airport post-check:
//! endpoints of every uncertain pair are open, and channels are only built
//! between open airports. Arcs that lie on no origin-to-destination route are
//! never built. Designs are first ranked by a cheap lower bound and then
//! evaluated exactly in that order until no remaining bound can beat the
//! incumbent.

use std::time::Instant;

use super::objective::{dro_objective_with, robust_lower_bound, saa_objective_with, Evaluation};
use super::second_stage::Recourse;
use super::worst_case::resolve_strategy;
use crate::model::{DemandModel, Design, DroConfig, NetworkSpec, SolveMode};
use crate::report::{SolveError, SolveReport};

/// The set of designs the enumeration walks.
#[derive(Clone, Debug, PartialEq)]
pub struct DesignSpace {
    pub forced_open: Vec<bool>,
    pub free_nodes: Vec<usize>,
    /// Arcs that may carry useful flow for some uncertain pair.
    pub relevant_arcs: Vec<bool>,
}

fn reachable(spec: &NetworkSpec, from: usize, forward: bool) -> Vec<bool> {
    let mut seen = vec![false; spec.num_nodes()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(v) = stack.pop() {
        for arc in &spec.arcs {
            let (a, b) = if forward { (arc.tail.0, arc.head.0) } else { (arc.head.0, arc.tail.0) };
            if a == v && !seen[b] {
                seen[b] = true;
                stack.push(b);
            }
        }
    }
    seen
}

impl DesignSpace {
    pub fn new(spec: &NetworkSpec, demand: &DemandModel) -> Self {
        let mut forced_open = vec![false; spec.num_nodes()];
        let mut relevant_arcs = vec![false; spec.num_arcs()];
        for k in demand.active_pairs() {
            let pair = &spec.od_pairs[k.0];
            forced_open[pair.origin.0] = true;
            forced_open[pair.destination.0] = true;
            let from_origin = reachable(spec, pair.origin.0, true);
            let to_dest = reachable(spec, pair.destination.0, false);
            for (a, arc) in spec.arcs.iter().enumerate() {
                if arc.head != pair.origin
                    && arc.tail != pair.destination
                    && from_origin[arc.tail.0]
                    && to_dest[arc.head.0]
                {
                    relevant_arcs[a] = true;
                }
            }
        }
        // Every other node stays free even when no useful arc touches it:
        // opening it still raises the battery budget.
        let free_nodes = (0..spec.num_nodes()).filter(|&i| !forced_open[i]).collect();
        DesignSpace {
            forced_open,
            free_nodes,
            relevant_arcs,
        }
    }

    fn open_for(&self, mask: u64) -> Vec<bool> {
        let mut open = self.forced_open.clone();
        for (bit, &i) in self.free_nodes.iter().enumerate() {
            if mask >> bit & 1 == 1 {
                open[i] = true;
            }
        }
        open
    }

    /// `(arc, type, max)` slots that can hold channels when `open` is open.
    fn slots(&self, spec: &NetworkSpec, open: &[bool]) -> Vec<(usize, usize, u32)> {
        let mut out = Vec::new();
        for (a, arc) in spec.arcs.iter().enumerate() {
            if self.relevant_arcs[a] && open[arc.tail.0] && open[arc.head.0] {
                for (t, ch) in arc.channels.iter().enumerate() {
                    out.push((a, t, ch.max_count));
                }
            }
        }
        out
    }

    /// Number of designs, as a float so astronomically large lattices can
    /// still be reported.
    pub fn size(&self, spec: &NetworkSpec) -> f64 {
        if self.free_nodes.len() > 40 {
            return f64::INFINITY;
        }
        let mut total = 0.0;
        for mask in 0..(1u64 << self.free_nodes.len()) {
            let open = self.open_for(mask);
            total += self
                .slots(spec, &open)
                .iter()
                .map(|&(_, _, m)| f64::from(m) + 1.0)
                .product::<f64>();
        }
        total
    }

    /// Every design in the lattice.
    pub fn designs(&self, spec: &NetworkSpec) -> Vec<Design> {
        let mut out = Vec::new();
        for mask in 0..(1u64 << self.free_nodes.len()) {
            let open = self.open_for(mask);
            let slots = self.slots(spec, &open);
            let mut counter = vec![0u32; slots.len()];
            loop {
                let mut d = Design::empty(spec);
                d.open = open.clone();
                for (&(a, t, _), &c) in slots.iter().zip(&counter) {
                    d.channels[a][t] = c;
                }
                out.push(d);
                let mut pos = 0;
                loop {
                    if pos == slots.len() {
                        break;
                    }
                    if counter[pos] < slots[pos].2 {
                        counter[pos] += 1;
                        break;
                    }
                    counter[pos] = 0;
                    pos += 1;
                }
                if pos == slots.len() {
                    break;
                }
            }
        }
        out
    }
}

/// Picks the winner among scored designs: lowest objective, then lowest
/// investment among designs tied with it, then the lexicographically smallest.
pub(crate) fn select_best<'a>(
    spec: &NetworkSpec,
    scored: impl IntoIterator<Item = (&'a Design, f64)>,
) -> Option<(&'a Design, f64)> {
    let scored: Vec<(&Design, f64)> = scored.into_iter().collect();
    let best = scored.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);
    if !best.is_finite() {
        return None;
    }
    let tol = 1e-9 * best.abs().max(1.0);
    scored
        .into_iter()
        .filter(|s| s.1 <= best + tol)
        .min_by(|a, b| {
            a.0.investment(spec)
                .total()
                .total_cmp(&b.0.investment(spec).total())
                .then_with(|| a.0.cmp(b.0))
        })
}

/// How a candidate design is scored.
pub(crate) fn score(spec: &NetworkSpec, demand: &DemandModel, design: &Design, config: &DroConfig) -> Evaluation {
    let recourse = Recourse::new(spec, design, config.battery_rhs, spec.effective_big_m(demand));
    match config.mode {
        SolveMode::Saa | SolveMode::Deterministic => saa_objective_with(spec, demand, design, &recourse, config),
        _ => dro_objective_with(spec, demand, design, &recourse, config),
    }
}

/// Globally optimal design over the lattice.
///
/// In [`SolveMode::Saa`] and [`SolveMode::Deterministic`] the sample-average
/// objective is minimised instead of the robust one.
pub fn solve_enumeration(spec: &NetworkSpec, demand: &DemandModel, config: &DroConfig) -> Result<SolveReport, SolveError> {
    let start = Instant::now();
    let space = DesignSpace::new(spec, demand);
    let size = space.size(spec);
    if size > config.lattice_cap as f64 {
        return Err(SolveError::LatticeTooLarge {
            count: size,
            cap: config.lattice_cap,
        });
    }
    let designs = space.designs(spec);
    let robust = !matches!(config.mode, SolveMode::Saa | SolveMode::Deterministic);

    let bounds: Vec<f64> = config.exec.map(&designs, |d| {
        let recourse = Recourse::new(spec, d, config.battery_rhs, spec.effective_big_m(demand));
        if robust {
            robust_lower_bound(spec, demand, d, &recourse, config)
        } else {
            let mut seq = config.clone();
            seq.exec = crate::par::ExecPolicy::Sequential;
            saa_objective_with(spec, demand, d, &recourse, &seq).objective
        }
    });
    let investments: Vec<f64> = designs.iter().map(|d| d.investment(spec).total()).collect();
    let mut order: Vec<usize> = (0..designs.len()).filter(|&i| bounds[i].is_finite()).collect();
    order.sort_by(|&a, &b| {
        bounds[a]
            .total_cmp(&bounds[b])
            .then(investments[a].total_cmp(&investments[b]))
            .then_with(|| designs[a].cmp(&designs[b]))
    });

    let chunk = if config.exec.is_parallel() {
        2 * std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        1
    };
    let mut evaluated: Vec<(usize, Evaluation)> = Vec::new();
    let mut best = f64::INFINITY;
    let mut pos = 0;
    while pos < order.len() {
        let cutoff = best + 1e-9 * best.abs().max(1.0);
        if bounds[order[pos]] > cutoff {
            break;
        }
        let end = (pos + chunk).min(order.len());
        let batch: Vec<usize> = order[pos..end]
            .iter()
            .copied()
            .filter(|&i| bounds[i] <= cutoff)
            .collect();
        let evals = config.exec.map(&batch, |&i| score(spec, demand, &designs[i], config));
        for (i, e) in batch.into_iter().zip(evals) {
            best = best.min(e.objective);
            evaluated.push((i, e));
        }
        pos = end;
    }

    let winner = select_best(spec, evaluated.iter().map(|(i, e)| (&designs[*i], e.objective)))
        .map(|(d, _)| d.clone())
        .ok_or(SolveError::RobustlyInfeasible)?;
    let (_, eval) = evaluated
        .into_iter()
        .find(|(i, _)| designs[*i] == winner)
        .expect("winner was evaluated");
    let designs_evaluated = order.len().min(pos);
    let mut report = SolveReport::from_evaluation(config.mode, config.theta, winner, eval, spec);
    report.diagnostics.lattice_size = size;
    report.diagnostics.designs_bounded = designs.len();
    report.diagnostics.designs_evaluated = designs_evaluated;
    report.diagnostics.strategy = robust.then(|| {
        resolve_strategy(config.strategy, demand.active_pairs().len(), &config.tolerances)
    });
    report.diagnostics.elapsed_ms = start.elapsed().as_millis();
    Ok(report)
}
