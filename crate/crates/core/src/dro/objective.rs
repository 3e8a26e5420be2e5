//! Objective evaluation for a fixed design: the penalised robust objective,
//! its sample-average counterpart and the search over the penalty multiplier.

use serde::{Deserialize, Serialize};

use super::second_stage::Recourse;
use super::worst_case::{worst_case_all, WorstCaseEntry};
use crate::model::{BetaMode, DemandModel, Design, DroConfig, InvestmentCost, NetworkSpec};

/// Objective split into its terms. The fields sum to the objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    /// Mean worst-case recourse cost.
    pub transport: f64,
    /// `−β` times the mean transport distance of the worst cases.
    pub penalty: f64,
    /// `θβ`.
    pub radius: f64,
    pub channel: f64,
    pub infrastructure: f64,
    pub capacity: f64,
}

impl ObjectiveBreakdown {
    pub fn total(&self) -> f64 {
        self.transport + self.penalty + self.radius + self.channel + self.infrastructure + self.capacity
    }

    fn with_investment(mut self, inv: InvestmentCost) -> Self {
        self.channel = inv.channel;
        self.infrastructure = inv.infrastructure;
        self.capacity = inv.capacity;
        self
    }
}

/// A design scored under the robust objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub objective: f64,
    pub beta: f64,
    pub breakdown: ObjectiveBreakdown,
    pub worst_case: Vec<WorstCaseEntry>,
    pub lp_solves: usize,
}

impl Evaluation {
    pub fn is_feasible(&self) -> bool {
        self.objective.is_finite()
    }
}

/// Penalty multiplier above which every worst case sits at its sample:
/// `‖C‖∞ · |A| · |K| + 1`.
pub fn beta_saturation(spec: &NetworkSpec) -> f64 {
    spec.max_transport_cost() * spec.num_arcs() as f64 * spec.num_pairs() as f64 + 1.0
}

fn evaluate_at_beta(
    spec: &NetworkSpec,
    demand: &DemandModel,
    design: &Design,
    recourse: &Recourse,
    config: &DroConfig,
    beta: f64,
) -> Evaluation {
    let wc = worst_case_all(recourse, demand, beta, config.strategy, &config.tolerances, config.exec);
    let lp_solves = wc.iter().map(|e| e.lp_solves).sum();
    let inv = design.investment(spec);
    if wc.iter().any(|e| !e.is_feasible()) {
        return Evaluation {
            objective: f64::INFINITY,
            beta,
            breakdown: ObjectiveBreakdown {
                transport: f64::INFINITY,
                ..Default::default()
            }
            .with_investment(inv),
            worst_case: wc,
            lp_solves,
        };
    }
    let n = wc.len() as f64;
    let varpi: f64 = wc.iter().map(|e| e.value).sum::<f64>() / n;
    let transport = wc.iter().map(|e| e.recourse).sum::<f64>() / n;
    let breakdown = ObjectiveBreakdown {
        transport,
        penalty: -beta * wc.iter().map(|e| e.rho).sum::<f64>() / n,
        radius: config.theta * beta,
        ..Default::default()
    }
    .with_investment(inv);
    Evaluation {
        objective: varpi + config.theta * beta + inv.total(),
        beta,
        breakdown,
        worst_case: wc,
        lp_solves,
    }
}

/// Robust objective of `design`: mean worst-case value, plus `θβ`, plus the
/// investment cost. In search mode the multiplier is optimised as well.
pub fn dro_objective(spec: &NetworkSpec, demand: &DemandModel, design: &Design, config: &DroConfig) -> Evaluation {
    let recourse = Recourse::new(spec, design, config.battery_rhs, spec.effective_big_m(demand));
    dro_objective_with(spec, demand, design, &recourse, config)
}

pub(crate) fn dro_objective_with(
    spec: &NetworkSpec,
    demand: &DemandModel,
    design: &Design,
    recourse: &Recourse,
    config: &DroConfig,
) -> Evaluation {
    match config.beta_mode {
        BetaMode::Fixed => evaluate_at_beta(spec, demand, design, recourse, config, config.beta),
        BetaMode::Search => {
            let f = |beta: f64| evaluate_at_beta(spec, demand, design, recourse, config, beta);
            search_beta(f, beta_saturation(spec))
        }
    }
}

/// Minimises a convex piecewise-linear function of `β` on `[0, β_max]`:
/// a log-spaced grid locates the bracket, golden-section search refines it.
fn search_beta<F: Fn(f64) -> Evaluation>(f: F, beta_max: f64) -> Evaluation {
    let mut grid = vec![0.0];
    let lo_exp = -3.0f64;
    let hi_exp = beta_max.log10();
    let steps = 24;
    for i in 0..=steps {
        grid.push(10f64.powf(lo_exp + (hi_exp - lo_exp) * i as f64 / steps as f64));
    }
    *grid.last_mut().expect("non-empty grid") = beta_max;
    let evals: Vec<Evaluation> = grid.iter().map(|&b| f(b)).collect();
    if !evals[0].is_feasible() {
        return evals.into_iter().next().expect("non-empty");
    }
    let mut best_i = 0;
    for (i, e) in evals.iter().enumerate() {
        if e.objective < evals[best_i].objective {
            best_i = i;
        }
    }
    let mut lp_solves: usize = evals.iter().map(|e| e.lp_solves).sum();
    let mut a = grid[best_i.saturating_sub(1)];
    let mut b = grid[(best_i + 1).min(grid.len() - 1)];
    let mut best = evals.into_iter().nth(best_i).expect("index in range");
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..60 {
        if (b - a) <= 1e-9 * b.max(1.0) {
            break;
        }
        if fc.objective <= fd.objective {
            b = d;
            d = c;
            lp_solves += fd.lp_solves;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            lp_solves += fc.lp_solves;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    for cand in [fc, fd] {
        lp_solves += cand.lp_solves;
        if cand.objective < best.objective {
            best = cand;
        }
    }
    best.lp_solves = lp_solves;
    best
}

/// Sample-average objective: mean recourse at the samples plus investment.
pub fn saa_objective(spec: &NetworkSpec, demand: &DemandModel, design: &Design, config: &DroConfig) -> Evaluation {
    let recourse = Recourse::new(spec, design, config.battery_rhs, spec.effective_big_m(demand));
    saa_objective_with(spec, demand, design, &recourse, config)
}

pub(crate) fn saa_objective_with(
    spec: &NetworkSpec,
    demand: &DemandModel,
    design: &Design,
    recourse: &Recourse,
    config: &DroConfig,
) -> Evaluation {
    let k = demand.num_pairs();
    let solves = config.exec.map(&demand.samples, |b| recourse.solve(b));
    let inv = design.investment(spec);
    let worst_case: Vec<WorstCaseEntry> = solves
        .into_iter()
        .enumerate()
        .map(|(j, s)| WorstCaseEntry {
            sample: j,
            b_star: demand.samples[j].clone(),
            pattern: super::penalty::VertexPattern::zero(k),
            value: s.value,
            recourse: s.value,
            rho: 0.0,
            flows: s.flows,
            lp_solves: 1,
        })
        .collect();
    let n = worst_case.len() as f64;
    let transport = worst_case.iter().map(|e| e.recourse).sum::<f64>() / n;
    let objective = if transport.is_finite() {
        transport + inv.total()
    } else {
        f64::INFINITY
    };
    Evaluation {
        objective,
        beta: 0.0,
        breakdown: ObjectiveBreakdown {
            transport,
            ..Default::default()
        }
        .with_investment(inv),
        lp_solves: worst_case.len(),
        worst_case,
    }
}

/// Cheap lower bound on the robust objective: the zero pattern is always a
/// candidate of the inner maximisation and `θβ ≥ 0`.
pub(crate) fn robust_lower_bound(
    spec: &NetworkSpec,
    demand: &DemandModel,
    design: &Design,
    recourse: &Recourse,
    config: &DroConfig,
) -> f64 {
    if !recourse.solve(&demand.upper).is_feasible() {
        return f64::INFINITY;
    }
    let saa = saa_objective_with(spec, demand, design, recourse, &DroConfig {
        exec: crate::par::ExecPolicy::Sequential,
        ..config.clone()
    });
    match config.beta_mode {
        BetaMode::Fixed => saa.objective + config.theta * config.beta,
        BetaMode::Search => saa.objective,
    }
}
