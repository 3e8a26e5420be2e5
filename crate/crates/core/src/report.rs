//! Solver output shared by every solve path.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dro::objective::{Evaluation, ObjectiveBreakdown};
use crate::dro::worst_case::WorstCaseEntry;
use crate::model::{Design, Diagnostic, NetworkSpec, NodeId, SolveMode, WorstCaseStrategy};

#[derive(Debug, Error, PartialEq)]
pub enum SolveError {
    #[error("design lattice has {count} designs, above the cap of {cap}")]
    LatticeTooLarge { count: f64, cap: u64 },
    #[error("no candidate design serves every demand vector in the box")]
    RobustlyInfeasible,
    #[error("instance failed validation with {} diagnostic(s)", .0.len())]
    Invalid(Vec<Diagnostic>),
    #[error("{0}")]
    Unsupported(String),
}

/// Whether flows only use open airports.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PostCheck {
    pub passed: bool,
    /// Closed nodes that carry flow in some reported solution.
    pub offending_nodes: Vec<NodeId>,
}

impl PostCheck {
    /// Checks every reported flow vector against the open airports.
    pub fn run(spec: &NetworkSpec, design: &Design, flows: &[&[f64]], tol: f64) -> Self {
        let n_arcs = spec.num_arcs();
        let mut offending = vec![false; spec.num_nodes()];
        for x in flows {
            for (c, &v) in x.iter().enumerate() {
                if v > tol {
                    let arc = &spec.arcs[c % n_arcs];
                    for node in [arc.tail, arc.head] {
                        if !design.open[node.0] {
                            offending[node.0] = true;
                        }
                    }
                }
            }
        }
        let offending_nodes: Vec<NodeId> = offending
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| NodeId(i))
            .collect();
        PostCheck {
            passed: offending_nodes.is_empty(),
            offending_nodes,
        }
    }
}

/// Convergence record of the multiplier method.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LagrangianDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Largest violation of `C + Aᵀμ + Dᵀλ ≥ 0` over samples at termination.
    pub dual_violation: f64,
    /// Best lower bound produced by the relaxation.
    pub lagrangian_value: f64,
    /// Exact objective of the best design found by the multiplier loop.
    pub loop_incumbent_value: f64,
    /// Exact objective of the incumbent after local search.
    pub incumbent_value: f64,
    /// `(incumbent − relaxation) / max(1, |incumbent|)`.
    pub relative_gap: f64,
    pub candidates_evaluated: usize,
    pub polish_moves: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub lattice_size: f64,
    /// Designs whose lower bound was computed.
    pub designs_bounded: usize,
    /// Designs whose exact objective was computed.
    pub designs_evaluated: usize,
    pub lp_solves: usize,
    pub strategy: Option<WorstCaseStrategy>,
    pub post_check: PostCheck,
    pub lagrangian: Option<LagrangianDiagnostics>,
    /// Wall-clock time; kept out of serialized reports so they stay
    /// byte-identical across runs.
    #[serde(skip)]
    pub elapsed_ms: u128,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub mode: SolveMode,
    pub design: Design,
    pub objective: f64,
    pub theta: f64,
    pub beta: f64,
    pub breakdown: ObjectiveBreakdown,
    pub worst_case: Vec<WorstCaseEntry>,
    pub diagnostics: SolveDiagnostics,
}

impl SolveReport {
    pub fn from_evaluation(mode: SolveMode, theta: f64, design: Design, eval: Evaluation, spec: &NetworkSpec) -> Self {
        let flows: Vec<&[f64]> = eval.worst_case.iter().map(|e| e.flows.as_slice()).collect();
        let post_check = PostCheck::run(spec, &design, &flows, 1e-7);
        SolveReport {
            mode,
            objective: eval.objective,
            theta,
            beta: eval.beta,
            breakdown: eval.breakdown,
            diagnostics: SolveDiagnostics {
                lp_solves: eval.lp_solves,
                post_check,
                ..Default::default()
            },
            worst_case: eval.worst_case,
            design,
        }
    }

    /// Names of open airports.
    pub fn open_node_names(&self, spec: &NetworkSpec) -> Vec<String> {
        self.design
            .open_nodes()
            .into_iter()
            .map(|n| spec.nodes[n.0].name.clone())
            .collect()
    }

    /// `(tail name, head name)` for every arc with channels.
    pub fn built_arcs(&self, spec: &NetworkSpec) -> Vec<(String, String)> {
        spec.arcs
            .iter()
            .enumerate()
            .filter(|(a, _)| self.design.channels[*a].iter().any(|&y| y > 0))
            .map(|(_, arc)| (spec.nodes[arc.tail.0].name.clone(), spec.nodes[arc.head.0].name.clone()))
            .collect()
    }
}
