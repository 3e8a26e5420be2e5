//! Instance data: nodes, candidate arcs, channel types, origin-destination
//! pairs, the demand model and first-stage designs.
//!
//! Everything here is plain data. Types are immutable once built and can be
//! shared freely between worker threads.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::extensive::BatteryRhsMode;
use crate::par::ExecPolicy;

macro_rules! index_type {
    ($(#[$meta:meta])* $name:ident, $label:literal) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($label, " {}"), self.0)
            }
        }
    };
}

index_type!(
    /// Index into [`NetworkSpec::nodes`].
    NodeId,
    "node"
);
index_type!(
    /// Index into [`NetworkSpec::arcs`].
    ArcId,
    "arc"
);
index_type!(
    /// Index into [`NetworkSpec::od_pairs`].
    OdId,
    "pair"
);
index_type!(
    /// Index into [`NetworkSpec::channel_types`].
    ChannelTypeId,
    "channel type"
);

/// A candidate airport location.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    /// Throughput limit once an airport is opened here.
    pub airport_capacity: f64,
    pub infrastructure_cost: f64,
    /// Cost per unit of airport capacity.
    pub capacity_unit_cost: f64,
}

/// One channel type on one arc.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub capacity: f64,
    pub cost: f64,
    pub max_count: u32,
}

/// A directed candidate route. The reverse direction, if usable, is its own arc.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub tail: NodeId,
    pub head: NodeId,
    /// Energy consumed per unit of flow along the arc.
    pub energy: f64,
    /// Indexed by channel type.
    pub channels: Vec<Channel>,
    /// Unit transport cost, indexed by origin-destination pair.
    pub transport_cost: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdPair {
    pub name: String,
    pub origin: NodeId,
    pub destination: NodeId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub nodes: Vec<Node>,
    pub arcs: Vec<Arc>,
    pub channel_types: Vec<String>,
    pub od_pairs: Vec<OdPair>,
    /// Energy restored by one charging completion.
    pub battery_boost: f64,
    /// Big-M for the airport capacity rows; `None` means derive it from the
    /// demand bounds with [`suggest_big_m`].
    pub big_m: Option<f64>,
}

impl NetworkSpec {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.od_pairs.len()
    }

    pub fn num_channel_types(&self) -> usize {
        self.channel_types.len()
    }

    pub fn node_by_name(&self, name: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.name == name).map(NodeId)
    }

    pub fn arc_between(&self, tail: NodeId, head: NodeId) -> Option<ArcId> {
        self.arcs
            .iter()
            .position(|a| a.tail == tail && a.head == head)
            .map(ArcId)
    }

    /// The big-M actually used when assembling the second-stage LP.
    pub fn effective_big_m(&self, demand: &DemandModel) -> f64 {
        self.big_m.unwrap_or_else(|| suggest_big_m(self, demand))
    }

    /// Largest unit transport cost on any arc, for any pair.
    pub fn max_transport_cost(&self) -> f64 {
        self.arcs
            .iter()
            .flat_map(|a| a.transport_cost.iter().copied())
            .fold(0.0, f64::max)
    }
}

/// Historical demand samples plus the support box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemandModel {
    /// One label per sample (dates in the bundled case study).
    pub labels: Vec<String>,
    /// `samples[j][k]` is the demand of pair `k` in sample `j`.
    pub samples: Vec<Vec<f64>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DemandModel {
    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.upper.len()
    }

    /// Pairs whose demand box is not pinned at zero.
    pub fn active_pairs(&self) -> Vec<OdId> {
        (0..self.num_pairs())
            .filter(|&k| self.upper[k] > 0.0 || self.lower[k] > 0.0)
            .map(OdId)
            .collect()
    }

    pub fn sample_mean(&self) -> Vec<f64> {
        let n = self.num_samples().max(1) as f64;
        let mut mean = vec![0.0; self.num_pairs()];
        for s in &self.samples {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v / n;
            }
        }
        mean
    }

    /// A single-sample model, as used by the deterministic mode.
    pub fn single(&self, b: Vec<f64>, label: &str) -> DemandModel {
        DemandModel {
            labels: vec![label.to_string()],
            samples: vec![b],
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }
}

/// First-stage decision: which airports to open and how many channels of each
/// type to build on every arc.
///
/// Ordering is lexicographic over `(open, channels)` and is used as the final
/// tie-break between equally good designs.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Design {
    pub open: Vec<bool>,
    /// `channels[arc][type]`.
    pub channels: Vec<Vec<u32>>,
}

impl Design {
    pub fn empty(spec: &NetworkSpec) -> Self {
        Design {
            open: vec![false; spec.num_nodes()],
            channels: vec![vec![0; spec.num_channel_types()]; spec.num_arcs()],
        }
    }

    /// Every node open and every channel built to its maximum.
    pub fn full(spec: &NetworkSpec) -> Self {
        Design {
            open: vec![true; spec.num_nodes()],
            channels: spec
                .arcs
                .iter()
                .map(|a| a.channels.iter().map(|c| c.max_count).collect())
                .collect(),
        }
    }

    pub fn is_open(&self, node: NodeId) -> bool {
        self.open[node.0]
    }

    /// Installed capacity on an arc, summed over channel types.
    pub fn arc_capacity(&self, spec: &NetworkSpec, arc: ArcId) -> f64 {
        spec.arcs[arc.0]
            .channels
            .iter()
            .zip(&self.channels[arc.0])
            .map(|(c, &y)| c.capacity * f64::from(y))
            .sum()
    }

    pub fn has_channels(&self, arc: ArcId) -> bool {
        self.channels[arc.0].iter().any(|&y| y > 0)
    }

    /// True when every arc with channels joins two open airports.
    pub fn is_consistent(&self, spec: &NetworkSpec) -> bool {
        spec.arcs.iter().enumerate().all(|(a, arc)| {
            !self.has_channels(ArcId(a)) || (self.open[arc.tail.0] && self.open[arc.head.0])
        })
    }

    /// Drops channels on arcs touching a closed node.
    pub fn normalized(mut self, spec: &NetworkSpec) -> Self {
        for (a, arc) in spec.arcs.iter().enumerate() {
            if !(self.open[arc.tail.0] && self.open[arc.head.0]) {
                self.channels[a].iter_mut().for_each(|y| *y = 0);
            }
        }
        self
    }

    pub fn open_nodes(&self) -> Vec<NodeId> {
        self.open
            .iter()
            .enumerate()
            .filter(|(_, &o)| o)
            .map(|(i, _)| NodeId(i))
            .collect()
    }

    pub fn investment(&self, spec: &NetworkSpec) -> InvestmentCost {
        let mut cost = InvestmentCost::default();
        for (node, &open) in spec.nodes.iter().zip(&self.open) {
            if open {
                cost.infrastructure += node.infrastructure_cost;
                cost.capacity += node.capacity_unit_cost * node.airport_capacity;
            }
        }
        for (arc, ys) in spec.arcs.iter().zip(&self.channels) {
            for (ch, &y) in arc.channels.iter().zip(ys) {
                cost.channel += ch.cost * f64::from(y);
            }
        }
        cost
    }
}

/// First-stage cost split by kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InvestmentCost {
    pub channel: f64,
    pub infrastructure: f64,
    pub capacity: f64,
}

impl InvestmentCost {
    pub fn total(&self) -> f64 {
        self.channel + self.infrastructure + self.capacity
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaMode {
    Fixed,
    /// Minimise the objective over the penalty multiplier for each design.
    Search,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    VertexEnum,
    Lagrangian,
    Saa,
    Deterministic,
}

/// How the inner maximisation over demand vertices is carried out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WorstCaseStrategy {
    /// Solve the primal second stage at every one of the 3^K vertices.
    PrimalEnum,
    /// Solve the dual second stage at every vertex.
    DualEnum,
    /// Branch and bound over {sample, upper} vertices only. Exact because the
    /// recourse cost is nondecreasing in demand.
    Pruned,
    /// `PrimalEnum` up to [`Tolerances::enum_max_pairs`] active pairs, `Pruned` beyond.
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub feas: f64,
    /// Relative.
    pub gap: f64,
    pub enum_max_pairs: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feas: 1e-7,
            gap: 1e-6,
            enum_max_pairs: 12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagrangianSettings {
    pub step0: f64,
    pub max_iter: usize,
    pub tol_violation: f64,
    /// Run the exact add/drop/swap descent on the incumbent after the
    /// multiplier loop.
    pub polish: bool,
}

impl Default for LagrangianSettings {
    fn default() -> Self {
        LagrangianSettings {
            step0: 1.0,
            max_iter: 500,
            tol_violation: 1e-5,
            polish: true,
        }
    }
}

/// Solver configuration shared by every solve path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DroConfig {
    /// Wasserstein radius.
    pub theta: f64,
    /// Penalty multiplier on the transport distance.
    pub beta: f64,
    pub beta_mode: BetaMode,
    pub mode: SolveMode,
    pub strategy: WorstCaseStrategy,
    pub battery_rhs: BatteryRhsMode,
    pub tolerances: Tolerances,
    /// Largest design lattice the exhaustive search will accept.
    pub lattice_cap: u64,
    pub exec: ExecPolicy,
    pub lagrangian: LagrangianSettings,
}

impl Default for DroConfig {
    fn default() -> Self {
        DroConfig {
            theta: 100.0,
            beta: 1000.0,
            beta_mode: BetaMode::Fixed,
            mode: SolveMode::VertexEnum,
            strategy: WorstCaseStrategy::Auto,
            battery_rhs: BatteryRhsMode::Literal,
            tolerances: Tolerances::default(),
            lattice_cap: 1 << 20,
            exec: ExecPolicy::default(),
            lagrangian: LagrangianSettings::default(),
        }
    }
}

impl DroConfig {
    pub fn with_theta_beta(mut self, theta: f64, beta: f64) -> Self {
        self.theta = theta;
        self.beta = beta;
        self
    }
}

/// What a [`Diagnostic`] is about.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Subject {
    Instance,
    Node { node: NodeId, name: String },
    Arc { arc: ArcId },
    Pair { pair: OdId, name: String },
    Sample { sample: usize, pair: OdId },
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Instance => write!(f, "instance"),
            Subject::Node { node, name } => write!(f, "{node} ({name})"),
            Subject::Arc { arc } => write!(f, "{arc}"),
            Subject::Pair { pair, name } => write!(f, "{pair} ({name})"),
            Subject::Sample { sample, pair } => write!(f, "sample {sample}, {pair}"),
        }
    }
}

/// One violated instance invariant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub subject: Subject,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

fn non_negative(value: f64) -> bool {
    value.is_finite() && value >= 0.0
}

/// Checks every instance invariant and reports all violations.
///
/// Returns an empty list exactly when the instance is well formed.
pub fn validate_instance(spec: &NetworkSpec, demand: &DemandModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |subject: Subject, message: String| out.push(Diagnostic { subject, message });
    let n_nodes = spec.num_nodes();
    let n_pairs = spec.num_pairs();
    let n_types = spec.num_channel_types();

    if n_types == 0 {
        push(Subject::Instance, "at least one channel type is required".into());
    }
    if !(spec.battery_boost.is_finite() && spec.battery_boost > 0.0) {
        push(
            Subject::Instance,
            format!("battery boost must be positive, got {}", spec.battery_boost),
        );
    }

    for (i, node) in spec.nodes.iter().enumerate() {
        let subject = || Subject::Node {
            node: NodeId(i),
            name: node.name.clone(),
        };
        for (field, value) in [
            ("airport capacity", node.airport_capacity),
            ("infrastructure cost", node.infrastructure_cost),
            ("capacity unit cost", node.capacity_unit_cost),
        ] {
            if !non_negative(value) {
                push(subject(), format!("{field} must be finite and non-negative, got {value}"));
            }
        }
    }

    for (a, arc) in spec.arcs.iter().enumerate() {
        let subject = || Subject::Arc { arc: ArcId(a) };
        if arc.tail.0 >= n_nodes || arc.head.0 >= n_nodes {
            push(subject(), format!("endpoint out of range ({} -> {})", arc.tail.0, arc.head.0));
        } else if arc.tail == arc.head {
            push(subject(), format!("self loop at {}", arc.tail));
        }
        if !non_negative(arc.energy) {
            push(subject(), format!("energy must be finite and non-negative, got {}", arc.energy));
        }
        if arc.channels.len() != n_types {
            push(
                subject(),
                format!("{} channel entries for {} channel types", arc.channels.len(), n_types),
            );
        }
        for (t, ch) in arc.channels.iter().enumerate() {
            if !(ch.capacity.is_finite() && ch.capacity > 0.0) {
                push(
                    subject(),
                    format!("channel type {t} capacity must be positive, got {}", ch.capacity),
                );
            }
            if !non_negative(ch.cost) {
                push(subject(), format!("channel type {t} cost must be non-negative, got {}", ch.cost));
            }
            if ch.max_count < 1 {
                push(subject(), format!("channel type {t} max count must be at least 1"));
            }
        }
        if arc.transport_cost.len() != n_pairs {
            push(
                subject(),
                format!("{} transport costs for {} pairs", arc.transport_cost.len(), n_pairs),
            );
        }
        for (k, &c) in arc.transport_cost.iter().enumerate() {
            if !non_negative(c) {
                push(subject(), format!("transport cost for pair {k} must be non-negative, got {c}"));
            }
        }
    }

    for (k, pair) in spec.od_pairs.iter().enumerate() {
        let subject = || Subject::Pair {
            pair: OdId(k),
            name: pair.name.clone(),
        };
        if pair.origin.0 >= n_nodes || pair.destination.0 >= n_nodes {
            push(subject(), "endpoint out of range".into());
        } else if pair.origin == pair.destination {
            push(subject(), format!("origin and destination coincide at {}", pair.origin));
        }
    }

    if demand.lower.len() != n_pairs || demand.upper.len() != n_pairs {
        push(
            Subject::Instance,
            format!(
                "demand bounds have {}/{} entries for {} pairs",
                demand.lower.len(),
                demand.upper.len(),
                n_pairs
            ),
        );
        return out;
    }
    if demand.samples.is_empty() {
        push(Subject::Instance, "N ≥ 1 required: no demand samples".into());
    }
    if !demand.labels.is_empty() && demand.labels.len() != demand.samples.len() {
        push(
            Subject::Instance,
            format!("{} sample labels for {} samples", demand.labels.len(), demand.samples.len()),
        );
    }
    for k in 0..n_pairs {
        let (lo, hi) = (demand.lower[k], demand.upper[k]);
        if !(non_negative(lo) && hi.is_finite() && lo <= hi) {
            push(
                Subject::Pair {
                    pair: OdId(k),
                    name: spec.od_pairs[k].name.clone(),
                },
                format!("demand bounds must satisfy 0 <= lower <= upper, got [{lo}, {hi}]"),
            );
        }
    }
    for (j, sample) in demand.samples.iter().enumerate() {
        if sample.len() != n_pairs {
            push(
                Subject::Instance,
                format!("sample {j} has {} entries for {} pairs", sample.len(), n_pairs),
            );
            continue;
        }
        for (k, &v) in sample.iter().enumerate() {
            let (lo, hi) = (demand.lower[k], demand.upper[k]);
            if !v.is_finite() || v < lo || v > hi {
                push(
                    Subject::Sample {
                        sample: j,
                        pair: OdId(k),
                    },
                    format!("value {v} outside bounds [{lo}, {hi}] of {}", spec.od_pairs[k].name),
                );
            }
        }
    }

    if let Some(m) = spec.big_m {
        let suggested = suggest_big_m(spec, demand);
        if !(m.is_finite() && m >= suggested) {
            push(
                Subject::Instance,
                format!("big-M {m} is below the throughput bound {suggested}"),
            );
        }
    }
    out
}

/// Big-M large enough to never bind at a closed node: twice the total upper
/// demand bounds one node's inflow plus outflow when no flow cycles.
pub fn suggest_big_m(_spec: &NetworkSpec, demand: &DemandModel) -> f64 {
    2.0 * demand.upper.iter().sum::<f64>()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Two nodes joined by one arc, one pair.
    pub fn single_arc(ct: f64, capacity: f64, b: f64) -> (NetworkSpec, DemandModel) {
        let spec = NetworkSpec {
            nodes: vec![
                Node {
                    name: "O".into(),
                    airport_capacity: 1e6,
                    infrastructure_cost: 10.0,
                    capacity_unit_cost: 0.0,
                },
                Node {
                    name: "D".into(),
                    airport_capacity: 1e6,
                    infrastructure_cost: 10.0,
                    capacity_unit_cost: 0.0,
                },
            ],
            arcs: vec![Arc {
                tail: NodeId(0),
                head: NodeId(1),
                energy: 1.0,
                channels: vec![Channel {
                    capacity,
                    cost: 5.0,
                    max_count: 1,
                }],
                transport_cost: vec![ct],
            }],
            channel_types: vec!["standard".into()],
            od_pairs: vec![OdPair {
                name: "O-D".into(),
                origin: NodeId(0),
                destination: NodeId(1),
            }],
            battery_boost: 10.0,
            big_m: None,
        };
        let demand = DemandModel {
            labels: vec!["s1".into()],
            samples: vec![vec![b]],
            lower: vec![0.0],
            upper: vec![b.max(1.0) * 2.0],
        };
        (spec, demand)
    }

    #[test]
    fn well_formed_instance_has_no_diagnostics() {
        let (spec, demand) = single_arc(2.0, 100.0, 10.0);
        assert!(validate_instance(&spec, &demand).is_empty());
    }

    #[test]
    fn sample_above_upper_bound_is_reported_once() {
        let (spec, mut demand) = single_arc(2.0, 100.0, 10.0);
        demand.upper = vec![25.0];
        demand.samples = vec![vec![30.0]];
        let diags = validate_instance(&spec, &demand);
        assert_eq!(diags.len(), 1);
        assert_eq!(
            diags[0].subject,
            Subject::Sample {
                sample: 0,
                pair: OdId(0)
            }
        );
        assert!(diags[0].message.contains("O-D"));
    }

    #[test]
    fn zero_channel_capacity_is_reported() {
        let (mut spec, demand) = single_arc(2.0, 100.0, 10.0);
        spec.arcs[0].channels[0].capacity = 0.0;
        let diags = validate_instance(&spec, &demand);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].subject, Subject::Arc { arc: ArcId(0) });
    }

    #[test]
    fn empty_samples_are_rejected() {
        let (spec, mut demand) = single_arc(2.0, 100.0, 10.0);
        demand.samples.clear();
        demand.labels.clear();
        let diags = validate_instance(&spec, &demand);
        assert!(diags.iter().any(|d| d.message.contains("N ≥ 1 required")));
    }

    #[test]
    fn validation_is_idempotent() {
        let (mut spec, demand) = single_arc(-1.0, 0.0, 10.0);
        spec.battery_boost = 0.0;
        let first = validate_instance(&spec, &demand);
        let second = validate_instance(&spec, &demand);
        assert_eq!(first, second);
        assert_eq!(first.len(), 3);
    }

    #[test]
    fn big_m_suggestion() {
        let (spec, mut demand) = single_arc(2.0, 100.0, 10.0);
        demand.upper = vec![10.0, 15.0];
        assert_eq!(suggest_big_m(&spec, &demand), 50.0);
        demand.upper = vec![0.0];
        assert_eq!(suggest_big_m(&spec, &demand), 0.0);
        demand.upper = vec![25.0; 7];
        assert_eq!(suggest_big_m(&spec, &demand), 350.0);
    }

    #[test]
    fn explicit_big_m_below_bound_is_flagged() {
        let (mut spec, demand) = single_arc(2.0, 100.0, 10.0);
        spec.big_m = Some(1.0);
        assert_eq!(validate_instance(&spec, &demand).len(), 1);
        spec.big_m = Some(1e9);
        assert!(validate_instance(&spec, &demand).is_empty());
    }

    #[test]
    fn normalization_drops_channels_at_closed_nodes() {
        let (spec, _) = single_arc(2.0, 100.0, 10.0);
        let mut d = Design::full(&spec);
        d.open[1] = false;
        assert!(!d.is_consistent(&spec));
        let d = d.normalized(&spec);
        assert!(d.is_consistent(&spec));
        assert_eq!(d.channels[0], vec![0]);
    }

    #[test]
    fn investment_split() {
        let (spec, _) = single_arc(2.0, 100.0, 10.0);
        let cost = Design::full(&spec).investment(&spec);
        assert_eq!(cost.channel, 5.0);
        assert_eq!(cost.infrastructure, 20.0);
        assert_eq!(cost.total(), 25.0);
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn big_m_is_monotone_in_upper_bounds(
            base in proptest::collection::vec(0.0f64..100.0, 1..6),
            bump in 0.0f64..50.0,
            which in 0usize..6,
        ) {
            let (spec, mut demand) = single_arc(1.0, 1.0, 1.0);
            demand.upper = base.clone();
            let before = suggest_big_m(&spec, &demand);
            let k = which % base.len();
            demand.upper[k] += bump;
            prop_assert!(suggest_big_m(&spec, &demand) >= before);
        }
    }
}
