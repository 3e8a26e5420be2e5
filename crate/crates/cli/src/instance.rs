//! Instance files: a TOML document holding the network and the demand data.
//!
//! ```toml
//! schema_version = 1
//! battery_boost = 18.0          # L
//! channel_types = ["standard"]
//!
//! [[nodes]]
//! name = "Blood Center"
//! airport_capacity = 400.0      # w, kg per day
//! infrastructure_cost = 5000.0  # Cf
//! capacity_unit_cost = 1.0      # Cs
//!
//! [[od_pairs]]
//! name = "Wushan Square"
//! origin = "Wushan Square"
//! destination = "Blood Center"
//! lower = 0.0                   # W-, defaults to 0
//! upper = 25.0                  # W+, defaults to the largest sample
//!
//! [[arcs]]
//! tail = "Wushan Square"
//! head = "Blood Center"
//! energy = 5.3                  # l
//! transport_cost = 10.6         # Ct, one value for every pair or a table by pair name
//! channels = [{ capacity = 60.0, cost = 800.0, max_count = 1 }]
//!
//! [demand]
//! labels = ["2018/11/12", "2018/11/13"]
//! samples = { "Wushan Square" = [0.4, 3.1] }
//! ```
//!
//! Demand samples come from exactly one of `demand.samples` (rows are pairs,
//! as in a pairs-by-dates table), `demand.samples_file` (a CSV table with the
//! same orientation, resolved relative to the instance file) or
//! `demand.gaussian` (censored Gaussian draws). Pairs without samples have
//! zero history.
//!
//! Instead of listing arcs, a `[distances]` section may generate them from a
//! distance matrix: every ordered pair of distinct listed nodes within
//! `max_hop` becomes an arc with `energy = energy_per_unit · d` and
//! `transport_cost = transport_per_unit · d`. Units are free as long as they
//! are consistent; the bundled case study uses kilometres, kilograms and one
//! energy unit per kilometre, so `battery_boost = 18` means an 18 km range.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use uamn_core::model::{validate_instance, Arc, Channel, Diagnostic, Node, NodeId, OdPair, Subject};
use uamn_core::sampling::{censored_gaussian_samples, GaussianDemand};
use uamn_core::{DemandModel, NetworkSpec};

use crate::error::CliError;
use crate::table::read_sample_table;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub battery_boost: f64,
    /// Big-M for closed airports; derived from the demand bounds when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
    #[serde(default = "default_channel_types")]
    pub channel_types: Vec<String>,
    pub nodes: Vec<NodeEntry>,
    pub od_pairs: Vec<PairEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub arcs: Vec<ArcEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distances: Option<DistanceSection>,
    pub demand: DemandSection,
}

fn default_channel_types() -> Vec<String> {
    vec!["standard".into()]
}

fn one() -> u32 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeEntry {
    pub name: String,
    pub airport_capacity: f64,
    pub infrastructure_cost: f64,
    pub capacity_unit_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub name: String,
    pub origin: String,
    pub destination: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEntry {
    pub capacity: f64,
    pub cost: f64,
    #[serde(default = "one")]
    pub max_count: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TransportCost {
    Uniform(f64),
    PerPair(BTreeMap<String, f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcEntry {
    pub tail: String,
    pub head: String,
    pub energy: f64,
    pub transport_cost: TransportCost,
    /// One entry per channel type.
    pub channels: Vec<ChannelEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceSection {
    /// Row and column order of `matrix`.
    pub nodes: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
    pub transport_per_unit: f64,
    pub energy_per_unit: f64,
    /// Longest generated hop.
    pub max_hop: f64,
    /// Channel offer on every generated arc, one entry per channel type.
    pub channels: Vec<ChannelEntry>,
    /// Arcs into these nodes are not generated.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub no_arcs_into: Vec<String>,
    /// Arcs out of these nodes are not generated.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub no_arcs_from: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSection {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<BTreeMap<String, Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussianSection>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSection {
    pub seed: u64,
    pub count: usize,
    pub pairs: BTreeMap<String, GaussianEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianEntry {
    pub mean: f64,
    pub sd: f64,
}

/// A loaded instance ready for the solver.
#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub file: InstanceFile,
    pub spec: NetworkSpec,
    pub demand: DemandModel,
}

/// Samples as a pairs-by-labels table.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleTable {
    pub labels: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl InstanceFile {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let file: InstanceFile = toml::from_str(text).map_err(|e| {
            let location = e.span().map(|s| line_col(text, s.start));
            CliError::Parse {
                location: location.map(|(l, c)| format!("line {l}, column {c}")),
                message: e.message().to_string(),
            }
        })?;
        if file.schema_version != SCHEMA_VERSION {
            return Err(CliError::Parse {
                location: Some("schema_version".into()),
                message: format!(
                    "unsupported schema version {}, expected {SCHEMA_VERSION}",
                    file.schema_version
                ),
            });
        }
        Ok(file)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("instance files always serialize")
    }

    /// Builds the solver model. `base` resolves `demand.samples_file`;
    /// `samples` replaces whatever sample source the file names.
    pub fn build(&self, base: Option<&Path>, samples: Option<SampleTable>) -> Result<Instance, CliError> {
        let mut problems = Vec::new();
        let node_index: BTreeMap<&str, usize> =
            self.nodes.iter().enumerate().map(|(i, n)| (n.name.as_str(), i)).collect();
        let lookup = |name: &str, field: String, problems: &mut Vec<FieldProblem>| match node_index.get(name) {
            Some(&i) => Some(NodeId(i)),
            None => {
                problems.push(FieldProblem::new(field, format!("unknown node \"{name}\"")));
                None
            }
        };
        if node_index.len() != self.nodes.len() {
            problems.push(FieldProblem::new("nodes".into(), "node names must be unique".into()));
        }

        let nodes: Vec<Node> = self
            .nodes
            .iter()
            .map(|n| Node {
                name: n.name.clone(),
                airport_capacity: n.airport_capacity,
                infrastructure_cost: n.infrastructure_cost,
                capacity_unit_cost: n.capacity_unit_cost,
            })
            .collect();

        let mut od_pairs = Vec::new();
        for (k, p) in self.od_pairs.iter().enumerate() {
            let o = lookup(&p.origin, format!("od_pairs[{k}].origin"), &mut problems);
            let d = lookup(&p.destination, format!("od_pairs[{k}].destination"), &mut problems);
            if let (Some(origin), Some(destination)) = (o, d) {
                od_pairs.push(OdPair {
                    name: p.name.clone(),
                    origin,
                    destination,
                });
            }
        }
        let pair_index: BTreeMap<&str, usize> =
            self.od_pairs.iter().enumerate().map(|(k, p)| (p.name.as_str(), k)).collect();
        if pair_index.len() != self.od_pairs.len() {
            problems.push(FieldProblem::new("od_pairs".into(), "pair names must be unique".into()));
        }
        let n_pairs = self.od_pairs.len();
        let channels_of = |entries: &[ChannelEntry]| -> Vec<Channel> {
            entries
                .iter()
                .map(|c| Channel {
                    capacity: c.capacity,
                    cost: c.cost,
                    max_count: c.max_count,
                })
                .collect()
        };

        let mut arcs = Vec::new();
        let mut arc_fields = Vec::new();
        for (a, entry) in self.arcs.iter().enumerate() {
            let t = lookup(&entry.tail, format!("arcs[{a}].tail"), &mut problems);
            let h = lookup(&entry.head, format!("arcs[{a}].head"), &mut problems);
            let transport_cost = match &entry.transport_cost {
                TransportCost::Uniform(c) => vec![*c; n_pairs],
                TransportCost::PerPair(map) => {
                    let mut costs = vec![0.0; n_pairs];
                    for (name, &c) in map {
                        match pair_index.get(name.as_str()) {
                            Some(&k) => costs[k] = c,
                            None => problems.push(FieldProblem::new(
                                format!("arcs[{a}].transport_cost"),
                                format!("unknown pair \"{name}\""),
                            )),
                        }
                    }
                    if map.len() != n_pairs {
                        problems.push(FieldProblem::new(
                            format!("arcs[{a}].transport_cost"),
                            format!("{} costs given for {n_pairs} pairs", map.len()),
                        ));
                    }
                    costs
                }
            };
            if let (Some(tail), Some(head)) = (t, h) {
                arcs.push(Arc {
                    tail,
                    head,
                    energy: entry.energy,
                    channels: channels_of(&entry.channels),
                    transport_cost,
                });
                arc_fields.push(format!("arcs[{a}]"));
            }
        }
        if let Some(dist) = &self.distances {
            let g = dist.nodes.len();
            if dist.matrix.len() != g || dist.matrix.iter().any(|r| r.len() != g) {
                problems.push(FieldProblem::new(
                    "distances.matrix".into(),
                    format!("matrix must be {g} x {g}"),
                ));
            } else {
                let ids: Vec<Option<NodeId>> = dist
                    .nodes
                    .iter()
                    .enumerate()
                    .map(|(i, n)| lookup(n, format!("distances.nodes[{i}]"), &mut problems))
                    .collect();
                for name in dist.no_arcs_into.iter().chain(&dist.no_arcs_from) {
                    if !dist.nodes.contains(name) {
                        problems.push(FieldProblem::new(
                            "distances".into(),
                            format!("\"{name}\" is not listed in distances.nodes"),
                        ));
                    }
                }
                for i in 0..g {
                    for j in 0..g {
                        let d = dist.matrix[i][j];
                        if i == j
                            || d > dist.max_hop
                            || dist.no_arcs_from.contains(&dist.nodes[i])
                            || dist.no_arcs_into.contains(&dist.nodes[j])
                        {
                            continue;
                        }
                        if let (Some(tail), Some(head)) = (ids[i], ids[j]) {
                            arcs.push(Arc {
                                tail,
                                head,
                                energy: dist.energy_per_unit * d,
                                channels: channels_of(&dist.channels),
                                transport_cost: vec![dist.transport_per_unit * d; n_pairs],
                            });
                            arc_fields.push(format!("distances ({} -> {})", dist.nodes[i], dist.nodes[j]));
                        }
                    }
                }
            }
        }

        let table = match samples {
            Some(t) => Some(t),
            None => self.sample_table(base, &mut problems)?,
        };
        let (labels, sample_rows) = match table {
            Some(t) => {
                for (name, _) in &t.rows {
                    if !pair_index.contains_key(name.as_str()) {
                        problems.push(FieldProblem::new("demand".into(), format!("samples for unknown pair \"{name}\"")));
                    }
                }
                let n = t.labels.len();
                for (name, row) in &t.rows {
                    if row.len() != n {
                        problems.push(FieldProblem::new(
                            format!("demand.samples.\"{name}\""),
                            format!("{} values for {n} samples", row.len()),
                        ));
                    }
                }
                (t.labels, t.rows)
            }
            None => (Vec::new(), Vec::new()),
        };
        let n = labels.len();
        let mut samples = vec![vec![0.0; n_pairs]; n];
        for (name, row) in &sample_rows {
            if let Some(&k) = pair_index.get(name.as_str()) {
                for (j, v) in row.iter().enumerate().take(n) {
                    samples[j][k] = *v;
                }
            }
        }
        let gauss = self.demand.gaussian.as_ref();
        let mut lower = vec![0.0; n_pairs];
        let mut upper = vec![0.0; n_pairs];
        for (k, p) in self.od_pairs.iter().enumerate() {
            let generated = gauss.and_then(|g| g.pairs.get(&p.name)).map(|e| {
                GaussianDemand {
                    mean: e.mean,
                    sd: e.sd,
                }
                .bounds()
            });
            let largest = samples.iter().map(|s| s[k]).fold(0.0, f64::max);
            lower[k] = p.lower.or(generated.map(|b| b.0)).unwrap_or(0.0);
            upper[k] = p.upper.or(generated.map(|b| b.1)).unwrap_or(largest);
        }
        if !problems.is_empty() {
            return Err(CliError::Validation(problems));
        }

        let spec = NetworkSpec {
            nodes,
            arcs,
            channel_types: self.channel_types.clone(),
            od_pairs,
            battery_boost: self.battery_boost,
            big_m: self.big_m,
        };
        let demand = DemandModel {
            labels,
            samples,
            lower,
            upper,
        };
        let diagnostics = validate_instance(&spec, &demand);
        if !diagnostics.is_empty() {
            return Err(CliError::Validation(
                diagnostics
                    .iter()
                    .map(|d| FieldProblem::from_diagnostic(d, &arc_fields, &self.od_pairs))
                    .collect(),
            ));
        }
        Ok(Instance {
            file: self.clone(),
            spec,
            demand,
        })
    }

    fn sample_table(&self, base: Option<&Path>, problems: &mut Vec<FieldProblem>) -> Result<Option<SampleTable>, CliError> {
        let d = &self.demand;
        let sources = usize::from(d.samples.is_some()) + usize::from(d.samples_file.is_some()) + usize::from(d.gaussian.is_some());
        if sources > 1 {
            problems.push(FieldProblem::new(
                "demand".into(),
                "give only one of samples, samples_file and gaussian".into(),
            ));
            return Ok(None);
        }
        if let Some(map) = &d.samples {
            let n = map.values().map(Vec::len).max().unwrap_or(0);
            let labels = if d.labels.is_empty() {
                (1..=n).map(|j| format!("s{j}")).collect()
            } else {
                d.labels.clone()
            };
            // Keep the pair order of the file.
            let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
            for p in &self.od_pairs {
                if let Some(v) = map.get(&p.name) {
                    rows.push((p.name.clone(), v.clone()));
                }
            }
            for (name, v) in map {
                if !self.od_pairs.iter().any(|p| &p.name == name) {
                    rows.push((name.clone(), v.clone()));
                }
            }
            return Ok(Some(SampleTable { labels, rows }));
        }
        if let Some(path) = &d.samples_file {
            let full = base.map_or_else(|| PathBuf::from(path), |b| b.join(path));
            return read_sample_table(&full).map(Some);
        }
        if let Some(g) = &d.gaussian {
            let params: Vec<GaussianDemand> = self
                .od_pairs
                .iter()
                .map(|p| {
                    g.pairs.get(&p.name).map_or(GaussianDemand { mean: 0.0, sd: 0.0 }, |e| GaussianDemand {
                        mean: e.mean,
                        sd: e.sd,
                    })
                })
                .collect();
            for name in g.pairs.keys() {
                if !self.od_pairs.iter().any(|p| &p.name == name) {
                    problems.push(FieldProblem::new(
                        "demand.gaussian.pairs".into(),
                        format!("unknown pair \"{name}\""),
                    ));
                }
            }
            let draws = censored_gaussian_samples(&params, g.count, g.seed);
            let labels = if d.labels.is_empty() {
                (1..=g.count).map(|j| format!("s{j}")).collect()
            } else {
                d.labels.clone()
            };
            let rows = self
                .od_pairs
                .iter()
                .enumerate()
                .map(|(k, p)| (p.name.clone(), draws.iter().map(|s| s[k]).collect()))
                .collect();
            return Ok(Some(SampleTable { labels, rows }));
        }
        Ok(None)
    }
}

/// One problem located by the field it came from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldProblem {
    pub field: String,
    pub message: String,
}

impl FieldProblem {
    fn new(field: String, message: String) -> Self {
        FieldProblem { field, message }
    }

    fn from_diagnostic(d: &Diagnostic, arc_fields: &[String], pairs: &[PairEntry]) -> Self {
        let field = match &d.subject {
            Subject::Instance => "instance".to_string(),
            Subject::Node { node, .. } => format!("nodes[{}]", node.0),
            Subject::Arc { arc } => arc_fields.get(arc.0).cloned().unwrap_or_else(|| format!("arcs[{}]", arc.0)),
            Subject::Pair { pair, .. } => format!("od_pairs[{}]", pair.0),
            Subject::Sample { sample, pair } => {
                format!("demand.samples.\"{}\"[{sample}]", pairs[pair.0].name)
            }
        };
        FieldProblem {
            field,
            message: d.message.clone(),
        }
    }
}

impl std::fmt::Display for FieldProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, col)
}

/// Reads, validates and builds an instance file.
pub fn parse_instance(path: &Path, samples: Option<&Path>) -> Result<Instance, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let file = InstanceFile::from_toml(&text)?;
    let table = samples.map(read_sample_table).transpose()?;
    file.build(path.parent(), table)
}
