//! Report files written to the output directory.

use std::path::Path;

use serde::Serialize;
use uamn_core::model::{ArcId, OdId};
use uamn_core::{Design, NetworkSpec, SolveReport};

use crate::error::CliError;
use crate::instance::Instance;
use crate::table::{write_records, write_table};

#[derive(Serialize)]
struct ReportDocument<'a> {
    command: &'a str,
    open_airports: Vec<String>,
    built_arcs: Vec<[String; 2]>,
    #[serde(flatten)]
    report: &'a SolveReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_ms: Option<u128>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Design as an edge list: one row per open airport, one per built channel.
pub fn design_records(spec: &NetworkSpec, design: &Design) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for n in design.open_nodes() {
        out.push(vec!["airport".into(), spec.nodes[n.0].name.clone(), String::new(), String::new(), "1".into()]);
    }
    for (a, arc) in spec.arcs.iter().enumerate() {
        for (t, &y) in design.channels[a].iter().enumerate() {
            if y > 0 {
                out.push(vec![
                    "channel".into(),
                    spec.nodes[arc.tail.0].name.clone(),
                    spec.nodes[arc.head.0].name.clone(),
                    spec.channel_types[t].clone(),
                    y.to_string(),
                ]);
            }
        }
    }
    out
}

pub const DESIGN_HEADER: [&str; 5] = ["kind", "tail", "head", "channel_type", "count"];

/// The worst-case demand table: pairs as rows, samples as columns.
pub fn worst_case_rows(spec: &NetworkSpec, report: &SolveReport) -> Vec<(String, Vec<f64>)> {
    spec.od_pairs
        .iter()
        .enumerate()
        .map(|(k, p)| (p.name.clone(), report.worst_case.iter().map(|e| e.b_star[k]).collect()))
        .collect()
}

fn flow_records(spec: &NetworkSpec, instance: &Instance, report: &SolveReport) -> Vec<Vec<String>> {
    let n_arcs = spec.num_arcs();
    let mut out = Vec::new();
    for e in &report.worst_case {
        for (c, &x) in e.flows.iter().enumerate() {
            if x > 1e-9 {
                let (k, a) = (OdId(c / n_arcs), ArcId(c % n_arcs));
                let arc = &spec.arcs[a.0];
                out.push(vec![
                    sample_label(instance, e.sample),
                    spec.od_pairs[k.0].name.clone(),
                    spec.nodes[arc.tail.0].name.clone(),
                    spec.nodes[arc.head.0].name.clone(),
                    x.to_string(),
                ]);
            }
        }
    }
    out
}

pub fn sample_label(instance: &Instance, j: usize) -> String {
    instance.demand.labels.get(j).cloned().unwrap_or_else(|| format!("s{}", j + 1))
}

/// Writes `report.json`, `worst_case.csv`, `design.csv` and `flows.csv`.
/// Byte-identical for identical inputs unless `timings` is set.
pub fn emit_report(
    instance: &Instance,
    report: &SolveReport,
    command: &str,
    dir: &Path,
    timings: bool,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let spec = &instance.spec;
    let doc = ReportDocument {
        command,
        open_airports: report.open_node_names(spec),
        built_arcs: report.built_arcs(spec).into_iter().map(|(t, h)| [t, h]).collect(),
        report,
        elapsed_ms: timings.then_some(report.diagnostics.elapsed_ms),
    };
    write_json(&dir.join("report.json"), &doc)?;
    let labels: Vec<String> = (0..report.worst_case.len()).map(|j| sample_label(instance, j)).collect();
    write_table(&dir.join("worst_case.csv"), "pair", &labels, &worst_case_rows(spec, report))?;
    write_records(&dir.join("design.csv"), &DESIGN_HEADER, &design_records(spec, &report.design))?;
    write_records(
        &dir.join("flows.csv"),
        &["sample", "pair", "tail", "head", "flow"],
        &flow_records(spec, instance, report),
    )
}
