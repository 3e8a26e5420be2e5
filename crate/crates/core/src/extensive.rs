//! Matrix form of the second-stage transport problem for a fixed design and
//! demand vector:
//!
//! ```text
//! Q(η, b) = min Cᵀx  s.t.  A x = B(b),  D x ≤ E(η, b),  x ≥ 0
//! ```
//!
//! Columns are indexed pair-major: column `k·|A| + a` carries the flow of
//! pair `k` on arc `a`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linprog::LpProblem;
use crate::model::{ArcId, Design, NetworkSpec, NodeId, OdId};

/// How the battery row's right-hand side counts open airports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BatteryRhsMode {
    /// `b_k · L · Σ_{(i,j) ∈ A} z_i`: each open tail is counted once per
    /// outgoing candidate arc.
    #[default]
    Literal,
    /// `b_k · L · Σ_{i ∈ V} z_i`.
    NodeSum,
}

impl BatteryRhsMode {
    /// The open-airport count multiplying `b_k · L`.
    pub fn open_count(self, spec: &NetworkSpec, design: &Design) -> f64 {
        match self {
            BatteryRhsMode::Literal => spec
                .arcs
                .iter()
                .filter(|a| design.open[a.tail.0])
                .count() as f64,
            BatteryRhsMode::NodeSum => design.open.iter().filter(|&&z| z).count() as f64,
        }
    }
}

/// Identity of one constraint row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RowId {
    Origin { pair: OdId },
    Destination { pair: OdId },
    Transfer { pair: OdId, node: NodeId },
    ChannelCapacity { arc: ArcId },
    Airport { node: NodeId },
    Battery { pair: OdId },
}

#[derive(Debug, Error, PartialEq)]
pub enum FormError {
    #[error("demand vector has {got} entries but the instance has {expected} pairs")]
    Dimension { expected: usize, got: usize },
}

/// The assembled second-stage LP.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtensiveForm {
    pub num_pairs: usize,
    pub num_arcs: usize,
    pub cost: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub eq_rows: Vec<RowId>,
    /// Channel rows, then airport rows, then battery rows.
    pub d_ineq: Vec<Vec<f64>>,
    pub e_ineq: Vec<f64>,
    pub ineq_rows: Vec<RowId>,
    pub columns: Vec<(OdId, ArcId)>,
    pub big_m: f64,
}

/// Residuals of a flow vector against an [`ExtensiveForm`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `‖A x − B‖∞`.
    pub equality: f64,
    pub channel: f64,
    pub airport: f64,
    pub battery: f64,
    pub negativity: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.equality
            .max(self.channel)
            .max(self.airport)
            .max(self.battery)
            .max(self.negativity)
    }
}

impl ExtensiveForm {
    /// Assembles the LP for `design` at demand `b`.
    pub fn build(
        spec: &NetworkSpec,
        design: &Design,
        b: &[f64],
        battery: BatteryRhsMode,
        big_m: f64,
    ) -> Result<Self, FormError> {
        let k_count = spec.num_pairs();
        if b.len() != k_count {
            return Err(FormError::Dimension {
                expected: k_count,
                got: b.len(),
            });
        }
        let n_arcs = spec.num_arcs();
        let n_cols = k_count * n_arcs;
        let col = |k: usize, a: usize| k * n_arcs + a;

        let mut cost = vec![0.0; n_cols];
        let mut columns = Vec::with_capacity(n_cols);
        for k in 0..k_count {
            for (a, arc) in spec.arcs.iter().enumerate() {
                cost[col(k, a)] = arc.transport_cost[k];
                columns.push((OdId(k), ArcId(a)));
            }
        }

        let balance_row = |k: usize, node: NodeId| {
            let mut row = vec![0.0; n_cols];
            for (a, arc) in spec.arcs.iter().enumerate() {
                if arc.tail == node {
                    row[col(k, a)] += 1.0;
                }
                if arc.head == node {
                    row[col(k, a)] -= 1.0;
                }
            }
            row
        };

        let mut a_eq = Vec::new();
        let mut b_eq = Vec::new();
        let mut eq_rows = Vec::new();
        for (k, pair) in spec.od_pairs.iter().enumerate() {
            a_eq.push(balance_row(k, pair.origin));
            b_eq.push(b[k]);
            eq_rows.push(RowId::Origin { pair: OdId(k) });
        }
        for (k, pair) in spec.od_pairs.iter().enumerate() {
            a_eq.push(balance_row(k, pair.destination));
            b_eq.push(-b[k]);
            eq_rows.push(RowId::Destination { pair: OdId(k) });
        }
        for (k, pair) in spec.od_pairs.iter().enumerate() {
            for i in 0..spec.num_nodes() {
                let node = NodeId(i);
                if node != pair.origin && node != pair.destination {
                    a_eq.push(balance_row(k, node));
                    b_eq.push(0.0);
                    eq_rows.push(RowId::Transfer {
                        pair: OdId(k),
                        node,
                    });
                }
            }
        }

        let mut d_ineq = Vec::new();
        let mut e_ineq = Vec::new();
        let mut ineq_rows = Vec::new();
        for a in 0..n_arcs {
            let mut row = vec![0.0; n_cols];
            for k in 0..k_count {
                row[col(k, a)] = 1.0;
            }
            d_ineq.push(row);
            e_ineq.push(design.arc_capacity(spec, ArcId(a)));
            ineq_rows.push(RowId::ChannelCapacity { arc: ArcId(a) });
        }
        for (i, node) in spec.nodes.iter().enumerate() {
            let mut row = vec![0.0; n_cols];
            for (a, arc) in spec.arcs.iter().enumerate() {
                let touches = f64::from(u8::from(arc.tail.0 == i) + u8::from(arc.head.0 == i));
                if touches > 0.0 {
                    for k in 0..k_count {
                        row[col(k, a)] = touches;
                    }
                }
            }
            d_ineq.push(row);
            e_ineq.push(if design.open[i] {
                node.airport_capacity
            } else {
                big_m
            });
            ineq_rows.push(RowId::Airport { node: NodeId(i) });
        }
        let open_count = battery.open_count(spec, design);
        for k in 0..k_count {
            let mut row = vec![0.0; n_cols];
            for (a, arc) in spec.arcs.iter().enumerate() {
                row[col(k, a)] = arc.energy;
            }
            d_ineq.push(row);
            e_ineq.push(b[k] * spec.battery_boost * open_count);
            ineq_rows.push(RowId::Battery { pair: OdId(k) });
        }

        Ok(ExtensiveForm {
            num_pairs: k_count,
            num_arcs: n_arcs,
            cost,
            a_eq,
            b_eq,
            eq_rows,
            d_ineq,
            e_ineq,
            ineq_rows,
            columns,
            big_m,
        })
    }

    pub fn column(&self, pair: OdId, arc: ArcId) -> usize {
        pair.0 * self.num_arcs + arc.0
    }

    pub fn to_lp(&self) -> LpProblem {
        let mut p = LpProblem::new(self.cost.clone());
        p.eq_rows = self.a_eq.clone();
        p.eq_rhs = self.b_eq.clone();
        p.le_rows = self.d_ineq.clone();
        p.le_rhs = self.e_ineq.clone();
        p
    }

    pub fn evaluate_constraints(&self, x: &[f64]) -> Residuals {
        assert_eq!(x.len(), self.cost.len(), "flow vector dimension");
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
        let mut r = Residuals::default();
        for (row, rhs) in self.a_eq.iter().zip(&self.b_eq) {
            r.equality = r.equality.max((dot(row) - rhs).abs());
        }
        for ((row, rhs), id) in self.d_ineq.iter().zip(&self.e_ineq).zip(&self.ineq_rows) {
            let v = (dot(row) - rhs).max(0.0);
            let slot = match id {
                RowId::ChannelCapacity { .. } => &mut r.channel,
                RowId::Airport { .. } => &mut r.airport,
                _ => &mut r.battery,
            };
            *slot = slot.max(v);
        }
        r.negativity = x.iter().fold(0.0, |m, v| m.max(-v));
        r
    }

    /// Text dump in CPLEX LP format, with names derived from the index maps.
    pub fn to_lp_text(&self, spec: &NetworkSpec) -> String {
        let var = |c: usize| {
            let (k, a) = self.columns[c];
            let arc = &spec.arcs[a.0];
            format!("x_k{}_{}_{}", k.0, arc.tail.0, arc.head.0)
        };
        let row_name = |id: &RowId| match *id {
            RowId::Origin { pair } => format!("origin_k{}", pair.0),
            RowId::Destination { pair } => format!("dest_k{}", pair.0),
            RowId::Transfer { pair, node } => format!("transfer_k{}_n{}", pair.0, node.0),
            RowId::ChannelCapacity { arc } => format!("channel_a{}", arc.0),
            RowId::Airport { node } => format!("airport_n{}", node.0),
            RowId::Battery { pair } => format!("battery_k{}", pair.0),
        };
        let terms = |row: &[f64]| {
            let mut s = String::new();
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    let sign = if v < 0.0 { "-" } else { "+" };
                    let _ = write!(s, " {sign} {} {}", v.abs(), var(c));
                }
            }
            if s.is_empty() {
                s.push_str(" 0 ");
                s.push_str(&var(0));
            }
            s
        };
        let mut out = String::from("Minimize\n obj:");
        out.push_str(&terms(&self.cost));
        out.push_str("\nSubject To\n");
        for ((row, rhs), id) in self.a_eq.iter().zip(&self.b_eq).zip(&self.eq_rows) {
            let _ = writeln!(out, " {}:{} = {}", row_name(id), terms(row), rhs);
        }
        for ((row, rhs), id) in self.d_ineq.iter().zip(&self.e_ineq).zip(&self.ineq_rows) {
            let _ = writeln!(out, " {}:{} <= {}", row_name(id), terms(row), rhs);
        }
        out.push_str("End\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::single_arc;

    #[test]
    fn single_arc_incidence() {
        let (spec, _) = single_arc(2.0, 100.0, 10.0);
        let design = Design::full(&spec);
        let f = ExtensiveForm::build(&spec, &design, &[10.0], BatteryRhsMode::Literal, 40.0).unwrap();
        assert_eq!(f.a_eq, vec![vec![1.0], vec![-1.0]]);
        assert_eq!(f.b_eq, vec![10.0, -10.0]);
        assert_eq!(f.d_ineq.len(), 1 + 2 + 1);
    }

    #[test]
    fn airport_rhs_by_case() {
        let (mut spec, _) = single_arc(2.0, 100.0, 10.0);
        spec.nodes[0].airport_capacity = 100.0;
        let mut design = Design::full(&spec);
        let f = ExtensiveForm::build(&spec, &design, &[10.0], BatteryRhsMode::Literal, 777.0).unwrap();
        assert_eq!(f.e_ineq[1], 100.0);
        design.open[0] = false;
        let f = ExtensiveForm::build(&spec, &design, &[10.0], BatteryRhsMode::Literal, 777.0).unwrap();
        assert_eq!(f.e_ineq[1], 777.0);
    }

    #[test]
    fn zero_flow_residual_is_max_demand() {
        let (spec, _) = single_arc(2.0, 100.0, 10.0);
        let f = ExtensiveForm::build(&spec, &Design::full(&spec), &[7.5], BatteryRhsMode::Literal, 40.0)
            .unwrap();
        assert_eq!(f.evaluate_constraints(&[0.0]).equality, 7.5);
        assert_eq!(f.evaluate_constraints(&[7.5]).max(), 0.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let (spec, _) = single_arc(2.0, 100.0, 10.0);
        let err = ExtensiveForm::build(&spec, &Design::full(&spec), &[1.0, 2.0], BatteryRhsMode::Literal, 1.0);
        assert_eq!(err, Err(FormError::Dimension { expected: 1, got: 2 }));
    }

    #[test]
    fn lp_text_mentions_every_row() {
        let (spec, _) = single_arc(2.0, 100.0, 10.0);
        let f = ExtensiveForm::build(&spec, &Design::full(&spec), &[3.0], BatteryRhsMode::Literal, 40.0)
            .unwrap();
        let text = f.to_lp_text(&spec);
        assert!(text.starts_with("Minimize"));
        assert_eq!(text.matches(':').count(), 1 + f.a_eq.len() + f.d_ineq.len());
    }
}
