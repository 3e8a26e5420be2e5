//! The recourse value `Q(η, b)`.

use serde::{Deserialize, Serialize};

use crate::extensive::{BatteryRhsMode, ExtensiveForm, RowId};
use crate::linprog::{solve_lp, LpProblem, LpStatus};
use crate::model::{Design, NetworkSpec};

/// Outcome of one second-stage solve. `value` is `+∞` when infeasible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondStage {
    pub status: LpStatus,
    pub value: f64,
    /// Flows in the extensive-form column order (empty unless optimal).
    pub flows: Vec<f64>,
    /// Equality duals (empty on the value-only path).
    pub mu: Vec<f64>,
    /// Inequality duals (empty on the value-only path).
    pub lambda: Vec<f64>,
    pub iterations: usize,
}

impl SecondStage {
    fn infeasible() -> Self {
        SecondStage {
            status: LpStatus::Infeasible,
            value: f64::INFINITY,
            flows: Vec::new(),
            mu: Vec::new(),
            lambda: Vec::new(),
            iterations: 0,
        }
    }

    pub fn is_feasible(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// A design's second-stage structure, reused across demand vectors.
///
/// The demand only enters the right-hand sides, so the full form is built
/// once and only the `b`-dependent entries are refreshed per solve.
#[derive(Clone, Debug)]
pub struct Recourse {
    form: ExtensiveForm,
    open_count: f64,
    battery_boost: f64,
    /// Arcs with installed capacity.
    usable_arc: Vec<bool>,
}

impl Recourse {
    pub fn new(spec: &NetworkSpec, design: &Design, battery: BatteryRhsMode, big_m: f64) -> Self {
        let zeros = vec![0.0; spec.num_pairs()];
        let form = ExtensiveForm::build(spec, design, &zeros, battery, big_m)
            .expect("zero demand vector has the right length");
        let usable_arc = (0..spec.num_arcs())
            .map(|a| form.e_ineq[a] > 0.0)
            .collect();
        Recourse {
            form,
            open_count: battery.open_count(spec, design),
            battery_boost: spec.battery_boost,
            usable_arc,
        }
    }

    pub fn form(&self) -> &ExtensiveForm {
        &self.form
    }

    fn rhs_for(&self, b: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut eq = self.form.b_eq.clone();
        for (row, id) in eq.iter_mut().zip(&self.form.eq_rows) {
            match *id {
                RowId::Origin { pair } => *row = b[pair.0],
                RowId::Destination { pair } => *row = -b[pair.0],
                _ => {}
            }
        }
        let mut le = self.form.e_ineq.clone();
        for (row, id) in le.iter_mut().zip(&self.form.ineq_rows) {
            if let RowId::Battery { pair } = *id {
                *row = b[pair.0] * self.battery_boost * self.open_count;
            }
        }
        (eq, le)
    }

    /// The full LP at demand `b`.
    pub fn lp(&self, b: &[f64]) -> LpProblem {
        let (eq, le) = self.rhs_for(b);
        let mut p = self.form.to_lp();
        p.eq_rhs = eq;
        p.le_rhs = le;
        p
    }

    /// Solves the full LP and reports duals alongside the flows.
    pub fn solve_with_duals(&self, b: &[f64]) -> SecondStage {
        let p = self.lp(b);
        let s = solve_lp(&p);
        match s.status {
            LpStatus::Optimal => SecondStage {
                status: s.status,
                value: s.objective,
                flows: s.x,
                mu: s.mu,
                lambda: s.lambda,
                iterations: s.iterations,
            },
            LpStatus::Infeasible => SecondStage {
                iterations: s.iterations,
                ..SecondStage::infeasible()
            },
            status => SecondStage {
                status,
                value: f64::NAN,
                iterations: s.iterations,
                ..SecondStage::infeasible()
            },
        }
    }

    /// Value and flows only, on an LP with unusable columns and empty rows
    /// removed.
    pub fn solve(&self, b: &[f64]) -> SecondStage {
        let f = &self.form;
        let (eq, le) = self.rhs_for(b);
        let keep: Vec<usize> = (0..f.cost.len())
            .filter(|&c| {
                let (k, a) = f.columns[c];
                self.usable_arc[a.0] && b[k.0] > 0.0
            })
            .collect();
        let mut p = LpProblem::new(keep.iter().map(|&c| f.cost[c]).collect());
        for (row, &rhs) in f.a_eq.iter().zip(&eq) {
            let r: Vec<f64> = keep.iter().map(|&c| row[c]).collect();
            if r.iter().all(|&v| v == 0.0) {
                if rhs != 0.0 {
                    return SecondStage::infeasible();
                }
                continue;
            }
            p.add_eq(r, rhs);
        }
        for (row, &rhs) in f.d_ineq.iter().zip(&le) {
            let r: Vec<f64> = keep.iter().map(|&c| row[c]).collect();
            if r.iter().all(|&v| v == 0.0) {
                if rhs < 0.0 {
                    return SecondStage::infeasible();
                }
                continue;
            }
            p.add_le(r, rhs);
        }
        if keep.is_empty() {
            return SecondStage {
                status: LpStatus::Optimal,
                value: 0.0,
                flows: vec![0.0; f.cost.len()],
                mu: Vec::new(),
                lambda: Vec::new(),
                iterations: 0,
            };
        }
        let s = solve_lp(&p);
        match s.status {
            LpStatus::Optimal => {
                let mut flows = vec![0.0; f.cost.len()];
                for (&c, &v) in keep.iter().zip(&s.x) {
                    flows[c] = v;
                }
                SecondStage {
                    status: LpStatus::Optimal,
                    value: s.objective,
                    flows,
                    mu: Vec::new(),
                    lambda: Vec::new(),
                    iterations: s.iterations,
                }
            }
            LpStatus::Infeasible => SecondStage {
                iterations: s.iterations,
                ..SecondStage::infeasible()
            },
            status => SecondStage {
                status,
                value: f64::NAN,
                iterations: s.iterations,
                ..SecondStage::infeasible()
            },
        }
    }
}

/// `Q(η, b)` with attaining flows and duals.
pub fn second_stage_value(
    spec: &NetworkSpec,
    design: &Design,
    b: &[f64],
    battery: BatteryRhsMode,
    big_m: f64,
) -> SecondStage {
    Recourse::new(spec, design, battery, big_m).solve_with_duals(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::single_arc;
    use crate::model::NodeId;

    #[test]
    fn single_arc_value() {
        let (spec, _) = single_arc(2.0, 100.0, 10.0);
        let s = second_stage_value(&spec, &Design::full(&spec), &[10.0], BatteryRhsMode::Literal, 40.0);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.value - 20.0).abs() < 1e-9);
        assert!((s.flows[0] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn reduced_and_full_paths_agree() {
        let (spec, _) = single_arc(3.0, 100.0, 10.0);
        let r = Recourse::new(&spec, &Design::full(&spec), BatteryRhsMode::Literal, 40.0);
        for b in [0.0, 1.0, 7.5, 90.0, 150.0] {
            let a = r.solve(&[b]);
            let c = r.solve_with_duals(&[b]);
            assert_eq!(a.status, c.status, "b = {b}");
            if a.is_feasible() {
                assert!((a.value - c.value).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn no_channels_means_infeasible() {
        let (spec, _) = single_arc(2.0, 100.0, 10.0);
        let mut d = Design::full(&spec);
        d.channels[0][0] = 0;
        let s = second_stage_value(&spec, &d, &[10.0], BatteryRhsMode::Literal, 40.0);
        assert_eq!(s.status, LpStatus::Infeasible);
        assert_eq!(s.value, f64::INFINITY);
        assert!(!Recourse::new(&spec, &d, BatteryRhsMode::Literal, 40.0).solve(&[10.0]).is_feasible());
    }

    #[test]
    fn closed_network_fails_battery() {
        let (spec, _) = single_arc(2.0, 100.0, 10.0);
        let mut d = Design::full(&spec);
        d.open = vec![false; 2];
        assert_eq!(d.open_nodes(), Vec::<NodeId>::new());
        let s = second_stage_value(&spec, &d, &[10.0], BatteryRhsMode::Literal, 40.0);
        assert!(!s.is_feasible());
    }
}
