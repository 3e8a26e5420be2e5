//! Invariants checked on random data against independent computations.

use proptest::prelude::*;
use uamn_core::dro::{beta_saturation, dro_objective, saa_objective, Recourse};
use uamn_core::extensive::{BatteryRhsMode, ExtensiveForm};
use uamn_core::linprog::{solve_bb, solve_lp, LpProblem, LpStatus};
use uamn_core::oracle::{bland_lp, random_instance, RandomShape};
use uamn_core::{Design, DroConfig};

fn small_lp() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>)> {
    (2usize..5, 1usize..4).prop_flat_map(|(n, m)| {
        (
            proptest::collection::vec(-5.0f64..5.0, n),
            proptest::collection::vec(proptest::collection::vec(0.0f64..4.0, n), m),
            proptest::collection::vec(1.0f64..10.0, m),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// Bounded problems `min cx, Dx ≤ e, 0 ≤ x ≤ 3`: primal equals dual and
    /// matches a textbook Bland simplex.
    #[test]
    fn strong_duality_and_agreement((c, d, e) in small_lp()) {
        let n = c.len();
        let mut p = LpProblem::new(c.clone());
        for (row, rhs) in d.iter().zip(&e) {
            p.add_le(row.clone(), *rhs);
        }
        p.upper = vec![3.0; n];
        let s = solve_lp(&p);
        prop_assert_eq!(s.status, LpStatus::Optimal);
        let dual = s.dual_objective(&p);
        prop_assert!((s.objective - dual).abs() <= 1e-6 * s.objective.abs().max(1.0));
        prop_assert!(s.reduced_costs(&p).iter().zip(&s.x).all(|(r, x)| *x < 3.0 - 1e-7 || *r <= 1e-7));

        let mut dd = d.clone();
        let mut ee = e.clone();
        for i in 0..n {
            let mut row = vec![0.0; n];
            row[i] = 1.0;
            dd.push(row);
            ee.push(3.0);
        }
        let (v, _) = bland_lp(&c, &[], &[], &dd, &ee).expect("bounded");
        prop_assert!((s.objective - v).abs() <= 1e-6 * v.abs().max(1.0));
    }

    /// Integer optimum over a box equals brute force.
    #[test]
    fn branch_and_bound_matches_brute_force((c, d, e) in small_lp()) {
        let n = c.len();
        let mut p = LpProblem::new(c.clone());
        for (row, rhs) in d.iter().zip(&e) {
            p.add_le(row.clone(), *rhs);
        }
        p.upper = vec![2.0; n];
        let vars: Vec<usize> = (0..n).collect();
        let s = solve_bb(&p, &vars);
        let mut best = f64::INFINITY;
        for code in 0..3usize.pow(n as u32) {
            let x: Vec<f64> = (0..n).map(|i| ((code / 3usize.pow(i as u32)) % 3) as f64).collect();
            let ok = d.iter().zip(&e).all(|(row, rhs)| row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() <= rhs + 1e-9);
            if ok {
                best = best.min(c.iter().zip(&x).map(|(a, b)| a * b).sum());
            }
        }
        prop_assert_eq!(s.status, LpStatus::Optimal);
        prop_assert!((s.objective - best).abs() <= 1e-6 * best.abs().max(1.0));
    }

    /// Recourse cost never decreases when demand grows.
    #[test]
    fn recourse_is_monotone(seed in 0u64..500, scale in 0.0f64..1.0) {
        let (spec, demand) = random_instance(seed, RandomShape::default());
        let design = Design::full(&spec);
        let r = Recourse::new(&spec, &design, BatteryRhsMode::Literal, spec.effective_big_m(&demand));
        let hi = &demand.upper;
        let lo: Vec<f64> = hi.iter().map(|u| u * scale).collect();
        let (a, b) = (r.solve(&lo), r.solve(hi));
        if b.is_feasible() {
            prop_assert!(a.is_feasible());
            prop_assert!(a.value <= b.value + 1e-7 * b.value.abs().max(1.0));
        }
    }

    /// The robust objective is affine in the costs: scaling every cost by
    /// `s` and the penalty multiplier by `s` scales the objective by `s`.
    #[test]
    fn objective_scales_with_costs(seed in 0u64..300, s in 0.5f64..4.0) {
        let (spec, demand) = random_instance(seed, RandomShape::default());
        let design = Design::full(&spec);
        let cfg = DroConfig::default().with_theta_beta(1.0, 5.0);
        let base = dro_objective(&spec, &demand, &design, &cfg);
        let mut scaled = spec.clone();
        for n in &mut scaled.nodes {
            n.infrastructure_cost *= s;
            n.capacity_unit_cost *= s;
        }
        for a in &mut scaled.arcs {
            a.channels.iter_mut().for_each(|c| c.cost *= s);
            a.transport_cost.iter_mut().for_each(|c| *c *= s);
        }
        let scaled_eval = dro_objective(&scaled, &demand, &design, &cfg.clone().with_theta_beta(1.0, 5.0 * s));
        if base.is_feasible() {
            prop_assert!((scaled_eval.objective - s * base.objective).abs() <= 1e-6 * base.objective.abs().max(1.0) * s);
        } else {
            prop_assert!(!scaled_eval.is_feasible());
        }
    }

    /// Breakdown terms add up to the objective.
    #[test]
    fn breakdown_sums_to_objective(seed in 0u64..300) {
        let (spec, demand) = random_instance(seed, RandomShape::default());
        let design = Design::full(&spec);
        let e = dro_objective(&spec, &demand, &design, &DroConfig::default().with_theta_beta(2.0, 3.0));
        if e.is_feasible() {
            prop_assert!((e.breakdown.total() - e.objective).abs() <= 1e-6 * e.objective.abs().max(1.0));
        }
    }

    /// Larger radius never lowers the objective at fixed multiplier.
    #[test]
    fn objective_grows_with_radius(seed in 0u64..300, t in 0.0f64..5.0) {
        let (spec, demand) = random_instance(seed, RandomShape::default());
        let design = Design::full(&spec);
        let a = dro_objective(&spec, &demand, &design, &DroConfig::default().with_theta_beta(t, 4.0));
        let b = dro_objective(&spec, &demand, &design, &DroConfig::default().with_theta_beta(t + 1.0, 4.0));
        prop_assert!(a.objective <= b.objective + 1e-9);
    }
}

#[test]
fn saturated_multiplier_pins_demand_to_samples() {
    for seed in 0..50 {
        let (spec, demand) = random_instance(seed, RandomShape::default());
        let design = Design::full(&spec);
        let beta = beta_saturation(&spec);
        let cfg = DroConfig::default().with_theta_beta(0.0, beta);
        let robust = dro_objective(&spec, &demand, &design, &cfg);
        let saa = saa_objective(&spec, &demand, &design, &cfg);
        if !robust.is_feasible() {
            continue;
        }
        for (e, s) in robust.worst_case.iter().zip(&demand.samples) {
            assert_eq!(&e.b_star, s, "seed {seed}");
        }
        assert!((robust.objective - saa.objective).abs() <= 1e-9 * saa.objective.abs().max(1.0));
    }
}

#[test]
fn extensive_form_dimensions_and_flow_balance() {
    for seed in 0..50 {
        let (spec, demand) = random_instance(seed, RandomShape::default());
        let design = Design::full(&spec);
        let b = &demand.upper;
        let f = ExtensiveForm::build(&spec, &design, b, BatteryRhsMode::Literal, 1e4).unwrap();
        let (k, a, v) = (spec.num_pairs(), spec.num_arcs(), spec.num_nodes());
        assert_eq!(f.cost.len(), k * a);
        assert_eq!(f.a_eq.len(), k * v);
        assert_eq!(f.d_ineq.len(), a + v + k);
        // Balance rows of one pair sum to zero over all nodes.
        for p in 0..k {
            let rows: Vec<usize> = (0..f.eq_rows.len())
                .filter(|&r| f.a_eq[r].iter().enumerate().any(|(c, x)| *x != 0.0 && c / a == p))
                .collect();
            let mut total = vec![0.0; k * a];
            for r in &rows {
                total.iter_mut().zip(&f.a_eq[*r]).for_each(|(t, x)| *t += x);
            }
            let rhs: f64 = rows.iter().map(|r| f.b_eq[*r]).sum();
            if rows.len() == v {
                assert!(total.iter().all(|x| x.abs() < 1e-12));
                assert!(rhs.abs() < 1e-12);
            }
        }
    }
}
