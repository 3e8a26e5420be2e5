//! Engine against oracle on random small instances.

use uamn_core::dro::objective::dro_objective;
use uamn_core::dro::worst_case::{worst_case_sample, WorstCaseEntry};
use uamn_core::dro::{solve_enumeration, DesignSpace, Recourse, VertexState};
use uamn_core::extensive::BatteryRhsMode;
use uamn_core::linprog::rel_close;
use uamn_core::model::{DroConfig, Tolerances, WorstCaseStrategy};
use uamn_core::oracle::{oracle_design, oracle_second_stage, oracle_worst_case, random_instance, RandomShape};

const INSTANCES: u64 = 100;

fn config(beta: f64) -> DroConfig {
    DroConfig {
        theta: 2.0,
        beta,
        ..DroConfig::default()
    }
}

#[test]
fn second_stage_matches_oracle() {
    for seed in 0..INSTANCES {
        let (spec, demand) = random_instance(seed, RandomShape::default());
        let big_m = spec.effective_big_m(&demand);
        for design in DesignSpace::new(&spec, &demand).designs(&spec).iter().take(8) {
            let r = Recourse::new(&spec, design, BatteryRhsMode::Literal, big_m);
            for b in demand.samples.iter().chain([&demand.upper]) {
                let engine = r.solve(b).value;
                let full = r.solve_with_duals(b).value;
                let oracle = oracle_second_stage(&spec, design, b, BatteryRhsMode::Literal, big_m);
                assert!(rel_close(engine, oracle, 1e-6), "seed {seed}: {engine} vs {oracle}");
                assert!(rel_close(full, oracle, 1e-6), "seed {seed}: {full} vs {oracle}");
            }
        }
    }
}

fn check_vertex(e: &WorstCaseEntry, demand: &uamn_core::DemandModel) {
    let j = e.sample;
    for k in 0..demand.num_pairs() {
        let expected = match e.pattern.0[k] {
            VertexState::Zero => demand.samples[j][k],
            VertexState::Plus => demand.upper[k],
            VertexState::Minus => demand.lower[k],
        };
        assert_eq!(e.b_star[k], expected);
        let v = e.b_star[k];
        assert!(v == demand.lower[k] || v == demand.upper[k] || v == demand.samples[j][k]);
    }
}

#[test]
fn worst_case_strategies_agree_with_oracle() {
    let tol = Tolerances::default();
    for seed in 0..INSTANCES {
        let (spec, demand) = random_instance(seed, RandomShape::default());
        let big_m = spec.effective_big_m(&demand);
        let designs = DesignSpace::new(&spec, &demand).designs(&spec);
        let design = designs.last().unwrap();
        for beta in [0.0, 1.5, 4.0, 50.0] {
            for j in 0..demand.num_samples() {
                let run = |s| worst_case_sample(&spec, design, &demand, j, beta, s, BatteryRhsMode::Literal, &tol);
                let primal = run(WorstCaseStrategy::PrimalEnum);
                let dual = run(WorstCaseStrategy::DualEnum);
                let pruned = run(WorstCaseStrategy::Pruned);
                let (ov, ob) = oracle_worst_case(
                    &spec, design, &demand.samples[j], beta, &demand.lower, &demand.upper,
                    BatteryRhsMode::Literal, big_m,
                )
                .unwrap();
                for e in [&primal, &dual, &pruned] {
                    check_vertex(e, &demand);
                    assert!(rel_close(e.value, ov, 1e-6), "seed {seed} beta {beta}: {} vs {ov}", e.value);
                }
                assert_eq!(primal.b_star, ob, "seed {seed} beta {beta}");
                assert_eq!(pruned.b_star, ob, "seed {seed} beta {beta}");
            }
        }
    }
}

#[test]
fn enumeration_matches_oracle_design() {
    for seed in 0..INSTANCES {
        let (spec, demand) = random_instance(seed, RandomShape::default());
        let cfg = config(3.0);
        let engine = solve_enumeration(&spec, &demand, &cfg);
        let oracle = oracle_design(&spec, &demand, &cfg);
        match (engine, oracle) {
            (Ok(e), Ok(o)) => {
                assert_eq!(e.design, o.design, "seed {seed}");
                assert!(rel_close(e.objective, o.objective, 1e-6), "seed {seed}: {} vs {}", e.objective, o.objective);
                let again = dro_objective(&spec, &demand, &e.design, &cfg);
                assert!(rel_close(again.objective, e.objective, 1e-9));
            }
            (Err(e), Err(o)) => assert_eq!(e, o, "seed {seed}"),
            (e, o) => panic!("seed {seed}: engine {e:?} vs oracle {o:?}"),
        }
    }
}
