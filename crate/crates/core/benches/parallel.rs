use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use uamn_core::dro::{dro_objective, solve_enumeration};
use uamn_core::oracle::{random_instance, RandomShape};
use uamn_core::par::ExecPolicy;
use uamn_core::{Design, DroConfig};

fn policies() -> [(&'static str, ExecPolicy); 2] {
    [("sequential", ExecPolicy::Sequential), ("parallel", ExecPolicy::Parallel)]
}

fn enumeration(c: &mut Criterion) {
    let shape = RandomShape {
        max_nodes: 5,
        max_pairs: 3,
        max_samples: 4,
        max_arcs: 8,
    };
    let (spec, demand) = random_instance(11, shape);
    let mut group = c.benchmark_group("solve_enumeration");
    group.sample_size(10);
    for (name, exec) in policies() {
        let config = DroConfig {
            exec,
            ..DroConfig::default().with_theta_beta(1.0, 5.0)
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &config, |b, cfg| {
            b.iter(|| solve_enumeration(&spec, &demand, cfg))
        });
    }
    group.finish();
}

fn objective(c: &mut Criterion) {
    let shape = RandomShape {
        max_nodes: 5,
        max_pairs: 4,
        max_samples: 8,
        max_arcs: 10,
    };
    let (spec, demand) = random_instance(5, shape);
    let design = Design::full(&spec);
    let mut group = c.benchmark_group("dro_objective");
    for (name, exec) in policies() {
        let config = DroConfig {
            exec,
            ..DroConfig::default().with_theta_beta(1.0, 5.0)
        };
        group.bench_with_input(BenchmarkId::from_parameter(name), &config, |b, cfg| {
            b.iter(|| dro_objective(&spec, &demand, &design, cfg))
        });
    }
    group.finish();
}

criterion_group!(benches, enumeration, objective);
criterion_main!(benches);
