use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use swquad::quadrature::nodes_iid;
use swquad::transport::{estimate_sw, project_measure, wasserstein_1d, SwIntegrand};
use swquad::{Seed, UnitVector};
use swquad_bench::toy_pair;

fn bench_wasserstein_1d(c: &mut Criterion) {
    let mut group = c.benchmark_group("wasserstein_1d");
    for &m in &[100usize, 1000, 10_000] {
        let (mu, nu) = toy_pair(3, m);
        let theta = UnitVector::axis(3, 0).unwrap();
        let a = project_measure(&mu, &theta).unwrap();
        let b = project_measure(&nu, &theta).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(m), &m, |bench, _| {
            bench.iter(|| wasserstein_1d(black_box(&a), black_box(&b), 2.0).unwrap());
        });
    }
    group.finish();
}

fn bench_integrand_eval(c: &mut Criterion) {
    let mut group = c.benchmark_group("sw_integrand_eval");
    for &d in &[3usize, 10] {
        let (mu, nu) = toy_pair(d, 1000);
        let f = SwIntegrand::new(&mu, &nu, 2.0).unwrap();
        let theta = UnitVector::axis(d, 0).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |bench, _| {
            bench.iter(|| black_box(f.eval(black_box(&theta))));
        });
    }
    group.finish();
}

fn bench_estimate_sw(c: &mut Criterion) {
    let (mu, nu) = toy_pair(3, 500);
    let nodes = nodes_iid(3, 1000, Seed::new(7)).unwrap();
    c.bench_function("estimate_sw_1000_nodes", |bench| {
        bench.iter(|| estimate_sw(black_box(&mu), black_box(&nu), 2.0, &nodes).unwrap());
    });
}

criterion_group!(benches, bench_wasserstein_1d, bench_integrand_eval, bench_estimate_sw);
criterion_main!(benches);
