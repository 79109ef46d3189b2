use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use idesmc_bench::volterra_problem;
use idesmc_core::equiv_control::{direct_volterra_solve, neumann_solve};

fn solvers(c: &mut Criterion) {
    let mut group = c.benchmark_group("volterra");
    group.sample_size(10);
    for steps in [250usize, 1000] {
        let problem = volterra_problem(1.0 / steps as f64).expect("fixture");
        group.bench_with_input(BenchmarkId::new("neumann", steps), &problem, |b, p| {
            b.iter(|| neumann_solve(p, None))
        });
        group.bench_with_input(BenchmarkId::new("direct", steps), &problem, |b, p| {
            b.iter(|| direct_volterra_solve(p).expect("solve"))
        });
    }
    group.finish();
}

criterion_group!(benches, solvers);
criterion_main!(benches);
