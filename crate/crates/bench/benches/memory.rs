use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use idesmc_bench::{exponential_ide, initial_state};
use idesmc_core::integrator::euler_ide;
use idesmc_core::{HistoryMode, SimConfig};

fn history_modes(c: &mut Criterion) {
    let (sys, kernel) = exponential_ide().expect("fixture");
    let mut group = c.benchmark_group("memory");
    group.sample_size(10);
    for steps in [500usize, 2000, 8000] {
        let h = 1.0 / steps as f64;
        for (label, mode) in [
            ("full_history", HistoryMode::FullHistory),
            ("recurrence", HistoryMode::ExponentialRecurrence),
        ] {
            let cfg = SimConfig::new(0.0, 1.0, h, initial_state()).with_history(mode);
            group.bench_with_input(BenchmarkId::new(label, steps), &cfg, |b, cfg| {
                b.iter(|| euler_ide(&sys, &kernel, cfg).expect("run"))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, history_modes);
criterion_main!(benches);
