use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use jamswarm_bench::{kriging_data, reference_assignment, reference_frame};
use jamswarm_core::ibaa::{optimize_bandwidth, BandwidthProblem};
use jamswarm_core::kriging::{Kriging, KrigingConfig};
use jamswarm_core::{BudgetAccountant, InnerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn utility(c: &mut Criterion) {
    let ctx = reference_frame();
    let assignment = reference_assignment();
    let problem = BandwidthProblem::new(&assignment, &ctx);
    let x = problem.equal_split();
    c.bench_function("utility/12x3", |b| b.iter(|| problem.utility(black_box(&x))));
    c.bench_function("violation/12x3", |b| b.iter(|| problem.violation(black_box(&x))));
}

fn inner(c: &mut Criterion) {
    let ctx = reference_frame();
    let assignment = reference_assignment();
    let cfg = InnerConfig::default();
    let mut group = c.benchmark_group("ibaa");
    group.sample_size(20);
    group.bench_function("default_run", |b| {
        b.iter_batched(
            || ChaCha8Rng::seed_from_u64(7),
            |mut rng| optimize_bandwidth(&assignment, &ctx, &cfg, &BudgetAccountant::unlimited(), &mut rng),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

fn kriging(c: &mut Criterion) {
    let mut group = c.benchmark_group("kriging");
    group.sample_size(20);
    for n in [20, 60, 120] {
        let (x, y) = kriging_data(n, 3);
        group.bench_function(format!("fit/{n}"), |b| {
            b.iter(|| Kriging::fit(x.clone(), y.clone(), KrigingConfig::default()).unwrap())
        });
        let model = Kriging::fit(x.clone(), y.clone(), KrigingConfig::default()).unwrap();
        group.bench_function(format!("predict/{n}"), |b| b.iter(|| model.predict(black_box(&x[0]))));
    }
    group.finish();
}

criterion_group!(benches, utility, inner, kriging);
criterion_main!(benches);
