//! Thread-pool versus single-thread timings for the data-parallel kernels.
//! Build with `--no-default-features` to time the purely sequential code path.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use s2qn::curvature::{efim, subsampled_hessian, SampleKind, SampleSet};
use s2qn::dataio::{synth_logistic, ConditionProfile};
use s2qn::models::{LogisticRegression, Objective};
use s2qn::parallel::with_single_thread;
use s2qn::solver::{direction_smw, KronSolver};
use s2qn::validation::{random_spd, random_vec, rng, smw_instance};

fn lr_model(n: usize, samples: usize) -> LogisticRegression {
    let (data, _) = synth_logistic(n, samples, ConditionProfile::default(), 3).unwrap();
    LogisticRegression::new(data, 1e-3).unwrap()
}

fn both<F: Fn() + Send + Sync>(c: &mut Criterion, group: &str, size: usize, f: F) {
    let mut g = c.benchmark_group(group);
    g.bench_with_input(BenchmarkId::new("pool", size), &size, |b, _| b.iter(&f));
    g.bench_with_input(BenchmarkId::new("single", size), &size, |b, _| b.iter(|| with_single_thread(&f)));
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let model = lr_model(100, 4000);
    let theta = random_vec(&mut rng(1), 100);
    let all: Vec<usize> = (0..4000).collect();
    let hs = SampleSet::full(4000, SampleKind::Hessian);

    both(c, "lr_gradient", 4000, || {
        black_box(model.value_grad(&theta, &all).unwrap());
    });
    both(c, "hessian_accumulation", 4000, || {
        black_box(subsampled_hessian(&model, &theta, &hs).unwrap());
    });
    let es = SampleSet { indices: (0..64).collect(), kind: SampleKind::Hessian, seed: 0 };
    both(c, "efim_low_rank", 64, || {
        black_box(efim(&model, &theta, &es, true).unwrap());
    });

    let (sys, g) = smw_instance(&mut rng(2), 400, 10);
    both(c, "smw_direction", 400, || {
        black_box(direction_smw(&sys, &g).unwrap());
    });

    let mut r = rng(4);
    let a = random_spd(&mut r, 60, 0.1);
    let m = random_spd(&mut r, 40, 0.1);
    let x = random_vec(&mut r, 2400);
    both(c, "kron_solve", 2400, || {
        let s = KronSolver::new(&a, &m, 0.5).unwrap();
        black_box(s.solve(&x));
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernels
}
criterion_main!(benches);
