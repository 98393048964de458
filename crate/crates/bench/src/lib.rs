//! Benchmark bodies shared by the criterion targets.

use std::hint::black_box;

use criterion::Criterion;
use tfqkd_core::{
    analyze, expected_observables, optimize, Axis, ChannelModel, MonteCarlo, ProtocolParams,
    SearchSpace,
};

fn reference() -> (ProtocolParams, ChannelModel) {
    (
        ProtocolParams::new(0.05, 0.2, 0.5, 0.5),
        ChannelModel::paper(100.0, 0.1),
    )
}

pub fn analytic_rate(c: &mut Criterion) {
    let (params, ch) = reference();
    c.bench_function("analytic_rate", |b| {
        b.iter(|| {
            let counts = expected_observables(black_box(&params), black_box(&ch)).unwrap();
            analyze(&counts, &params).unwrap().rate
        })
    });
}

pub fn monte_carlo(c: &mut Criterion) {
    let (params, ch) = reference();
    let mc = MonteCarlo::new(params.with_windows(1 << 20), ch);
    let mut group = c.benchmark_group("monte_carlo");
    group.sample_size(10);
    group.bench_function("1Mi_windows", |b| b.iter(|| mc.run(black_box(7)).unwrap()));
    group.finish();
}

pub fn optimizer(c: &mut Criterion) {
    let space = SearchSpace {
        mu: Axis::log(1e-4, 1.5, 10),
        epsilon: Axis::log(1e-4, 0.5, 10),
        lambda: Axis::linear(0.01, 2.0, 10),
        p_x: Axis::linear(0.01, 0.5, 10),
        ..SearchSpace::default()
    };
    let ch = ChannelModel::paper(200.0, 0.1);
    let mut group = c.benchmark_group("optimize");
    group.sample_size(10);
    group.bench_function("grid_10_per_axis", |b| {
        b.iter(|| optimize(black_box(&ch), &space).unwrap().rate)
    });
    group.finish();
}
