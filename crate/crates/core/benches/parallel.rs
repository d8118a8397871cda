use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fairfit::fairness::{laplacian_form, IfOptions};
use fairfit::{
    bias_ratio_curve, encode, example_schema, kfold_cv, synth_example, BiasOptions, CvConfig,
    Distance, Execution,
};

fn modes() -> [(&'static str, Execution); 2] {
    [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel { threads: 0 }),
    ]
}

fn cross_validation(c: &mut Criterion) {
    let raw = synth_example(1, 1000, 1).unwrap();
    let mut group = c.benchmark_group("kfold_cv");
    group.sample_size(10);
    for (name, execution) in modes() {
        let config = CvConfig {
            folds: 5,
            runs: 2,
            execution,
            ..CvConfig::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| kfold_cv(&raw, &example_schema(), &config).unwrap())
        });
    }
    group.finish();
}

fn pairwise_form(c: &mut Criterion) {
    let raw = synth_example(1, 2000, 2).unwrap();
    let mm = encode(&raw, &example_schema()).unwrap();
    let mut group = c.benchmark_group("laplacian_form");
    group.sample_size(10);
    for (name, execution) in modes() {
        let opts = IfOptions {
            execution,
            ..IfOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| laplacian_form(&mm.y, &mm.s, Distance::Absolute, &opts).unwrap())
        });
    }
    group.finish();
}

fn bias_curve(c: &mut Criterion) {
    let raw = synth_example(1, 1000, 3).unwrap();
    let mm = encode(&raw, &example_schema()).unwrap();
    let grid: Vec<f64> = (0..21).map(|k| 10f64.powf(-1.0 + 0.25 * k as f64)).collect();
    let mut group = c.benchmark_group("bias_ratio_curve");
    group.sample_size(10);
    for (name, execution) in modes() {
        let opts = BiasOptions {
            execution,
            ..BiasOptions::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| bias_ratio_curve(&mm, &[0.01, 0.1], &grid, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, cross_validation, pairwise_form, bias_curve);
criterion_main!(benches);
