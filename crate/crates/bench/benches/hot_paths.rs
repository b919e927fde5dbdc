use std::hint::black_box;

use afs_core::bbob::Problem;
use afs_core::doe::{design_key, sample_design};
use afs_core::rng::StreamKey;
use afs_core::selector::{ForestConfig, RandomForest};
use afs_core::{feature_vector, GpConfig, GpModel, NUM_FEATURES};
use criterion::{criterion_group, criterion_main, Criterion};

fn bbob(c: &mut Criterion) {
    let mut g = c.benchmark_group("bbob_evaluate_d5");
    let x = vec![0.3, -1.2, 2.2, 0.0, 4.1];
    for f in [1u8, 16, 21, 23] {
        let p = Problem::instantiate(f, 0, 5).unwrap();
        g.bench_function(format!("f{f}"), |b| b.iter(|| p.evaluate(black_box(&x)).unwrap()));
    }
    g.finish();
}

fn gp_fit(c: &mut Criterion) {
    let p = Problem::instantiate(8, 0, 5).unwrap();
    let d = sample_design(&p, 50, design_key(8, 0, 0), 0).unwrap();
    let cfg = GpConfig::default();
    c.bench_function("gp_fit_n50_d5", |b| {
        b.iter(|| GpModel::fit(black_box(&d.points), &d.values, &cfg, StreamKey::new(1)).unwrap())
    });
}

fn features(c: &mut Criterion) {
    let p = Problem::instantiate(21, 0, 5).unwrap();
    let d = sample_design(&p, 50, design_key(21, 0, 0), 0).unwrap();
    c.bench_function("feature_vector_n50_d5", |b| b.iter(|| feature_vector(black_box(&d))));
}

fn forest(c: &mut Criterion) {
    let mut rng = StreamKey::new(4).rng();
    let x: Vec<Vec<f64>> = (0..300)
        .map(|_| (0..NUM_FEATURES).map(|_| rand_uniform(&mut rng)).collect())
        .collect();
    let y: Vec<Vec<f64>> = x
        .iter()
        .map(|r| (0..7).map(|k| (r[k] + r[k + 7]).abs().min(1.0)).collect())
        .collect();
    c.bench_function("forest_train_300x38_100_trees", |b| {
        b.iter(|| RandomForest::fit(black_box(&x), &y, ForestConfig::default(), 0).unwrap())
    });
}

fn rand_uniform(rng: &mut afs_core::rng::StreamRng) -> f64 {
    use rand::Rng;
    rng.random_range(-1.0..1.0)
}

criterion_group!(benches, bbob, gp_fit, features, forest);
criterion_main!(benches);
