//! Criterion benchmarks for the hot paths: MLP training, nearest-neighbour
//! queries and the closed-form bounds.

use std::hint::black_box;

use codimlab::bounds::{
    linear_region_lower_bound, linf_axis_offset, plane_coverage_bound, sphere_coverage_bound,
};
use codimlab::datasets::{make_circles, make_planes, CodimEmbedding};
use codimlab::mlp::train;
use codimlab::{Acceleration, MlpModel, NnIndex, NormKind, TrainConfig};
use criterion::{BenchmarkId, Criterion};

pub fn mlp(c: &mut Criterion) {
    let mut g = c.benchmark_group("mlp");
    g.sample_size(10);
    for codim in [1usize, 100] {
        let split = make_circles(500, 1, &CodimEmbedding::padded(1 + codim, 0)).unwrap();
        let (x, y) = (split.train.points.view(), &split.train.labels);
        let cfg = TrainConfig {
            epochs: 10,
            ..TrainConfig::default()
        };
        g.bench_with_input(
            BenchmarkId::new("train_10_epochs", codim),
            &codim,
            |b, _| {
                b.iter(|| train(MlpModel::standard(x.ncols(), 2, 0).unwrap(), x, y, &cfg).unwrap())
            },
        );
        let model = MlpModel::standard(x.ncols(), 2, 0).unwrap();
        g.bench_with_input(
            BenchmarkId::new("input_gradients", codim),
            &codim,
            |b, _| b.iter(|| model.input_gradients(black_box(x), y).unwrap()),
        );
    }
    g.finish();
}

pub fn knn(c: &mut Criterion) {
    let mut g = c.benchmark_group("knn");
    let train_set = make_planes(0.5, &CodimEmbedding::padded(5, 0))
        .unwrap()
        .train;
    let queries = make_planes(0.5, &CodimEmbedding::padded(5, 0))
        .unwrap()
        .test;
    for accel in [Acceleration::SpatialTree, Acceleration::BruteForce] {
        let idx = NnIndex::from_dataset(&train_set, NormKind::L2, accel).unwrap();
        g.bench_function(format!("nearest_{accel:?}"), |b| {
            b.iter(|| {
                for q in queries.points.rows() {
                    black_box(idx.nearest(q).unwrap());
                }
            })
        });
    }
    let idx = NnIndex::from_dataset(&train_set, NormKind::L2, Acceleration::SpatialTree).unwrap();
    g.bench_function("k_nearest_10", |b| {
        b.iter(|| {
            for q in queries.points.rows() {
                black_box(idx.k_nearest(q, 10).unwrap());
            }
        })
    });
    g.finish();
}

pub fn bounds(c: &mut Criterion) {
    let mut g = c.benchmark_group("bounds");
    g.bench_function("linf_axis_offset", |b| {
        b.iter(|| linf_axis_offset(1.0, 3.0, black_box(1000)).unwrap())
    });
    g.bench_function("plane_coverage", |b| {
        b.iter(|| plane_coverage_bound(2, black_box(500)).unwrap())
    });
    g.bench_function("sphere_coverage", |b| {
        b.iter(|| sphere_coverage_bound(1000, black_box(500), 0.5).unwrap())
    });
    g.bench_function("linear_regions", |b| {
        b.iter(|| linear_region_lower_bound(1.0, 1.0, 0.1, black_box(500)).unwrap())
    });
    g.finish();
}

pub fn benchmarks(c: &mut Criterion) {
    mlp(c);
    knn(c);
    bounds(c);
}
