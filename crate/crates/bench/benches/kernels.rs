use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use meshcompose::collision::{optimize_placement, CollisionParams};
use meshcompose::geometry::{primitives, sample_surface, SimilarityTransform};
use meshcompose::metrics::{surface_intersection_ratio, volume_intersection_ratio};
use meshcompose::registration::{scale_aware_icp, umeyama_solve, IcpParams};
use meshcompose::sdf::bake_sdf;
use meshcompose_bench::{cloud_pair, moved, sphere_pair};

fn registration(c: &mut Criterion) {
    let mut g = c.benchmark_group("registration");
    for n in [1_000, 10_000] {
        let (src, tgt, _) = cloud_pair(n);
        g.bench_with_input(BenchmarkId::new("umeyama", n), &n, |b, _| {
            b.iter(|| umeyama_solve(black_box(&src.points), black_box(&tgt.points), None, true).unwrap())
        });
    }
    let (src, tgt, t) = cloud_pair(5_000);
    let init = SimilarityTransform::new(t.scale * 1.05, t.rotation, t.translation);
    g.bench_function("icp/5000", |b| b.iter(|| scale_aware_icp(&src, &tgt, black_box(&init), &IcpParams::default()).unwrap()));
    g.finish();
}

fn sdf(c: &mut Criterion) {
    let mut g = c.benchmark_group("sdf");
    g.sample_size(10);
    let mesh = primitives::icosphere(0.5, 4);
    for res in [32, 64, 128] {
        g.bench_with_input(BenchmarkId::new("bake", res), &res, |b, &res| b.iter(|| bake_sdf(black_box(&mesh), res, 0.2).unwrap()));
    }
    g.finish();
}

fn metrics(c: &mut Criterion) {
    let mut g = c.benchmark_group("metrics");
    g.sample_size(10);
    for level in [2, 3, 4] {
        let (a, b) = sphere_pair(level);
        g.bench_with_input(BenchmarkId::new("surface_ratio", a.num_faces()), &level, |bn, _| {
            bn.iter(|| surface_intersection_ratio(black_box(&a), black_box(&b)).unwrap())
        });
    }
    let (a, b) = sphere_pair(3);
    for n in [100_000, 1_000_000] {
        g.bench_with_input(BenchmarkId::new("volume_ratio", n), &n, |bn, &n| {
            bn.iter(|| volume_intersection_ratio(black_box(&a), black_box(&b), n, 7).unwrap())
        });
    }
    g.finish();
}

fn placement(c: &mut Criterion) {
    let mut g = c.benchmark_group("collision");
    g.sample_size(10);
    let anchor = primitives::icosphere(0.5, 3);
    let grid = bake_sdf(&anchor, 64, 0.2).unwrap();
    let other = moved(&primitives::subdivided_box(nalgebra::Vector3::new(0.3, 0.3, 0.3), 4), 0.6, 0.2);
    let p = sample_surface(&other, 5_000, 3).unwrap();
    let params = CollisionParams::default().resolved(anchor.aabb().diagonal());
    g.bench_function("optimize_placement/5000", |b| {
        b.iter(|| optimize_placement(&p, &p, &grid, &SimilarityTransform::identity(), &params, &IcpParams::default()).unwrap())
    });
    g.finish();
}

criterion_group!(benches, registration, sdf, metrics, placement);
criterion_main!(benches);
