use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use gripsdf::data::{default_sample_bounds, generate_grasp_scene, sample_points};
use gripsdf::field::{AnalyticSdf, GridSdf, PrimitiveKind};
use gripsdf::mesh::marching_cubes_with;
use gripsdf::neural::{batch_gradient, BatchItem, NetworkConfig, SdfNetwork, TrainConfig};
use gripsdf::par::Execution;
use gripsdf::{Aabb, Vec3};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn grid_bake(c: &mut Criterion) {
    let field = AnalyticSdf::sphere(Vec3::zeros(), 50.0).unwrap();
    let bounds = Aabb::cube(60.0);
    let mut g = c.benchmark_group("grid_bake_64");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| GridSdf::from_field(&field, bounds, [64; 3], exec).unwrap())
        });
    }
    g.finish();
}

fn extraction(c: &mut Criterion) {
    let field = AnalyticSdf::sphere(Vec3::zeros(), 50.0).unwrap();
    let bounds = Aabb::cube(60.0);
    let mut g = c.benchmark_group("marching_cubes_64");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| marching_cubes_with(&field, &bounds, 64, exec).unwrap())
        });
    }
    g.finish();
}

fn network(c: &mut Criterion) {
    let scene = generate_grasp_scene(PrimitiveKind::Sphere, 0).unwrap();
    let samples = sample_points(&scene, 256, 10.0, &default_sample_bounds(), 0).unwrap();
    let net_cfg = NetworkConfig::default();
    let context = scene.context(&net_cfg.pyramid).unwrap();
    let net = SdfNetwork::new(net_cfg).unwrap();
    let prep = net.prepare(&context).unwrap();
    let train = TrainConfig::default();
    let batch: Vec<BatchItem> = samples.points[..64]
        .iter()
        .zip(&samples.sdf_values)
        .map(|(p, s)| BatchItem { scene: prep.clone(), point: *p, target: *s })
        .collect();

    let mut g = c.benchmark_group("network");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::new("batch_gradient_64", name), |b| {
            b.iter(|| batch_gradient(&net, black_box(&batch), &train, exec).unwrap())
        });
        g.bench_function(BenchmarkId::new("eval_256", name), |b| {
            b.iter(|| net.eval_points(&prep, black_box(&samples.points), exec))
        });
    }
    g.finish();
}

criterion_group!(benches, grid_bake, extraction, network);
criterion_main!(benches);
