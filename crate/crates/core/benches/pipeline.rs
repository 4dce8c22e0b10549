//! One-thread pool against the default pool on a synthesized scene.
//!
//! Built without the `parallel` feature both variants run the sequential path,
//! which gives the baseline to compare against.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pcseg::aoia::{aoia_infer, AoiaParams};
use pcseg::cli::{synth_scene, SynthParams};
use pcseg::cluster::{bfs_cluster, BfsParams};
use pcseg::objectness::{center_sample, objectness_labels};
use pcseg::CategoryConfig;

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let default = rayon::ThreadPoolBuilder::new().build().unwrap();
    let n = default.current_num_threads();
    let single = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    vec![("single".into(), single), (format!("default_{n}"), default)]
}

fn pipeline(c: &mut Criterion) {
    let params = SynthParams {
        instances: (9, 9),
        density: 1500.0,
        ..SynthParams::default()
    };
    let (scene, signals) = synth_scene(3, &params).unwrap();
    let cloud = &scene.cloud;
    let coords = cloud.coords();
    let semantic = cloud.semantic().unwrap();
    let foreground: Vec<i32> = semantic.iter().copied().filter(|&s| s >= 0).collect();
    let config = CategoryConfig::new(20, foreground).unwrap();
    let centered = center_sample(coords).unwrap();

    let mut group = c.benchmark_group(format!("scene_{}pts", coords.len()));
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("bfs_cluster", &name), |b| {
            b.iter(|| {
                pool.install(|| {
                    bfs_cluster(coords, semantic, &config.foreground, &BfsParams::default())
                        .unwrap()
                })
            })
        });
        group.bench_function(BenchmarkId::new("objectness", &name), |b| {
            b.iter(|| pool.install(|| objectness_labels(&centered).unwrap()))
        });
        group.bench_function(BenchmarkId::new("aoia_infer", &name), |b| {
            b.iter(|| {
                pool.install(|| {
                    aoia_infer(coords, semantic, &signals, &config, &AoiaParams::default()).unwrap()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, pipeline);
criterion_main!(benches);
