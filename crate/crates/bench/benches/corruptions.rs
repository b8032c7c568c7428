use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pcrobust_core::metrics::iou3d;
use pcrobust_core::synth::{synth_frame, SynthConfig};
use pcrobust_core::{apply, Box3D, CorruptionConfig, CorruptionKind, CorruptionSpec, KnnIndex, ObjectClass, Severity};

fn corruptions(c: &mut Criterion) {
    let (frame, _) = synth_frame("bench", 99, &SynthConfig::default());
    let cfg = CorruptionConfig::default();
    let mut group = c.benchmark_group("corrupt_sev5");
    group.sample_size(10);
    for kind in CorruptionKind::ALL {
        group.bench_with_input(BenchmarkId::from_parameter(kind.name()), &kind, |b, &kind| {
            let spec = CorruptionSpec { kind, severity: Severity::new(5).unwrap(), seed: 3 };
            b.iter(|| black_box(apply(&frame, spec, &cfg).unwrap()));
        });
    }
    group.finish();
}

fn spatial(c: &mut Criterion) {
    let (frame, _) = synth_frame("bench", 99, &SynthConfig::default());
    let mut group = c.benchmark_group("kdtree");
    group.sample_size(10);
    group.bench_function("build_120k", |b| b.iter(|| black_box(KnnIndex::build(&frame.cloud.points))));
    let index = KnnIndex::build(&frame.cloud.points);
    let queries: Vec<[f64; 3]> = frame.cloud.points.iter().step_by(100).map(|p| p.xyz()).collect();
    group.bench_function("knn100_x1200", |b| {
        let mut out = Vec::new();
        b.iter(|| {
            for q in &queries {
                index.knn_into(*q, 100, &mut out);
            }
            black_box(out.len())
        })
    });
    group.finish();
}

fn iou(c: &mut Criterion) {
    let a = Box3D::new([0.0, 0.0, 0.0], [4.0, 1.6, 1.5], 0.3, ObjectClass::Car);
    let b = Box3D::new([0.8, 0.4, 0.1], [3.8, 1.7, 1.4], -0.5, ObjectClass::Car);
    c.bench_function("iou3d_rotated", |bench| bench.iter(|| iou3d(black_box(&a), black_box(&b))));
}

criterion_group!(benches, corruptions, spatial, iou);
criterion_main!(benches);
