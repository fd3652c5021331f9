//! Hot-path benchmarks: field propagation, full transfer matrices,
//! decomposition, per-MZI correction and the training gradient.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use num_complex::Complex64;
use onnmesh::{
    clements_decompose, correct_forward, gradient, haar_random_unitary, make_maximally_faulty,
    ComplexVector, ErrorLevel, MZIParams, Nonlinearity, ONNModel, SplitterError,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_field(n: usize, rng: &mut ChaCha8Rng) -> ComplexVector {
    let mut v = ComplexVector::from_shape_fn(n, |_| {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv_inplace(|z| z / norm);
    v
}

fn bench_propagate(c: &mut Criterion) {
    let mut group = c.benchmark_group("propagate");
    for n in [16usize, 64] {
        let mesh = clements_decompose(&haar_random_unitary(n, 1)).unwrap().mesh;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_field(n, &mut rng);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| mesh.propagate(&x).unwrap())
        });
    }
    group.finish();
}

fn bench_mesh_matrix(c: &mut Criterion) {
    let mut group = c.benchmark_group("mesh_matrix");
    for n in [16usize, 64] {
        let mesh = clements_decompose(&haar_random_unitary(n, 3)).unwrap().mesh;
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| mesh.matrix())
        });
    }
    group.finish();
}

fn bench_decompose(c: &mut Criterion) {
    let mut group = c.benchmark_group("clements_decompose");
    for n in [16usize, 64] {
        let u = haar_random_unitary(n, 4);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| clements_decompose(&u).unwrap())
        });
    }
    group.finish();
}

fn bench_correct_forward(c: &mut Criterion) {
    let p = MZIParams::new(1.3, 0.4);
    let e = SplitterError::new(0.1, -0.05).unwrap();
    c.bench_function("correct_forward", |b| {
        b.iter(|| correct_forward(p, e).unwrap())
    });
}

fn bench_gradient(c: &mut Criterion) {
    let n = 16;
    let lvl = ErrorLevel::from_percent(10.0).unwrap();
    let layers: Vec<_> = (0..2)
        .map(|k| {
            let mut mesh = clements_decompose(&haar_random_unitary(n, 10 + k)).unwrap().mesh;
            let m = mesh.geometry().mzi_count();
            mesh.set_errors(make_maximally_faulty(m, lvl)).unwrap();
            mesh
        })
        .collect();
    let model = ONNModel::new(layers, Nonlinearity::ModRelu { bias: 0.1 }, 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let inputs: Vec<ComplexVector> = (0..16).map(|_| random_field(n, &mut rng)).collect();
    let labels: Vec<u8> = (0..16).map(|i| (i % 10) as u8).collect();
    c.bench_function("gradient_batch16_n16_l2", |b| {
        b.iter(|| gradient(&model, &inputs, &labels).unwrap())
    });
}

criterion_group!(
    benches,
    bench_propagate,
    bench_mesh_matrix,
    bench_decompose,
    bench_correct_forward,
    bench_gradient
);
criterion_main!(benches);
