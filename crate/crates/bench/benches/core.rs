use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use supmeas_core::geometry::project;
use supmeas_core::measures::{
    extract_support_measures, hex_float, parse_hex_float, DiscreteMeasure, SpaceTag,
};
use supmeas_core::metric::{bounded_lipschitz_dense, signed_bl};
use supmeas_core::optimality::psi_cap_pairing;
use supmeas_core::{ConvexBody, HalfSpace};

fn random_signed(atoms: usize, stride: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..atoms * stride).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w = (0..atoms).map(|_| rng.gen_range(-1.0..1.0)).collect();
    (pts, w)
}

fn projection(c: &mut Criterion) {
    let cube = ConvexBody::unit_cube(3).unwrap();
    let hs: Vec<HalfSpace> = (0..3)
        .flat_map(|k| {
            [1.0, -1.0].map(|s| {
                let mut a = vec![0.0; 3];
                a[k] = s;
                HalfSpace::new(a, 0.5).unwrap()
            })
        })
        .collect();
    let hcube = ConvexBody::hpolytope(hs).unwrap();
    let ball = ConvexBody::ball(vec![0.0; 3], 1.0).unwrap();
    let x = [1.3, -0.7, 2.1];
    c.bench_function("project/vpolytope_cube", |b| b.iter(|| project(&cube, black_box(&x))));
    c.bench_function("project/hpolytope_cube", |b| b.iter(|| project(&hcube, black_box(&x))));
    c.bench_function("project/ball", |b| b.iter(|| project(&ball, black_box(&x))));
}

fn distances(c: &mut Criterion) {
    let mut g = c.benchmark_group("dbl");
    g.sample_size(10);
    for atoms in [200usize, 1000, 4000] {
        g.bench_function(format!("network_simplex/{atoms}"), |b| {
            b.iter_batched(
                || random_signed(atoms, 4, atoms as u64),
                |(p, w)| signed_bl(4, p, w).unwrap().value,
                BatchSize::LargeInput,
            )
        });
    }
    let (p, w) = random_signed(60, 4, 9);
    let pos: Vec<f64> = w.iter().map(|v| v.max(0.0)).collect();
    let neg: Vec<f64> = w.iter().map(|v| (-v).max(0.0)).collect();
    let mu = DiscreteMeasure::new(SpaceTag::SigmaN, 2, p.clone(), pos).unwrap();
    let nu = DiscreteMeasure::new(SpaceTag::SigmaN, 2, p, neg).unwrap();
    g.bench_function("dense_simplex/60", |b| {
        b.iter(|| bounded_lipschitz_dense(black_box(&mu), black_box(&nu)).unwrap().0)
    });
    g.finish();
}

fn extraction(c: &mut Criterion) {
    let mut g = c.benchmark_group("extract");
    g.sample_size(10);
    let cube = ConvexBody::unit_cube(3).unwrap();
    g.bench_function("cube_20k", |b| b.iter(|| extract_support_measures(&cube, 20_000, 1).unwrap()));
    g.finish();
}

fn numerics(c: &mut Criterion) {
    c.bench_function("hex_float/round_trip", |b| {
        b.iter(|| parse_hex_float(&hex_float(black_box(0.1234567890123))).unwrap())
    });
    c.bench_function("cap_pairing/quadrature", |b| b.iter(|| psi_cap_pairing(3, 1, black_box(0.1)).unwrap()));
}

criterion_group!(benches, projection, distances, extraction, numerics);
criterion_main!(benches);
