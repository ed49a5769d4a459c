use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use filamentlab_core::banded::BlockTridiag;
use filamentlab_core::compat::{eval_q, orthogonality_defect};
use filamentlab_core::datum::{Datum, PerturbedQuarterCircle};
use filamentlab_core::dynamics::{step, FilamentState, SolverConfig};
use filamentlab_core::{GridSpec, UnitVecField, Vec3};
use nalgebra::Matrix3;

fn datum(n: usize) -> UnitVecField {
    PerturbedQuarterCircle::new(0.1, 0).sample(GridSpec::new(n).unwrap()).unwrap()
}

fn block_solve(c: &mut Criterion) {
    let mut g = c.benchmark_group("block_tridiag");
    for n in [128, 512, 2048] {
        let mut m = BlockTridiag::zeros(n);
        for i in 0..n {
            m.diag[i] = Matrix3::identity() * 4.0 + Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.5, 0.0, -0.5, 0.0);
            m.lower[i] = Matrix3::identity() * -1.0;
            m.upper[i] = Matrix3::identity() * -1.0;
        }
        let rhs: Vec<Vec3> = (0..n).map(|i| Vec3::new(1.0, i as f64, 0.5)).collect();
        g.bench_with_input(BenchmarkId::new("factor_solve", n), &n, |b, _| {
            b.iter(|| m.factor().unwrap().solve(black_box(&rhs)))
        });
    }
    g.finish();
}

fn steppers(c: &mut Criterion) {
    let a = Vec3::new(1.0, 0.0, 0.0);
    let mut g = c.benchmark_group("step");
    for n in [128, 512] {
        let s = FilamentState::new(datum(n));
        for (name, eps) in [("midpoint", 0.0), ("semi_implicit", 0.05)] {
            let cfg = SolverConfig::for_eps(eps, 1e-5, a);
            g.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| step(black_box(&s), &cfg, 1e-5).unwrap())
            });
        }
    }
    g.finish();
}

fn compat(c: &mut Criterion) {
    let v = datum(256);
    let mut g = c.benchmark_group("compat");
    for m in 1..=3 {
        g.bench_with_input(BenchmarkId::new("eval_q", m), &m, |b, &m| {
            b.iter(|| eval_q(black_box(&v), 0.05, m).unwrap())
        });
    }
    g.bench_function("orthogonality_defect_m2", |b| {
        b.iter(|| orthogonality_defect(black_box(&v), 0.05, 2).unwrap())
    });
    g.finish();
}

criterion_group!(benches, block_solve, steppers, compat);
criterion_main!(benches);
