//! Right-hand side and full Strang step on 64², 128² and 256² grids, on a
//! one-worker pool and on the default pool. Build with
//! `--no-default-features` for the purely sequential kernels.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use poro_core::harness::verify::balanced_amplitudes;
use poro_core::integrator::smooth_state;
use poro_core::par;
use poro_core::{
    build_material, energy, Layer, MaterialParams, Propagator, ReversibleOperator, Scheme, SpectralGrid, StepPlan,
    WaveState,
};

const SIZES: [usize; 3] = [64, 128, 256];

fn params() -> MaterialParams {
    MaterialParams {
        c11: 12e9,
        c13: 4e9,
        c33: 10e9,
        c55: 3.5e9,
        alpha1: 0.75,
        alpha3: 0.78,
        biot_modulus: 5.5e9,
        rho: 2237.5,
        rho_f: 1000.0,
        phi: 0.25,
        t1: 2.0,
        t3: 2.5,
        k1: 2e-11,
        k3: 1e-11,
        eta: 1e-3,
    }
}

struct Case {
    grid: SpectralGrid,
    mat: poro_core::PoroelasticMaterial,
    state: WaveState,
}

fn case(n: usize) -> Case {
    let p = params();
    let grid = SpectralGrid::new(n, n, 2.0, 2.0, n / 8).unwrap();
    let mat = build_material(&[Layer { z_begin: 0, z_end: n, params: p }], n, n).unwrap();
    let state = smooth_state(n, n, 4, balanced_amplitudes(&p), 7);
    Case { grid, mat, state }
}

fn pools() -> Vec<(String, usize)> {
    if cfg!(feature = "parallel") {
        vec![
            ("pool-1".to_string(), 1),
            (format!("pool-default-{}", par::current_threads()), par::current_threads()),
        ]
    } else {
        vec![("sequential".to_string(), 1)]
    }
}

fn rhs(c: &mut Criterion) {
    let mut group = c.benchmark_group("rhs");
    for n in SIZES {
        let cs = case(n);
        let mut op = ReversibleOperator::new(&cs.grid);
        let mut out = WaveState::zeros(n, n);
        for (label, threads) in pools() {
            group.bench_with_input(BenchmarkId::new(label, n), &n, |b, _| {
                par::with_threads(threads, || b.iter(|| op.apply(black_box(&cs.state), &cs.mat, &cs.grid, &mut out).unwrap()))
            });
        }
    }
    group.finish();
}

fn strang_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("strang_step");
    group.sample_size(20);
    for n in SIZES {
        let cs = case(n);
        let plan = StepPlan::from_cfl(&cs.grid, &cs.mat, 0.4, Scheme::Strang, 1).unwrap();
        for (label, threads) in pools() {
            let mut prop = Propagator::new(&cs.mat, &cs.grid, plan, Vec::new()).unwrap();
            let mut s = cs.state.clone();
            group.bench_with_input(BenchmarkId::new(label, n), &n, |b, _| {
                par::with_threads(threads, || b.iter(|| prop.step(black_box(&mut s), 0.0).unwrap()))
            });
        }
    }
    group.finish();
}

fn energy_eval(c: &mut Criterion) {
    let mut group = c.benchmark_group("energy");
    for n in SIZES {
        let cs = case(n);
        for (label, threads) in pools() {
            group.bench_with_input(BenchmarkId::new(label, n), &n, |b, _| {
                par::with_threads(threads, || b.iter(|| energy(black_box(&cs.state), &cs.mat, &cs.grid)))
            });
        }
    }
    group.finish();
}

criterion_group!(benches, rhs, strang_step, energy_eval);
criterion_main!(benches);
