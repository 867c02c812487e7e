use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use optoqpg::analytic::{gate_fidelity_analytic, DecoherenceOracle};
use optoqpg::lindblad::{
    default_mech_dim, gate_fidelity_dissipative, lindblad_rhs, BlockLindblad, BlockState,
    DEFAULT_TRUNC_TOL,
};
use optoqpg::model::logical_block;
use optoqpg::operators::thermal_state;
use optoqpg::{EvolutionConfig, SpaceLayout, SystemParams, C64};

fn lossy(nbar: f64) -> SystemParams {
    SystemParams::ideal()
        .with_nbar(nbar)
        .with_losses(1e-2, 1e-2, 1e6)
}

fn block_rhs(c: &mut Criterion) {
    let mut group = c.benchmark_group("block_rhs");
    for nbar in [0.0, 10.0] {
        let p = lossy(nbar);
        let n = default_mech_dim(nbar, DEFAULT_TRUNC_TOL);
        let mech = thermal_state(nbar, n).unwrap().into_matrix();
        let state = BlockState::logical_block(3, 3, &mech).unwrap();
        let lind = BlockLindblad::new(&p, &state).unwrap();
        let mut dy = vec![C64::new(0.0, 0.0); lind.len()];
        group.bench_with_input(BenchmarkId::new("pair_33", n), &state, |b, s| {
            b.iter(|| lind.apply(black_box(s.data()), &mut dy))
        });
    }
    group.finish();
}

fn dense_rhs(c: &mut Criterion) {
    let n = 17;
    let p = lossy(0.0);
    let layout = SpaceLayout::gate(n).unwrap();
    let rho = logical_block(3, 3, &thermal_state(0.0, n).unwrap()).unwrap();
    c.bench_function("dense_rhs_mech17", |b| {
        b.iter(|| lindblad_rhs(black_box(&rho), &p, &layout).unwrap())
    });
}

fn analytic(c: &mut Criterion) {
    let p = SystemParams::ideal().with_nbar(10.0);
    c.bench_function("gate_fidelity_analytic_200pts", |b| {
        b.iter(|| {
            (0..200)
                .map(|i| gate_fidelity_analytic(0.063 * i as f64, black_box(&p)).unwrap())
                .sum::<f64>()
        })
    });
    let oracle = DecoherenceOracle::new(&SystemParams::ideal().with_nbar(3.0), 90).unwrap();
    c.bench_function("decoherence_oracle_mech90", |b| {
        b.iter(|| oracle.coefficients(black_box(1.3)))
    });
}

fn gate_fidelity(c: &mut Criterion) {
    let mut group = c.benchmark_group("gate_fidelity_t_pi");
    group.sample_size(10);
    let p = lossy(0.0);
    let cfg = EvolutionConfig::for_params(vec![0.0, 2.0 * std::f64::consts::PI], &p);
    group.bench_function("lossy_nbar0", |b| {
        b.iter(|| gate_fidelity_dissipative(black_box(&p), &cfg).unwrap())
    });
    group.finish();
}

criterion_group!(benches, block_rhs, dense_rhs, analytic, gate_fidelity);
criterion_main!(benches);
