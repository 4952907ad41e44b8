use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use magnonic::dynamics::{evolve_lindblad, DecoherenceRates, LindbladOptions, TimeGrid};
use magnonic::hamiltonian::{build_full, build_h0, build_v};
use magnonic::perturbation::{enumerate_paths, ResonantPair};
use magnonic::spectral::{bare_resonance, diagonalize, locate_crossing};
use magnonic::{BareLabel, StateVector, SystemParams};

fn at_bell_resonance() -> SystemParams {
    let p = SystemParams::bell_default();
    p.with_omega_q(bare_resonance(&p, ResonantPair::Bell.labels()).unwrap())
}

fn spectrum(c: &mut Criterion) {
    let p = at_bell_resonance();
    let h = build_full(&p).unwrap();
    c.bench_function("diagonalize 72", |b| b.iter(|| diagonalize(black_box(&h)).unwrap()));
    c.bench_function("locate bell crossing", |b| b.iter(|| locate_crossing(black_box(&p), ResonantPair::Bell.labels()).unwrap()));
}

fn paths(c: &mut Criterion) {
    let p = at_bell_resonance();
    let (h0, v) = (build_h0(&p).unwrap(), build_v(&p).unwrap());
    let (i, j) = ResonantPair::Bell.labels();
    c.bench_function("enumerate third-order paths", |b| b.iter(|| enumerate_paths(black_box(&h0), &v, i, j, 3).unwrap()));
}

fn lindblad(c: &mut Criterion) {
    let p = at_bell_resonance();
    let h = build_full(&p).unwrap();
    let rho = StateVector::basis(p.trunc, BareLabel::e(0, 0)).unwrap().to_density();
    let rates = DecoherenceRates::uniform(1e-4).unwrap();
    let opts = LindbladOptions::for_reference(p.reference_frequency());
    // 40 integrator steps.
    let grid = TimeGrid::new(0.0, 40.0 * opts.step, 2).unwrap();
    let mut group = c.benchmark_group("lindblad");
    group.sample_size(10);
    group.bench_function("40 steps windowed", |b| b.iter(|| evolve_lindblad(&h, &rates, black_box(&rho), &grid, &opts).unwrap()));
    group.finish();
}

criterion_group!(benches, spectrum, paths, lindblad);
criterion_main!(benches);
