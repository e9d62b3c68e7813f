use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use qsuff::classical::likelihood_ratio_minimality;
use qsuff::divergence::relative_entropy;
use qsuff::factorization::symmetric_power_experiment;
use qsuff::gaussian::{verify_sufficiency_pair, SymplecticSpace};
use qsuff::random::{random_faithful_density, random_unitary, rng};
use qsuff::sufficiency::{build_experiment, channel_sufficient, minimal_sufficient_subalgebra};
use qsuff::{QuantumChannel, StatisticalExperiment, SufficiencyConfig};

fn product_family(dl: usize, dr: usize) -> StatisticalExperiment {
    let mut g = rng(5);
    let tau = random_faithful_density(&mut g, dr, 0.1);
    let states = (0..3)
        .map(|i| (vec![i as f64], random_faithful_density(&mut g, dl, 0.1).tensor(&tau)))
        .collect();
    build_experiment(states, None).unwrap()
}

fn divergences(c: &mut Criterion) {
    let mut g = rng(1);
    let rho = random_faithful_density(&mut g, 16, 0.05);
    let sigma = random_faithful_density(&mut g, 16, 0.05);
    c.bench_function("relative_entropy/16", |b| b.iter(|| relative_entropy(black_box(&rho), &sigma)));
}

fn sufficiency(c: &mut Criterion) {
    let cfg = SufficiencyConfig::default();
    let exp = product_family(2, 3);
    let trace_out = QuantumChannel::partial_trace(&[2, 3], &[0]).unwrap();
    c.bench_function("channel_sufficient/trace_out_6", |b| {
        b.iter(|| channel_sufficient(black_box(&exp), &trace_out, &cfg).unwrap())
    });
    let u = QuantumChannel::unitary(&random_unitary(&mut rng(2), 6)).unwrap();
    c.bench_function("channel_sufficient/unitary_6", |b| {
        b.iter(|| channel_sufficient(black_box(&exp), &u, &cfg).unwrap())
    });
    c.bench_function("minimal_sufficient_subalgebra/6", |b| {
        b.iter(|| minimal_sufficient_subalgebra(black_box(&exp), &cfg).unwrap())
    });
}

fn structures(c: &mut Criterion) {
    let rho = random_faithful_density(&mut rng(3), 2, 0.1);
    c.bench_function("symmetric_power/d2_n3", |b| {
        b.iter(|| symmetric_power_experiment(std::slice::from_ref(black_box(&rho)), 3).unwrap())
    });
    let space = SymplecticSpace::standard(1, 1.5).unwrap();
    c.bench_function("gaussian_pair/n3_100", |b| {
        b.iter(|| verify_sufficiency_pair(&space, 3, &[], 100, &mut rng(4)).unwrap())
    });
    let p = [0.1, 0.2, 0.05, 0.15, 0.2, 0.1, 0.2];
    let q = [0.2, 0.1, 0.1, 0.15, 0.1, 0.2, 0.15];
    c.bench_function("likelihood_ratio_minimality/7", |b| {
        b.iter(|| likelihood_ratio_minimality(black_box(&p), &q).unwrap())
    });
}

criterion_group!(benches, divergences, sufficiency, structures);
criterion_main!(benches);
