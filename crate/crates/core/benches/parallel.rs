use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use infocommit::audit::{lemma_suite, monte_carlo_detection, privacy_suite, Adversary};
use infocommit::exec::Exec;
use infocommit::field::Field;
use infocommit::ot::BsOtParams;
use infocommit::polymat::Matrix;
use infocommit::protocol::{commit, keygen_prover, keygen_verifier, OtBackendKind, ProtocolConfig};
use infocommit::rng::SeedTree;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn soundness_trials(c: &mut Criterion) {
    let cfg = ProtocolConfig::new(Field::prime(13).unwrap(), 25, 2, 3, 4).unwrap();
    let adv = Adversary::RandomPerturbation {
        support: cfg.s(),
        both_sides: false,
    };
    let seeds = SeedTree::new(1);
    let mut group = c.benchmark_group("monte_carlo_2000");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| monte_carlo_detection(&adv, &cfg, 2000, &seeds, exec).unwrap())
        });
    }
    group.finish();
}

fn privacy_sweeps(c: &mut Criterion) {
    let seeds = SeedTree::new(2);
    let mut group = c.benchmark_group("privacy_suite_100");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| privacy_suite(black_box(100), &seeds, exec).unwrap())
        });
    }
    group.finish();
}

fn lemma_checks(c: &mut Criterion) {
    let seeds = SeedTree::new(3);
    let mut group = c.benchmark_group("lemma_suite_500");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| lemma_suite(black_box(500), &seeds, exec).unwrap())
        });
    }
    group.finish();
}

fn commitment_sessions(c: &mut Criterion) {
    let cfg = ProtocolConfig::new(Field::prime(11).unwrap(), 9, 2, 3, 6).unwrap();
    let seeds = SeedTree::new(4);
    let mut rng = seeds.stream("setup", 0);
    let a = Matrix::random(cfg.field(), 3, 3, &mut rng);
    let pkey = keygen_prover(&cfg, &mut rng);
    let vkey = keygen_verifier(&cfg, &mut rng);
    let backend = OtBackendKind::BoundedStorage(BsOtParams::desk());
    let mut group = c.benchmark_group("commit_bounded_storage");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| commit(&cfg, &a, &vkey, &pkey, &backend, &seeds, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, soundness_trials, privacy_sweeps, lemma_checks, commitment_sessions);
criterion_main!(benches);
