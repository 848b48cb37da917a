//! Per-round cost measurement: operation counts and wall time against `d`.
//!
//! Square `d` with even `s` cannot satisfy `gcd(s, q - 1) = 1` over an odd
//! prime, so these measurements run over `2^61 - 1` with the unchecked
//! prover and verifier states. The arithmetic per round is identical.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::Rng;

use crate::field::Field;
use crate::polymat::{structured_matrix, Direction, Matrix, Polynomial};
use crate::protocol::{recover, OpCounter, ProverState, VerificationKey, VerifierKey, VerifierState};
use crate::rng::SeedTree;

/// Mersenne prime used for the measurements.
pub const BENCH_PRIME: u64 = (1 << 61) - 1;

#[derive(Clone, Debug, PartialEq)]
pub struct RoundCost {
    pub d: usize,
    pub s: usize,
    pub prover_ops: OpCounter,
    pub verifier_ops: OpCounter,
    /// Mean over the measured rounds.
    pub prover_time: Duration,
    pub verifier_time: Duration,
    pub all_accepted: bool,
}

/// Commits to a random degree-`d` polynomial (directly, without OT) and
/// measures `rounds` honest evaluation rounds.
pub fn measure_rounds(d: usize, c: usize, rounds: usize, seed: u64) -> RoundCost {
    let s = d.isqrt();
    assert!(s * s == d && s >= 2, "d = {d} must be a square of at least 4");
    assert!(rounds >= 1);
    let field = Field::prime(BENCH_PRIME).expect("Mersenne prime");
    let seeds = SeedTree::new(seed);
    let xi = BENCH_PRIME / 2;

    let poly = Polynomial::random(&field, d, &mut seeds.stream("polynomial", 0));
    let a = poly.to_matrix(s).expect("square d");
    let b = Matrix::random(&field, s, s, &mut seeds.stream("prover-key", 0));
    let mut krng = seeds.stream("verifier-key", 0);
    let mut draw = || -> Vec<u64> {
        sample(&mut krng, (BENCH_PRIME - xi - 1) as usize, c)
            .into_iter()
            .map(|i| xi + 1 + i as u64)
            .collect()
    };
    let key = VerifierKey {
        lambdas: draw(),
        thetas: draw(),
    };
    let lambda = structured_matrix(&field, &key.lambdas, s, Direction::High).expect("distinct").matrix;
    let theta = structured_matrix(&field, &key.thetas, s, Direction::Low).expect("distinct").matrix;
    let prover = ProverState::unchecked(&field, xi, &a, &b).expect("square shapes");
    let vk = VerificationKey {
        gamma: lambda.mul(&field, &a.add(&field, &b).expect("shapes")).expect("shapes"),
        omega: b.mul(&field, &theta.transpose()).expect("shapes"),
    };
    let verifier = VerifierState::unchecked(&field, s, &key, &vk).expect("distinct");

    let mut qrng = seeds.stream("queries", 0);
    let mut prover_ops = OpCounter::default();
    let mut verifier_ops = OpCounter::default();
    let (mut pt, mut vt) = (Duration::ZERO, Duration::ZERO);
    let mut all_accepted = true;
    for _ in 0..rounds {
        let x = qrng.gen_range(0..=xi);
        let mut pops = OpCounter::default();
        let start = Instant::now();
        let resp = prover.respond(x, &mut pops).expect("x <= xi");
        pt += start.elapsed();
        let mut vops = OpCounter::default();
        let start = Instant::now();
        let verdict = verifier.check(x, &resp, &mut vops);
        let value = recover(&field, x, &resp);
        vt += start.elapsed();
        all_accepted &= verdict.is_accept() && value == poly.horner_eval(&field, x);
        prover_ops = pops;
        verifier_ops = vops;
    }
    RoundCost {
        d,
        s,
        prover_ops,
        verifier_ops,
        prover_time: pt / rounds as u32,
        verifier_time: vt / rounds as u32,
        all_accepted,
    }
}

/// Consecutive ratios of verifier and prover operation totals.
pub fn growth_ratios(costs: &[RoundCost]) -> Vec<(f64, f64)> {
    costs
        .windows(2)
        .map(|w| {
            (
                w[1].verifier_ops.total() as f64 / w[0].verifier_ops.total() as f64,
                w[1].prover_ops.total() as f64 / w[0].prover_ops.total() as f64,
            )
        })
        .collect()
}
