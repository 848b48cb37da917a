//! Exact soundness probabilities and Monte-Carlo cheating adversaries.
//!
//! A perturbation `delta = v_hat - v` passes the Gamma check iff its polynomial
//! `delta(z) = sum_k delta_k z^k` vanishes at every `lambda_i^s`; a perturbation
//! of `u` passes the Omega check iff it vanishes at every `theta_i`. With keys
//! drawn uniformly without replacement from `S`, the pass probability for one
//! side is `C(t, c) / C(|S|, c)` where `t` counts the roots hit.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha20Rng;

use super::privacy::AuditError;
use crate::exec::Exec;
use crate::field::Field;
use crate::polymat::{Matrix, Polynomial};
use crate::protocol::{
    commit_direct, eval, keygen_prover, keygen_verifier, EvalResponse, OpCounter, ProtocolConfig,
    VerifierState,
};
use crate::rng::SeedTree;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Perturbation of `v`, tested against `Lambda` (roots at `lambda^s`).
    V,
    /// Perturbation of `u`, tested against `Theta` (roots at `theta`).
    U,
}

pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::from(0);
    }
    let k = k.min(n - k);
    (0..k).fold(BigInt::from(1), |acc, i| acc * (n - i) / (i + 1))
}

/// Points of `S` at which a perturbation on `side` goes undetected.
pub fn undetected_points(field: &Field, delta: &[u64], set: &[u64], side: Side) -> usize {
    let s = delta.len() as u64;
    let poly = Polynomial::new(delta.to_vec());
    set.iter()
        .filter(|&&y| {
            let z = match side {
                Side::V => field.pow(y, s),
                Side::U => y,
            };
            poly.horner_eval(field, z) == 0
        })
        .count()
}

/// Exact probability that a nonzero `delta` on one side passes, over uniform
/// distinct key points from `set`.
pub fn soundness_exact(
    field: &Field,
    delta: &[u64],
    set: &[u64],
    c: usize,
    side: Side,
) -> Result<BigRational, AuditError> {
    if delta.iter().all(|&d| d == 0) {
        return Err(AuditError::ZeroPerturbation);
    }
    let t = undetected_points(field, delta, set, side);
    Ok(BigRational::new(binomial(t, c), binomial(set.len(), c)))
}

/// Exact acceptance probability of a response pair: the two checks use
/// independent key halves, so the probabilities multiply (an unperturbed side
/// always passes).
pub fn soundness_exact_pair(
    field: &Field,
    delta_v: &[u64],
    delta_u: &[u64],
    set: &[u64],
    c: usize,
) -> Result<BigRational, AuditError> {
    let one = BigRational::from_integer(BigInt::from(1));
    let side = |delta: &[u64], side| -> Result<BigRational, AuditError> {
        if delta.iter().all(|&d| d == 0) {
            Ok(one.clone())
        } else {
            soundness_exact(field, delta, set, c, side)
        }
    };
    if delta_v.iter().chain(delta_u).all(|&d| d == 0) {
        return Err(AuditError::ZeroPerturbation);
    }
    Ok(side(delta_v, Side::V)? * side(delta_u, Side::U)?)
}

/// `C(s - 1, c) / C(r (s - 1), c)`, the best a single side can do.
pub fn soundness_ceiling(s: usize, r: usize, c: usize) -> BigRational {
    BigRational::new(binomial(s - 1, c), binomial(r * (s - 1), c))
}

/// Cheating provers. None of them sees `K_v`; they know the public `S`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Adversary {
    /// Adds uniform nonzero noise to `v` (and `u` if `both_sides`) on the
    /// first `support` coordinates.
    RandomPerturbation { support: usize, both_sides: bool },
    /// Picks `roots` points of `S` and perturbs `side` by the polynomial
    /// vanishing at their (powered) images.
    RootCrafting { roots: usize, side: Side },
    /// Answers with the honest response for a different query point.
    Replay,
}

impl Adversary {
    pub fn name(&self) -> &'static str {
        match self {
            Adversary::RandomPerturbation { .. } => "random-perturbation",
            Adversary::RootCrafting { .. } => "root-crafting",
            Adversary::Replay => "replay",
        }
    }

    /// Produces `(v_hat, u_hat) != (v, u)`.
    pub fn respond<R: Rng + ?Sized>(
        &self,
        config: &ProtocolConfig,
        x: u64,
        a: &Matrix,
        b: &Matrix,
        honest: &EvalResponse,
        rng: &mut R,
    ) -> Result<EvalResponse, AuditError> {
        let f = config.field();
        let s = config.s();
        let add = |base: &[u64], delta: &[u64]| -> Vec<u64> {
            base.iter().zip(delta).map(|(&p, &q)| f.add(p, q)).collect()
        };
        let out = match self {
            Adversary::RandomPerturbation { support, both_sides } => {
                let support = (*support).clamp(1, s);
                let mut noise = || loop {
                    let mut delta = vec![0; s];
                    for d in delta.iter_mut().take(support) {
                        *d = f.random(rng);
                    }
                    if delta.iter().any(|&d| d != 0) {
                        return delta;
                    }
                };
                let dv = noise();
                let du = if *both_sides { noise() } else { vec![0; s] };
                EvalResponse {
                    v: add(&honest.v, &dv),
                    u: add(&honest.u, &du),
                }
            }
            Adversary::RootCrafting { roots, side } => {
                let set = config.prohibited();
                let t = (*roots).clamp(1, s - 1);
                let chosen: Vec<u64> = sample(rng, set.len(), t).into_iter().map(|i| set[i]).collect();
                let points: Vec<u64> = chosen
                    .iter()
                    .map(|&y| match side {
                        Side::V => f.pow(y, s as u64),
                        Side::U => y,
                    })
                    .collect();
                let mut delta = vanishing_poly(f, &points);
                delta.resize(s, 0);
                match side {
                    Side::V => EvalResponse {
                        v: add(&honest.v, &delta),
                        u: honest.u.clone(),
                    },
                    Side::U => EvalResponse {
                        v: honest.v.clone(),
                        u: add(&honest.u, &delta),
                    },
                }
            }
            Adversary::Replay => {
                if config.xi() == 0 {
                    return Err(AuditError::Shape("replay needs two legal query points".into()));
                }
                let other = loop {
                    let y = rng.gen_range(0..=config.xi());
                    if y != x {
                        break y;
                    }
                };
                eval(config, other, a, b)?
            }
        };
        if out == *honest {
            return Err(AuditError::HonestResponse);
        }
        Ok(out)
    }
}

/// Coefficients (lowest first) of `prod (z - p)`.
pub fn vanishing_poly(field: &Field, points: &[u64]) -> Vec<u64> {
    let mut coeffs = vec![1u64];
    for &p in points {
        let mut next = vec![0u64; coeffs.len() + 1];
        for (k, &c) in coeffs.iter().enumerate() {
            next[k + 1] = field.add(next[k + 1], c);
            next[k] = field.sub(next[k], field.mul(c, p));
        }
        coeffs = next;
    }
    coeffs
}

#[derive(Clone, Debug, PartialEq)]
pub struct McReport {
    pub adversary: String,
    pub trials: usize,
    pub accepted: usize,
    pub rate: f64,
    /// Mean of the exact per-trial acceptance probabilities.
    pub expected: f64,
    /// Standard deviation of the acceptance count's mean under the exact
    /// per-trial probabilities.
    pub sigma: f64,
    /// Largest per-trial exact probability seen.
    pub max_exact: BigRational,
}

impl McReport {
    pub fn within(&self, k_sigma: f64) -> bool {
        (self.rate - self.expected).abs() <= k_sigma * self.sigma + 1e-12
    }

    /// Binomial standard error of the measured rate.
    pub fn binomial_sigma(&self) -> f64 {
        (self.rate * (1.0 - self.rate) / self.trials as f64).sqrt()
    }
}

struct Trial {
    accepted: bool,
    exact: BigRational,
}

fn run_trial(config: &ProtocolConfig, adversary: &Adversary, rng: &mut ChaCha20Rng) -> Result<Trial, AuditError> {
    let f = config.field();
    let s = config.s();
    let a = Matrix::random(f, s, s, rng);
    let pkey = keygen_prover(config, rng);
    let x = rng.gen_range(0..=config.xi());
    let honest = eval(config, x, &a, &pkey.b)?;
    let forged = adversary.respond(config, x, &a, &pkey.b, &honest, rng)?;
    let diff = |p: &[u64], q: &[u64]| -> Vec<u64> { p.iter().zip(q).map(|(&a, &b)| f.sub(a, b)).collect() };
    let exact = soundness_exact_pair(
        f,
        &diff(&forged.v, &honest.v),
        &diff(&forged.u, &honest.u),
        config.prohibited(),
        config.c(),
    )?;
    let vkey = keygen_verifier(config, rng);
    let vk = commit_direct(config, &a, &vkey, &pkey)?;
    let verifier = VerifierState::new(config, &vkey, &vk)?;
    let accepted = verifier.check(x, &forged, &mut OpCounter::default()).is_accept();
    Ok(Trial { accepted, exact })
}

/// Runs `trials` independent cheating rounds with fresh keys and polynomial,
/// each on its own substream of `seeds`.
pub fn monte_carlo_detection(
    adversary: &Adversary,
    config: &ProtocolConfig,
    trials: usize,
    seeds: &SeedTree,
    exec: Exec,
) -> Result<McReport, AuditError> {
    if trials < 1000 {
        return Err(AuditError::Shape(format!("need at least 1000 trials, got {trials}")));
    }
    let results = exec.map(trials, |t| run_trial(config, adversary, &mut seeds.stream("trial", t as u64)));
    let mut accepted = 0;
    let mut expected = 0.0;
    let mut variance = 0.0;
    let mut max_exact = BigRational::from_integer(BigInt::from(0));
    for r in results {
        let r = r?;
        accepted += r.accepted as usize;
        let p = ratio_to_f64(&r.exact);
        expected += p;
        variance += p * (1.0 - p);
        if r.exact > max_exact {
            max_exact = r.exact;
        }
    }
    let n = trials as f64;
    Ok(McReport {
        adversary: adversary.name().to_string(),
        trials,
        accepted,
        rate: accepted as f64 / n,
        expected: expected / n,
        sigma: variance.sqrt() / n,
        max_exact,
    })
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn gf11() -> Field {
        Field::prime(11).unwrap()
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(8, 3), BigInt::from(56));
        assert_eq!(binomial(4, 3), BigInt::from(4));
        assert_eq!(binomial(2, 3), BigInt::from(0));
        assert_eq!(binomial(5, 0), BigInt::from(1));
    }

    #[test]
    fn exact_examples() {
        let f = gf11();
        let set = [7, 8, 9, 10];
        // constant perturbation has no roots
        assert_eq!(soundness_exact(&f, &[3, 0, 0], &set, 1, Side::V).unwrap(), rat(0, 1));
        let delta = vanishing_poly(&f, &[f.pow(7, 3), f.pow(8, 3)]);
        assert_eq!(soundness_exact(&f, &delta, &set, 1, Side::V).unwrap(), rat(1, 2));
        assert!(soundness_exact(&f, &[0, 0, 0], &set, 1, Side::V).is_err());
        let delta_u = vanishing_poly(&f, &[7, 9]);
        assert_eq!(soundness_exact(&f, &delta_u, &set, 1, Side::U).unwrap(), rat(1, 2));
        assert!(soundness_exact(&f, &delta_u, &set, 1, Side::V).unwrap() < rat(1, 2));
        assert_eq!(soundness_ceiling(5, 2, 3), rat(1, 14));
    }

    #[test]
    fn vanishing_poly_roots() {
        let f = Field::prime(13).unwrap();
        let p = vanishing_poly(&f, &[2, 5, 7]);
        assert_eq!(p.len(), 4);
        let poly = Polynomial::new(p);
        for x in 0..13 {
            assert_eq!(poly.horner_eval(&f, x) == 0, [2, 5, 7].contains(&x));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(500))]
        #[test]
        fn exact_never_exceeds_ceiling(delta in proptest::collection::vec(0u64..13, 5), c in 1usize..=3, u_side in any::<bool>()) {
            prop_assume!(delta.iter().any(|&d| d != 0));
            let f = Field::prime(13).unwrap();
            let set: Vec<u64> = (5..13).collect();
            let side = if u_side { Side::U } else { Side::V };
            let p = soundness_exact(&f, &delta, &set, c, side).unwrap();
            let ceiling = soundness_ceiling(5, 2, c);
            prop_assert!(p <= ceiling);
            prop_assert!(ceiling <= rat(1, 2i64.pow(c as u32)));
        }
    }

    #[test]
    fn exact_matches_key_enumeration() {
        // fraction of ordered distinct key tuples that pass equals the formula
        let f = gf11();
        let set = [7u64, 8, 9, 10];
        let poly = Polynomial::new(vanishing_poly(&f, &[f.pow(8, 3), f.pow(10, 3)]));
        let passes = |k: u64| poly.horner_eval(&f, f.pow(k, 3)) == 0;
        let single = set.iter().filter(|&&a| passes(a)).count() as i64;
        assert_eq!(
            soundness_exact(&f, &poly.coeffs, &set, 1, Side::V).unwrap(),
            rat(single, set.len() as i64)
        );
        let mut pass = 0;
        let mut total = 0;
        for a in set {
            for b in set {
                if a != b {
                    total += 1;
                    pass += (passes(a) && passes(b)) as i64;
                }
            }
        }
        assert_eq!(soundness_exact(&f, &poly.coeffs, &set, 2, Side::V).unwrap(), rat(pass, total));
    }

    fn cfg13(c: usize) -> ProtocolConfig {
        ProtocolConfig::new(Field::prime(13).unwrap(), 25, 2, c, 4).unwrap()
    }

    #[test]
    fn root_crafting_single_key() {
        let cfg = ProtocolConfig::new(gf11(), 9, 2, 1, 6).unwrap();
        let adv = Adversary::RootCrafting { roots: 2, side: Side::V };
        let r = monte_carlo_detection(&adv, &cfg, 4000, &SeedTree::new(1), Exec::Parallel).unwrap();
        assert_eq!(r.max_exact, rat(1, 2));
        assert!((r.expected - 0.5).abs() < 1e-12);
        assert!(r.within(3.0), "{r:?}");
    }

    #[test]
    fn every_adversary_consistent_with_oracle() {
        let cfg = cfg13(3);
        for adv in [
            Adversary::RandomPerturbation { support: 5, both_sides: false },
            Adversary::RandomPerturbation { support: 2, both_sides: true },
            Adversary::RootCrafting { roots: 4, side: Side::V },
            Adversary::RootCrafting { roots: 4, side: Side::U },
            Adversary::Replay,
        ] {
            let r = monte_carlo_detection(&adv, &cfg, 3000, &SeedTree::new(2), Exec::Parallel).unwrap();
            assert!(r.within(3.0), "{r:?}");
            assert!(r.max_exact <= soundness_ceiling(5, 2, 3), "{r:?}");
        }
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let cfg = cfg13(2);
        let adv = Adversary::RootCrafting { roots: 3, side: Side::U };
        let a = monte_carlo_detection(&adv, &cfg, 1000, &SeedTree::new(3), Exec::Sequential).unwrap();
        let b = monte_carlo_detection(&adv, &cfg, 1000, &SeedTree::new(3), Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_trials_rejected() {
        let cfg = cfg13(1);
        let adv = Adversary::Replay;
        assert!(monte_carlo_detection(&adv, &cfg, 10, &SeedTree::new(0), Exec::Sequential).is_err());
    }
}
