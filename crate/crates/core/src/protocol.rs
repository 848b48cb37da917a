//! Commit, evaluate, verify and recover.
//!
//! With `f(x) = high(x) A low(x)^T`, the prover masks `A` with a uniform `B`
//! and the verifier obtains, through `2c` S2PC sessions,
//!
//! ```text
//! Gamma = Lambda (A + B)      (c x s, rows high(lambda_i) (A + B))
//! Omega = B Theta^T           (s x c, columns B low(theta_i)^T)
//! ```
//!
//! Per query `x` the prover returns `v = (A + B) low(x)^T` and `u = high(x) B`.
//! The verifier accepts iff `Gamma low(x)^T = Lambda v` and
//! `u Theta^T = high(x) Omega`, and recovers `f(x) = high(x) v - u low(x)^T`.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

use crate::exec::Exec;
use crate::field::{gcd, is_prime, Field, FieldError, SpecViolation};
use crate::ot::{BoundedStorageOt, BsOtParams, IdealOt2, Ot2Backend, SenderEvent};
use crate::polymat::{power_values, structured_matrix, Direction, Matrix, PolyMatError};
use crate::rng::SeedTree;
use crate::s2pc::{Eta, S2pcError, S2pcSpec};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("degree bound {0} is not a perfect square")]
    NotSquare(usize),
    #[error("s = {s} must be at least 2")]
    TooSmall { s: usize },
    #[error("field violates the permutation condition: {0}")]
    Permutation(SpecViolation),
    #[error("r = {0} must be at least 2")]
    BadR(usize),
    #[error("c = {c} must be between 1 and |S| = {set}")]
    BadC { c: usize, set: usize },
    #[error("xi = {0} is not a field element")]
    BadXi(u64),
    #[error("{}", field_too_small(*needed, *available, *suggestion))]
    FieldTooSmall {
        needed: usize,
        available: usize,
        suggestion: Option<u64>,
    },
    #[error("query {x} exceeds the verifier bound xi = {xi}; refused")]
    Refused { x: u64, xi: u64 },
    #[error("key point {0} is outside the prohibited set")]
    KeyOutsideSet(u64),
    #[error("duplicate key point {0}")]
    DuplicateKey(u64),
    #[error("commitment aborted: {0}")]
    Commit(#[from] S2pcError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    PolyMat(#[from] PolyMatError),
}

fn field_too_small(needed: usize, available: usize, suggestion: Option<u64>) -> String {
    let mut msg = format!(
        "field too small: prohibited set needs {needed} elements above xi, only {available} available"
    );
    if let Some(q) = suggestion {
        msg.push_str(&format!("; q = {q} satisfies both the size and gcd(s, q-1) = 1 constraints"));
    }
    msg
}

/// Public protocol parameters `(q, d, s, r, c, xi, S)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolConfig {
    field: Field,
    d: usize,
    s: usize,
    r: usize,
    c: usize,
    xi: u64,
    prohibited: Vec<u64>,
}

impl ProtocolConfig {
    pub fn new(field: Field, d: usize, r: usize, c: usize, xi: u64) -> Result<Self, ProtocolError> {
        let s = d.isqrt();
        if s * s != d {
            return Err(ProtocolError::NotSquare(d));
        }
        if s < 2 {
            return Err(ProtocolError::TooSmall { s });
        }
        field
            .validate_spec(s as u64)
            .map_err(ProtocolError::Permutation)?;
        if r < 2 {
            return Err(ProtocolError::BadR(r));
        }
        if !field.contains(xi) {
            return Err(ProtocolError::BadXi(xi));
        }
        let prohibited = derive_prohibited_set(&field, s, r, xi)?;
        if c == 0 || c > prohibited.len() {
            return Err(ProtocolError::BadC {
                c,
                set: prohibited.len(),
            });
        }
        Ok(ProtocolConfig {
            field,
            d,
            s,
            r,
            c,
            xi,
            prohibited,
        })
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn xi(&self) -> u64 {
        self.xi
    }

    /// The prohibited set `S`, in canonical order.
    pub fn prohibited(&self) -> &[u64] {
        &self.prohibited
    }

    /// Queries allowed before the privacy floor `d - (m + c)^2` reaches zero.
    pub fn query_soft_cap(&self) -> usize {
        self.s.saturating_sub(self.c)
    }

    pub fn allows_query(&self, x: u64) -> bool {
        x <= self.xi
    }
}

/// The `r (s - 1)` smallest field elements strictly greater than `xi`.
pub fn derive_prohibited_set(field: &Field, s: usize, r: usize, xi: u64) -> Result<Vec<u64>, ProtocolError> {
    let needed = r.saturating_mul(s - 1);
    let available = (field.order() - 1).saturating_sub(xi) as usize;
    if available < needed {
        let min_order = xi.saturating_add(needed as u64).saturating_add(1);
        return Err(ProtocolError::FieldTooSmall {
            needed,
            available,
            suggestion: suggest_field_order(s, min_order),
        });
    }
    Ok((xi + 1..=xi + needed as u64).collect())
}

/// Smallest supported field order `q >= min_order` with `gcd(s, q - 1) = 1`:
/// a prime, or for even `s` a power of two up to 256.
pub fn suggest_field_order(s: usize, min_order: u64) -> Option<u64> {
    let s = s as u64;
    if s.is_multiple_of(2) {
        return (1..=8u32)
            .map(|k| 1u64 << k)
            .find(|&q| q >= min_order && gcd(s, q - 1) == 1);
    }
    let mut q = min_order.max(3);
    while q < 1 << 62 {
        if is_prime(q) && gcd(s, q - 1) == 1 {
            return Some(q);
        }
        q += 1;
    }
    None
}

/// `K_v = (lambda_1..lambda_c, theta_1..theta_c)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerifierKey {
    pub lambdas: Vec<u64>,
    pub thetas: Vec<u64>,
}

/// `K_p = B`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProverKey {
    pub b: Matrix,
}

/// `VK = (Gamma, Omega)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerificationKey {
    pub gamma: Matrix,
    pub omega: Matrix,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalResponse {
    pub v: Vec<u64>,
    pub u: Vec<u64>,
}

pub fn keygen_verifier<R: Rng + ?Sized>(config: &ProtocolConfig, rng: &mut R) -> VerifierKey {
    let set = config.prohibited();
    let mut draw = || -> Vec<u64> {
        sample(rng, set.len(), config.c())
            .into_iter()
            .map(|i| set[i])
            .collect()
    };
    let lambdas = draw();
    let thetas = draw();
    VerifierKey { lambdas, thetas }
}

pub fn keygen_prover<R: Rng + ?Sized>(config: &ProtocolConfig, rng: &mut R) -> ProverKey {
    ProverKey {
        b: Matrix::random(config.field(), config.s(), config.s(), rng),
    }
}

impl VerifierKey {
    pub fn validate(&self, config: &ProtocolConfig) -> Result<(), ProtocolError> {
        for group in [&self.lambdas, &self.thetas] {
            if group.len() != config.c() {
                return Err(ProtocolError::BadC {
                    c: group.len(),
                    set: config.prohibited().len(),
                });
            }
            let mut seen = HashSet::new();
            for &p in group.iter() {
                if config.prohibited().binary_search(&p).is_err() {
                    return Err(ProtocolError::KeyOutsideSet(p));
                }
                if !seen.insert(p) {
                    return Err(ProtocolError::DuplicateKey(p));
                }
            }
        }
        Ok(())
    }
}

/// Field-operation counts for one round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct OpCounter {
    pub mul: u64,
    pub add: u64,
}

impl OpCounter {
    pub fn total(&self) -> u64 {
        self.mul + self.add
    }

    fn dot(&mut self, field: &Field, a: &[u64], b: &[u64]) -> u64 {
        self.mul += a.len() as u64;
        self.add += a.len().saturating_sub(1) as u64;
        crate::polymat::dot(field, a, b)
    }

    fn powers(&mut self, field: &Field, x: u64, s: usize, direction: Direction) -> Vec<u64> {
        self.mul += s.saturating_sub(1) as u64;
        if direction == Direction::High {
            // square-and-multiply for x^s
            self.mul += 2 * u64::from(usize::BITS - s.leading_zeros());
        }
        power_values(field, x, s, direction)
    }

    /// `M w^T`.
    fn mat_vec(&mut self, field: &Field, m: &Matrix, w: &[u64]) -> Vec<u64> {
        (0..m.rows()).map(|i| self.dot(field, m.row(i), w)).collect()
    }

    /// `w M`.
    fn vec_mat(&mut self, field: &Field, w: &[u64], m: &Matrix) -> Vec<u64> {
        self.mul += (m.rows() * m.cols()) as u64;
        self.add += (m.rows().saturating_sub(1) * m.cols()) as u64;
        m.vec_mul(field, w).expect("dimensions checked by caller")
    }
}

/// Prover state for the evaluation phase: `A + B` and `B`.
#[derive(Clone, Debug)]
pub struct ProverState {
    field: Field,
    xi: u64,
    h: Matrix,
    b: Matrix,
}

impl ProverState {
    pub fn new(config: &ProtocolConfig, a: &Matrix, key: &ProverKey) -> Result<Self, ProtocolError> {
        let s = config.s();
        for m in [a, &key.b] {
            if m.rows() != s || m.cols() != s {
                return Err(PolyMatError::Dimension(format!("expected {s}x{s}, got {}x{}", m.rows(), m.cols())).into());
            }
        }
        Ok(Self::unchecked(config.field(), config.xi(), a, &key.b)?)
    }

    /// Builds a state without a validated configuration (benchmarks at shapes
    /// the permutation condition rules out).
    pub fn unchecked(field: &Field, xi: u64, a: &Matrix, b: &Matrix) -> Result<Self, PolyMatError> {
        Ok(ProverState {
            field: field.clone(),
            xi,
            h: a.add(field, b)?,
            b: b.clone(),
        })
    }

    pub fn s(&self) -> usize {
        self.h.rows()
    }

    pub fn respond(&self, x: u64, ops: &mut OpCounter) -> Result<EvalResponse, ProtocolError> {
        if x > self.xi {
            return Err(ProtocolError::Refused { x, xi: self.xi });
        }
        let f = &self.field;
        let s = self.s();
        let low = ops.powers(f, x, s, Direction::Low);
        let high = ops.powers(f, x, s, Direction::High);
        let v = ops.mat_vec(f, &self.h, &low);
        let u = ops.vec_mat(f, &high, &self.b);
        Ok(EvalResponse { v, u })
    }
}

/// `v = (A + B) low(x)^T`, `u = high(x) B`; refuses `x > xi`.
pub fn eval(config: &ProtocolConfig, x: u64, a: &Matrix, b: &Matrix) -> Result<EvalResponse, ProtocolError> {
    ProverState::new(config, a, &ProverKey { b: b.clone() })?.respond(x, &mut OpCounter::default())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rejection {
    Dimension(String),
    /// `Gamma low(x)^T != Lambda v`
    GammaParity,
    /// `u Theta^T != high(x) Omega`
    OmegaParity,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject(Rejection),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

/// Verifier state for the evaluation phase: `Lambda`, `Theta` and `VK`.
#[derive(Clone, Debug)]
pub struct VerifierState {
    field: Field,
    lambda: Matrix,
    theta: Matrix,
    vk: VerificationKey,
}

impl VerifierState {
    pub fn new(config: &ProtocolConfig, key: &VerifierKey, vk: &VerificationKey) -> Result<Self, ProtocolError> {
        key.validate(config)?;
        let (s, c) = (config.s(), config.c());
        if (vk.gamma.rows(), vk.gamma.cols(), vk.omega.rows(), vk.omega.cols()) != (c, s, s, c) {
            return Err(PolyMatError::Dimension(format!(
                "verification key shapes {}x{} and {}x{}",
                vk.gamma.rows(),
                vk.gamma.cols(),
                vk.omega.rows(),
                vk.omega.cols()
            ))
            .into());
        }
        Ok(Self::unchecked(config.field(), s, key, vk)?)
    }

    pub fn unchecked(field: &Field, s: usize, key: &VerifierKey, vk: &VerificationKey) -> Result<Self, PolyMatError> {
        Ok(VerifierState {
            field: field.clone(),
            lambda: structured_matrix(field, &key.lambdas, s, Direction::High)?.matrix,
            theta: structured_matrix(field, &key.thetas, s, Direction::Low)?.matrix,
            vk: vk.clone(),
        })
    }

    pub fn s(&self) -> usize {
        self.lambda.cols()
    }

    pub fn lambda(&self) -> &Matrix {
        &self.lambda
    }

    pub fn theta(&self) -> &Matrix {
        &self.theta
    }

    pub fn check(&self, x: u64, resp: &EvalResponse, ops: &mut OpCounter) -> Verdict {
        let s = self.s();
        if resp.v.len() != s || resp.u.len() != s {
            return Verdict::Reject(Rejection::Dimension(format!(
                "response lengths {} and {}, expected {s}",
                resp.v.len(),
                resp.u.len()
            )));
        }
        if resp.v.iter().chain(&resp.u).any(|&e| !self.field.contains(e)) {
            return Verdict::Reject(Rejection::Dimension("response element out of range".into()));
        }
        let f = &self.field;
        let low = ops.powers(f, x, s, Direction::Low);
        let high = ops.powers(f, x, s, Direction::High);
        if ops.mat_vec(f, &self.vk.gamma, &low) != ops.mat_vec(f, &self.lambda, &resp.v) {
            return Verdict::Reject(Rejection::GammaParity);
        }
        if ops.mat_vec(f, &self.theta, &resp.u) != ops.vec_mat(f, &high, &self.vk.omega) {
            return Verdict::Reject(Rejection::OmegaParity);
        }
        Verdict::Accept
    }
}

pub fn verify(
    config: &ProtocolConfig,
    x: u64,
    resp: &EvalResponse,
    vk: &VerificationKey,
    key: &VerifierKey,
) -> Result<Verdict, ProtocolError> {
    Ok(VerifierState::new(config, key, vk)?.check(x, resp, &mut OpCounter::default()))
}

/// `high(x) v - u low(x)^T`.
pub fn recover(field: &Field, x: u64, resp: &EvalResponse) -> u64 {
    let s = resp.v.len();
    let low = power_values(field, x, s, Direction::Low);
    let high = power_values(field, x, s, Direction::High);
    let h = crate::polymat::dot(field, &high, &resp.v);
    let g = crate::polymat::dot(field, &resp.u, &low);
    field.sub(h, g)
}

/// `(Gamma, Omega)` computed directly, without OT.
pub fn commit_direct(
    config: &ProtocolConfig,
    a: &Matrix,
    vkey: &VerifierKey,
    pkey: &ProverKey,
) -> Result<VerificationKey, ProtocolError> {
    let f = config.field();
    let s = config.s();
    let h = a.add(f, &pkey.b)?;
    let lambda = structured_matrix(f, &vkey.lambdas, s, Direction::High)?.matrix;
    let theta = structured_matrix(f, &vkey.thetas, s, Direction::Low)?.matrix;
    Ok(VerificationKey {
        gamma: lambda.mul(f, &h)?,
        omega: pkey.b.mul(f, &theta.transpose())?,
    })
}

/// 1-of-2 realization used by [`commit`].
#[derive(Clone, Debug, PartialEq)]
pub enum OtBackendKind {
    Ideal,
    BoundedStorage(BsOtParams),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommitOutput {
    pub vk: VerificationKey,
    /// The prover's (OT sender's) view of each S2PC session, in session order.
    pub prover_view: Vec<Vec<SenderEvent>>,
}

/// Runs the `2c` S2PC sessions: sessions `0..c` fetch `eta_1(lambda_i, A + B)`,
/// sessions `c..2c` fetch `eta_2(theta_i, B)`. Any failure aborts the whole
/// commitment.
pub fn commit(
    config: &ProtocolConfig,
    a: &Matrix,
    vkey: &VerifierKey,
    pkey: &ProverKey,
    backend: &OtBackendKind,
    seeds: &SeedTree,
    exec: Exec,
) -> Result<CommitOutput, ProtocolError> {
    vkey.validate(config)?;
    let f = config.field();
    let c = config.c();
    let h = a.add(f, &pkey.b)?;
    let high = S2pcSpec::new(f, config.prohibited().to_vec(), Eta::High)?;
    let low = S2pcSpec::new(f, config.prohibited().to_vec(), Eta::Low)?;

    let run = |j: usize| -> Result<(Vec<u64>, Vec<SenderEvent>), S2pcError> {
        let mut table_rng = seeds.stream("s2pc-table", j as u64);
        let mut ot: Box<dyn Ot2Backend> = match backend {
            OtBackendKind::Ideal => Box::new(IdealOt2::default()),
            OtBackendKind::BoundedStorage(params) => Box::new(BoundedStorageOt::with_rngs(
                params.clone(),
                seeds.stream("ot-sender", j as u64),
                seeds.stream("ot-receiver", j as u64),
            )),
        };
        let out = if j < c {
            high.run(vkey.lambdas[j], &h, ot.as_mut(), &mut table_rng)?
        } else {
            low.run(vkey.thetas[j - c], &pkey.b, ot.as_mut(), &mut table_rng)?
        };
        Ok((out, ot.sender_view().to_vec()))
    };
    let results = exec.map(2 * c, run);

    let s = config.s();
    let mut gamma = Matrix::zeros(c, s);
    let mut omega = Matrix::zeros(s, c);
    let mut prover_view = Vec::with_capacity(2 * c);
    for (j, result) in results.into_iter().enumerate() {
        let (out, view) = result?;
        for (k, v) in out.into_iter().enumerate() {
            if j < c {
                gamma.set(j, k, v);
            } else {
                omega.set(k, j - c, v);
            }
        }
        prover_view.push(view);
    }
    Ok(CommitOutput {
        vk: VerificationKey { gamma, omega },
        prover_view,
    })
}
