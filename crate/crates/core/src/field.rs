//! Finite-field arithmetic over F_q.
//!
//! Two backends share one [`Field`] handle:
//!
//! * `Prime`: arithmetic modulo an odd prime `p < 2^62`, the performance path.
//! * `Table`: explicit addition and multiplication tables for `q <= 256`, used for
//!   prime-power fields such as GF(4) and for exhaustive enumeration.
//!
//! Elements are stored as their canonical integer representative in `[0, q)`. Hot
//! paths (matrices, protocol rounds) operate on raw `u64` values through the
//! unchecked methods on [`Field`]; [`FieldElement`] carries the field identity and is
//! what the checked API hands out.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Largest modulus accepted by the prime backend.
pub const MAX_PRIME: u64 = 1 << 62;
/// Largest order accepted by the table backend.
pub const MAX_TABLE_ORDER: usize = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("modulus {0} is not an odd prime below 2^62")]
    NotPrime(u64),
    #[error("table field order {0} is outside 2..=256")]
    BadOrder(usize),
    #[error("{0} is not a prime power in 2..=256")]
    NotPrimePower(u64),
    #[error("tables do not define a field: {0}")]
    Axiom(String),
    #[error("operands belong to different fields")]
    MixedFields,
    #[error("inverse of zero")]
    ZeroInverse,
    #[error("exponent {0} is not supported (use e >= 0 or e = -1)")]
    BadExponent(i64),
    #[error("value {value} is out of range for a field of order {order}")]
    OutOfRange { value: u64, order: u64 },
}

/// Description of F_q, as stored in configuration files.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FieldSpec {
    Prime { modulus: u64 },
    Table { tables: FieldTables },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldTables {
    pub add: Vec<Vec<u8>>,
    pub mul: Vec<Vec<u8>>,
}

/// Opaque identity of a field, derived from its full description.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldId(u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Neg,
}

/// Why a field cannot host the protocol with a given `s`.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SpecViolation {
    #[error("gcd({s}, q-1 = {q_minus_1}) = {gcd}; x -> x^{s} is not a permutation")]
    NotPermutation { s: u64, q_minus_1: u64, gcd: u64 },
    #[error("field tables invalid: {0}")]
    Tables(String),
}

/// A field element tagged with the identity of its field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    field: FieldId,
}

impl FieldElement {
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn field_id(&self) -> FieldId {
        self.field
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

#[derive(Debug)]
enum Backend {
    Prime {
        p: u64,
    },
    Table {
        q: usize,
        add: Vec<u8>,
        mul: Vec<u8>,
        neg: Vec<u8>,
        inv: Vec<u8>,
    },
}

#[derive(Debug)]
struct Inner {
    spec: FieldSpec,
    backend: Backend,
    id: FieldId,
}

/// Cheaply clonable handle to F_q.
#[derive(Clone, Debug)]
pub struct Field(Arc<Inner>);

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.0.id == other.0.id
    }
}

impl Eq for Field {}

impl Field {
    /// Prime field of odd prime order `p < 2^62`.
    pub fn prime(p: u64) -> Result<Self, FieldError> {
        if !(3..MAX_PRIME).contains(&p) || !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        let spec = FieldSpec::Prime { modulus: p };
        let id = fingerprint(&spec);
        Ok(Field(Arc::new(Inner {
            spec,
            backend: Backend::Prime { p },
            id,
        })))
    }

    /// Field from explicit tables. The tables are checked exhaustively against the
    /// field axioms, with 0 and 1 as the additive and multiplicative identities.
    pub fn from_tables(tables: FieldTables) -> Result<Self, FieldError> {
        let q = tables.add.len();
        if !(2..=MAX_TABLE_ORDER).contains(&q) {
            return Err(FieldError::BadOrder(q));
        }
        if tables.mul.len() != q || tables.add.iter().chain(&tables.mul).any(|r| r.len() != q) {
            return Err(FieldError::Axiom(format!("tables must both be {q}x{q}")));
        }
        let flat = |t: &Vec<Vec<u8>>| t.iter().flatten().copied().collect::<Vec<u8>>();
        let add = flat(&tables.add);
        let mul = flat(&tables.mul);
        check_axioms(q, &add, &mul).map_err(FieldError::Axiom)?;

        let mut neg = vec![0u8; q];
        let mut inv = vec![0u8; q];
        for a in 0..q {
            neg[a] = (0..q).find(|&b| add[a * q + b] == 0).unwrap() as u8;
            if a != 0 {
                inv[a] = (1..q).find(|&b| mul[a * q + b] == 1).unwrap() as u8;
            }
        }
        let spec = FieldSpec::Table { tables };
        let id = fingerprint(&spec);
        Ok(Field(Arc::new(Inner {
            spec,
            backend: Backend::Table {
                q,
                add,
                mul,
                neg,
                inv,
            },
            id,
        })))
    }

    /// GF(p^k) with `p^k <= 256`, built from the lexicographically first monic
    /// irreducible polynomial of degree `k`. Elements are encoded as
    /// `c_0 + c_1 p + ... + c_{k-1} p^{k-1}` for the residue `c_0 + c_1 X + ...`.
    pub fn extension(p: u64, k: u32) -> Result<Self, FieldError> {
        let q = p.checked_pow(k).filter(|&q| q as usize <= MAX_TABLE_ORDER);
        let q = match q {
            Some(q) if k >= 1 && is_prime(p) => q as usize,
            _ => return Err(FieldError::NotPrimePower(p.saturating_pow(k))),
        };
        let p = p as usize;
        let k = k as usize;
        let modulus = first_irreducible(p, k);
        let digits = |mut v: usize| {
            let mut d = vec![0usize; k];
            for slot in d.iter_mut() {
                *slot = v % p;
                v /= p;
            }
            d
        };
        let encode = |d: &[usize]| d.iter().rev().fold(0usize, |acc, &c| acc * p + c);
        let mut add = vec![vec![0u8; q]; q];
        let mut mul = vec![vec![0u8; q]; q];
        for a in 0..q {
            let da = digits(a);
            for b in 0..q {
                let db = digits(b);
                let sum: Vec<usize> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                add[a][b] = encode(&sum) as u8;
                mul[a][b] = encode(&poly_mul_mod(&da, &db, &modulus, p)) as u8;
            }
        }
        Self::from_tables(FieldTables { add, mul })
    }

    /// GF(4) with `omega` encoded as 2 and `omega^2 = omega + 1` as 3.
    pub fn gf4() -> Self {
        Self::extension(2, 2).expect("GF(4) is a field")
    }

    /// Picks the backend for a field of order `q`: prime kind for odd primes, table
    /// kind for any other prime power up to 256.
    pub fn from_order(q: u64) -> Result<Self, FieldError> {
        if q >= 3 && is_prime(q) {
            return Self::prime(q);
        }
        match prime_power(q) {
            Some((p, k)) if q as usize <= MAX_TABLE_ORDER => Self::extension(p, k),
            _ => Err(FieldError::NotPrimePower(q)),
        }
    }

    pub fn from_spec(spec: &FieldSpec) -> Result<Self, FieldError> {
        match spec {
            FieldSpec::Prime { modulus } => Self::prime(*modulus),
            FieldSpec::Table { tables } => Self::from_tables(tables.clone()),
        }
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.0.spec
    }

    pub fn id(&self) -> FieldId {
        self.0.id
    }

    pub fn order(&self) -> u64 {
        match &self.0.backend {
            Backend::Prime { p } => *p,
            Backend::Table { q, .. } => *q as u64,
        }
    }

    pub fn is_table(&self) -> bool {
        matches!(self.0.backend, Backend::Table { .. })
    }

    /// Serialized width of one element: 8 bytes for prime kind, 1 for table kind.
    pub fn element_width(&self) -> usize {
        match self.0.backend {
            Backend::Prime { .. } => 8,
            Backend::Table { .. } => 1,
        }
    }

    pub fn contains(&self, v: u64) -> bool {
        v < self.order()
    }

    /// Wraps a canonical value, rejecting anything outside `[0, q)`.
    pub fn element(&self, value: u64) -> Result<FieldElement, FieldError> {
        if !self.contains(value) {
            return Err(FieldError::OutOfRange {
                value,
                order: self.order(),
            });
        }
        Ok(FieldElement {
            value,
            field: self.id(),
        })
    }

    fn own(&self, e: FieldElement) -> Result<u64, FieldError> {
        if e.field == self.id() {
            Ok(e.value)
        } else {
            Err(FieldError::MixedFields)
        }
    }

    fn wrap(&self, value: u64) -> FieldElement {
        FieldElement {
            value,
            field: self.id(),
        }
    }

    /// Checked arithmetic on tagged elements. `b` is ignored for `Neg`.
    pub fn arith(
        &self,
        a: FieldElement,
        op: ArithOp,
        b: FieldElement,
    ) -> Result<FieldElement, FieldError> {
        let (a, b) = (self.own(a)?, self.own(b)?);
        Ok(self.wrap(match op {
            ArithOp::Add => self.add(a, b),
            ArithOp::Sub => self.sub(a, b),
            ArithOp::Mul => self.mul(a, b),
            ArithOp::Neg => self.neg(a),
        }))
    }

    /// `a^e` for `e >= 0` (with `0^0 = 1`), the inverse for `e = -1`.
    pub fn inv_pow(&self, a: FieldElement, e: i64) -> Result<FieldElement, FieldError> {
        let a = self.own(a)?;
        match e {
            -1 => self.inv(a).map(|v| self.wrap(v)),
            e if e >= 0 => Ok(self.wrap(self.pow(a, e as u64))),
            _ => Err(FieldError::BadExponent(e)),
        }
    }

    pub fn compare(&self, a: FieldElement, b: FieldElement) -> Result<Ordering, FieldError> {
        Ok(self.own(a)?.cmp(&self.own(b)?))
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        self.wrap(self.random(rng))
    }

    // Raw arithmetic on canonical representatives. Inputs must be `< q`.

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        match &self.0.backend {
            Backend::Prime { p } => {
                let s = a + b;
                if s >= *p {
                    s - p
                } else {
                    s
                }
            }
            Backend::Table { q, add, .. } => add[a as usize * q + b as usize] as u64,
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        match &self.0.backend {
            Backend::Prime { p } => {
                if a == 0 {
                    0
                } else {
                    p - a
                }
            }
            Backend::Table { neg, .. } => neg[a as usize] as u64,
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        match &self.0.backend {
            Backend::Prime { p } => ((a as u128 * b as u128) % *p as u128) as u64,
            Backend::Table { q, mul, .. } => mul[a as usize * q + b as usize] as u64,
        }
    }

    /// Multiply-accumulate `acc + a*b`.
    #[inline]
    pub fn mul_add(&self, acc: u64, a: u64, b: u64) -> u64 {
        self.add(acc, self.mul(a, b))
    }

    pub fn pow(&self, mut base: u64, mut e: u64) -> u64 {
        let mut acc = 1;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u64) -> Result<u64, FieldError> {
        if a == 0 {
            return Err(FieldError::ZeroInverse);
        }
        Ok(match &self.0.backend {
            Backend::Prime { p } => self.pow(a, p - 2),
            Backend::Table { inv, .. } => inv[a as usize] as u64,
        })
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        rng.gen_range(0..self.order())
    }

    /// All elements in canonical order. Intended for small fields.
    pub fn elements(&self) -> impl Iterator<Item = u64> {
        0..self.order()
    }

    /// Checks that `x -> x^s` permutes F_q (and, for table fields, re-checks the
    /// axioms).
    pub fn validate_spec(&self, s: u64) -> Result<(), SpecViolation> {
        if let Backend::Table { q, add, mul, .. } = &self.0.backend {
            check_axioms(*q, add, mul).map_err(SpecViolation::Tables)?;
        }
        let q_minus_1 = self.order() - 1;
        let g = gcd(s, q_minus_1);
        if g != 1 {
            return Err(SpecViolation::NotPermutation {
                s,
                q_minus_1,
                gcd: g,
            });
        }
        Ok(())
    }

    pub fn write_element(&self, v: u64, out: &mut Vec<u8>) {
        match self.element_width() {
            8 => out.extend_from_slice(&v.to_le_bytes()),
            _ => out.push(v as u8),
        }
    }

    /// Reads one element from the front of `bytes`, returning it and the bytes used.
    pub fn read_element(&self, bytes: &[u8]) -> Result<(u64, usize), FieldError> {
        let w = self.element_width();
        if bytes.len() < w {
            return Err(FieldError::OutOfRange {
                value: bytes.len() as u64,
                order: w as u64,
            });
        }
        let v = if w == 8 {
            u64::from_le_bytes(bytes[..8].try_into().unwrap())
        } else {
            bytes[0] as u64
        };
        if !self.contains(v) {
            return Err(FieldError::OutOfRange {
                value: v,
                order: self.order(),
            });
        }
        Ok((v, w))
    }
}

fn fingerprint(spec: &FieldSpec) -> FieldId {
    let mut h = Sha256::new();
    match spec {
        FieldSpec::Prime { modulus } => {
            h.update(b"prime");
            h.update(modulus.to_le_bytes());
        }
        FieldSpec::Table { tables } => {
            h.update(b"table");
            for row in tables.add.iter().chain(&tables.mul) {
                h.update(row);
            }
        }
    }
    let digest = h.finalize();
    FieldId(u64::from_le_bytes(digest[..8].try_into().unwrap()))
}

fn check_axioms(q: usize, add: &[u8], mul: &[u8]) -> Result<(), String> {
    let at = |t: &[u8], a: usize, b: usize| t[a * q + b] as usize;
    if add.iter().chain(mul).any(|&v| v as usize >= q) {
        return Err("entry out of range".into());
    }
    for a in 0..q {
        if at(add, a, 0) != a || at(mul, a, 1) != a {
            return Err(format!("0 and 1 must be identities (failed at {a})"));
        }
        if !(0..q).any(|b| at(add, a, b) == 0) {
            return Err(format!("{a} has no additive inverse"));
        }
        if a != 0 && !(0..q).any(|b| at(mul, a, b) == 1) {
            return Err(format!("{a} has no multiplicative inverse"));
        }
        for b in 0..q {
            if at(add, a, b) != at(add, b, a) || at(mul, a, b) != at(mul, b, a) {
                return Err(format!("not commutative at ({a},{b})"));
            }
        }
    }
    for a in 0..q {
        for b in 0..q {
            let ab_add = at(add, a, b);
            let ab_mul = at(mul, a, b);
            for c in 0..q {
                if at(add, ab_add, c) != at(add, a, at(add, b, c)) {
                    return Err(format!("addition not associative at ({a},{b},{c})"));
                }
                if at(mul, ab_mul, c) != at(mul, a, at(mul, b, c)) {
                    return Err(format!("multiplication not associative at ({a},{b},{c})"));
                }
                if at(mul, a, at(add, b, c)) != at(add, ab_mul, at(mul, a, c)) {
                    return Err(format!("not distributive at ({a},{b},{c})"));
                }
            }
        }
    }
    Ok(())
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin, exact for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &w in &WITNESSES {
        if n.is_multiple_of(w) {
            return n == w;
        }
    }
    let mut d = n - 1;
    let mut r = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        r += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// `Some((p, k))` when `q = p^k` for a prime `p`.
pub fn prime_power(q: u64) -> Option<(u64, u32)> {
    if q < 2 {
        return None;
    }
    let p = (2..=q).find(|d| q.is_multiple_of(*d))?;
    let mut k = 0;
    let mut rest = q;
    while rest.is_multiple_of(p) {
        rest /= p;
        k += 1;
    }
    (rest == 1).then_some((p, k))
}

/// Polynomial product of `a` and `b` reduced modulo the monic `modulus`, with
/// coefficients in F_p (low degree first).
fn poly_mul_mod(a: &[usize], b: &[usize], modulus: &[usize], p: usize) -> Vec<usize> {
    let k = modulus.len() - 1;
    let mut prod = vec![0usize; a.len() + b.len()];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x * y) % p;
        }
    }
    for deg in (k..prod.len()).rev() {
        let lead = prod[deg];
        if lead == 0 {
            continue;
        }
        for (i, &m) in modulus.iter().enumerate() {
            let idx = deg - k + i;
            prod[idx] = (prod[idx] + p * p - lead * m) % p;
        }
    }
    prod.truncate(k);
    prod
}

/// First monic irreducible polynomial of degree `k` over F_p, by trial division.
fn first_irreducible(p: usize, k: usize) -> Vec<usize> {
    let count = p.pow(k as u32);
    for tail in 0..count {
        let mut poly: Vec<usize> = (0..k).map(|i| tail / p.pow(i as u32) % p).collect();
        poly.push(1);
        if k == 1 || is_irreducible(&poly, p) {
            return poly;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

fn is_irreducible(poly: &[usize], p: usize) -> bool {
    let k = poly.len() - 1;
    for deg in 1..=k / 2 {
        for tail in 0..p.pow(deg as u32) {
            let mut divisor: Vec<usize> = (0..deg).map(|i| tail / p.pow(i as u32) % p).collect();
            divisor.push(1);
            if poly_rem(poly, &divisor, p).iter().all(|&c| c == 0) {
                return false;
            }
        }
    }
    true
}

fn poly_rem(num: &[usize], monic: &[usize], p: usize) -> Vec<usize> {
    let mut rem = num.to_vec();
    let dk = monic.len() - 1;
    for deg in (dk..rem.len()).rev() {
        let lead = rem[deg];
        if lead == 0 {
            continue;
        }
        for (i, &m) in monic.iter().enumerate() {
            let idx = deg - dk + i;
            rem[idx] = (rem[idx] + p * p - lead * m) % p;
        }
    }
    rem.truncate(dk);
    rem
}
