//! One-sided secure two-party computation through a single 1-of-|X| transfer.
//!
//! The sender tabulates `f(zeta_j, y)` for every `zeta_j` in the public domain
//! (in canonical field order) and the receiver fetches row `j` for its private
//! `x = zeta_j`.

use rand::Rng;
use thiserror::Error;

use crate::field::Field;
use crate::ot::{ot_c_of_1, Ot2Backend, OtError, OtMessage};
use crate::polymat::{power_values, Direction, Matrix, PolyMatError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum S2pcError {
    #[error("{0} is not in the input domain")]
    NotInDomain(u64),
    #[error("domain needs at least two distinct elements, got {0}")]
    DomainTooSmall(usize),
    #[error("domain element {0} is not in the field")]
    OutOfField(u64),
    #[error("evaluator produced {got} elements, expected {expected}")]
    OutputLength { expected: usize, got: usize },
    #[error(transparent)]
    Ot(#[from] OtError),
    #[error(transparent)]
    PolyMat(#[from] PolyMatError),
}

/// A public function `f(x, y)` with field-vector output.
pub trait Evaluator {
    type Input: ?Sized;

    fn evaluate(&self, field: &Field, x: u64, y: &Self::Input) -> Result<Vec<u64>, S2pcError>;
}

/// The two commitment evaluators over an `s x s` matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Eta {
    /// `eta_1(a, M) = [1, a^s, ..., a^{s(s-1)}] M`
    High,
    /// `eta_2(a, M) = M [1, a, ..., a^{s-1}]^T`
    Low,
}

impl Eta {
    pub fn id(self) -> u8 {
        match self {
            Eta::High => 1,
            Eta::Low => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(Eta::High),
            2 => Some(Eta::Low),
            _ => None,
        }
    }
}

impl Evaluator for Eta {
    type Input = Matrix;

    fn evaluate(&self, field: &Field, x: u64, m: &Matrix) -> Result<Vec<u64>, S2pcError> {
        Ok(match self {
            Eta::High => m.vec_mul(field, &power_values(field, x, m.rows(), Direction::High))?,
            Eta::Low => m.mul_vec(field, &power_values(field, x, m.cols(), Direction::Low))?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct S2pcSpec<E> {
    field: Field,
    domain: Vec<u64>,
    evaluator: E,
}

impl<E: Evaluator> S2pcSpec<E> {
    /// Sorts and deduplicates `domain` into canonical order.
    pub fn new(field: &Field, mut domain: Vec<u64>, evaluator: E) -> Result<Self, S2pcError> {
        if let Some(&bad) = domain.iter().find(|&&v| !field.contains(v)) {
            return Err(S2pcError::OutOfField(bad));
        }
        domain.sort_unstable();
        domain.dedup();
        if domain.len() < 2 {
            return Err(S2pcError::DomainTooSmall(domain.len()));
        }
        Ok(S2pcSpec {
            field: field.clone(),
            domain,
            evaluator,
        })
    }

    pub fn domain(&self) -> &[u64] {
        &self.domain
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn evaluator(&self) -> &E {
        &self.evaluator
    }

    pub fn index_of(&self, x: u64) -> Result<usize, S2pcError> {
        self.domain.binary_search(&x).map_err(|_| S2pcError::NotInDomain(x))
    }

    /// Row `j` holds the serialized `f(zeta_j, y)`.
    pub fn build_value_table(&self, y: &E::Input) -> Result<Vec<OtMessage>, S2pcError> {
        let rows: Vec<Vec<u64>> = self
            .domain
            .iter()
            .map(|&z| self.evaluator.evaluate(&self.field, z, y))
            .collect::<Result<_, _>>()?;
        let width = rows[0].len();
        if let Some(r) = rows.iter().find(|r| r.len() != width) {
            return Err(S2pcError::OutputLength {
                expected: width,
                got: r.len(),
            });
        }
        Ok(rows
            .iter()
            .map(|r| OtMessage::from_elements(&self.field, r))
            .collect())
    }

    /// Runs one session; the receiver learns `f(x, y)`.
    pub fn run<B: Ot2Backend + ?Sized, R: Rng + ?Sized>(
        &self,
        x: u64,
        y: &E::Input,
        backend: &mut B,
        rng: &mut R,
    ) -> Result<Vec<u64>, S2pcError> {
        let index = self.index_of(x)?;
        let table = self.build_value_table(y)?;
        let got = ot_c_of_1(&self.field, &table, index, backend, rng)?;
        Ok(got.to_elements(&self.field)?)
    }
}

/// Free-function form of [`S2pcSpec::run`].
pub fn s2pc_run<E: Evaluator, B: Ot2Backend + ?Sized, R: Rng + ?Sized>(
    x: u64,
    y: &E::Input,
    spec: &S2pcSpec<E>,
    backend: &mut B,
    rng: &mut R,
) -> Result<Vec<u64>, S2pcError> {
    spec.run(x, y, backend, rng)
}
