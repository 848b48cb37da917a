//! Oblivious transfer.
//!
//! * [`ideal`]: the ideal 1-of-2 functionality, used for protocol-level testing.
//! * [`bounded`]: a desk-scale bounded-storage 1-of-2 protocol (random tape,
//!   interactive hashing, parity extractor).
//! * [`reduction`]: 1-of-c from `c - 1` invocations of any 1-of-2 backend.

pub mod bounded;
pub mod ideal;
pub mod reduction;

use rand::Rng;
use thiserror::Error;

use crate::field::{Field, FieldError};

pub use bounded::{BoundedStorageOt, BsOtParams, BsSenderView};
pub use ideal::{ideal_ot2, IdealOt2};
pub use reduction::{build_reduction_table, decode_c_of_1, row_picks, ReductionTable, Row};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OtError {
    #[error("message lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("1-of-c transfer needs c >= 2, got {0}")]
    TooFewSecrets(usize),
    #[error("index {index} out of range for c = {c}")]
    IndexOutOfRange { index: usize, c: usize },
    #[error("expected {expected} received messages, got {got}")]
    WrongPickCount { expected: usize, got: usize },
    #[error("message is not a whole number of field elements: {0}")]
    Malformed(String),
    #[error("invalid bounded-storage parameters: {0}")]
    Params(String),
    #[error("intersection of stored sets too small for interactive hashing")]
    InsufficientIntersection,
    #[error("storage bound exceeded: {used} > {bound} bits")]
    StorageExceeded { used: u64, bound: u64 },
    #[error("interactive hashing out of sequence: {0}")]
    Sequence(String),
    #[error("gave up after {0} phase-one attempts")]
    RetriesExhausted(u32),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// An opaque OT payload. Payloads that carry field vectors are combined
/// component-wise with field addition.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct OtMessage(pub Vec<u8>);

impl OtMessage {
    pub fn from_elements(field: &Field, values: &[u64]) -> Self {
        let mut out = Vec::with_capacity(values.len() * field.element_width());
        for &v in values {
            field.write_element(v, &mut out);
        }
        OtMessage(out)
    }

    pub fn to_elements(&self, field: &Field) -> Result<Vec<u64>, OtError> {
        let w = field.element_width();
        if !self.0.len().is_multiple_of(w) {
            return Err(OtError::Malformed(format!(
                "{} bytes with element width {w}",
                self.0.len()
            )));
        }
        self.0
            .chunks(w)
            .map(|c| Ok(field.read_element(c)?.0))
            .collect()
    }

    pub fn random<R: Rng + ?Sized>(field: &Field, elements: usize, rng: &mut R) -> Self {
        let values: Vec<u64> = (0..elements).map(|_| field.random(rng)).collect();
        Self::from_elements(field, &values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn add(&self, field: &Field, other: &OtMessage) -> Result<OtMessage, OtError> {
        self.combine(field, other, |a, b| field.add(a, b))
    }

    pub fn sub(&self, field: &Field, other: &OtMessage) -> Result<OtMessage, OtError> {
        self.combine(field, other, |a, b| field.sub(a, b))
    }

    fn combine(
        &self,
        field: &Field,
        other: &OtMessage,
        op: impl Fn(u64, u64) -> u64,
    ) -> Result<OtMessage, OtError> {
        if self.len() != other.len() {
            return Err(OtError::LengthMismatch(self.len(), other.len()));
        }
        let a = self.to_elements(field)?;
        let b = other.to_elements(field)?;
        let sum: Vec<u64> = a.iter().zip(&b).map(|(&x, &y)| op(x, y)).collect();
        Ok(Self::from_elements(field, &sum))
    }
}

/// What the OT sender observed during one 1-of-2 invocation.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum SenderEvent {
    Ideal { len: usize },
    BoundedStorage(BsSenderView),
}

/// A 1-of-2 OT realization. Implementations simulate both parties in-process
/// and keep the sender's view for inspection.
pub trait Ot2Backend {
    /// Transfers `m0` or `m1` according to `choice` (false selects `m0`) and
    /// returns what the receiver obtains.
    fn transfer(&mut self, m0: &OtMessage, m1: &OtMessage, choice: bool)
        -> Result<OtMessage, OtError>;

    fn sender_view(&self) -> &[SenderEvent];
}

/// Runs the 1-of-c reduction: builds the masked table, performs one 1-of-2 per
/// column with the receiver's fixed row picks, and decodes `secrets[index]`.
pub fn ot_c_of_1<B: Ot2Backend + ?Sized, R: Rng + ?Sized>(
    field: &Field,
    secrets: &[OtMessage],
    index: usize,
    backend: &mut B,
    rng: &mut R,
) -> Result<OtMessage, OtError> {
    let c = secrets.len();
    let picks = row_picks(index, c)?;
    let table = build_reduction_table(field, secrets, rng)?;
    let received = table
        .columns()
        .iter()
        .zip(&picks)
        .map(|((first, second), pick)| backend.transfer(first, second, *pick == Row::Second))
        .collect::<Result<Vec<_>, _>>()?;
    decode_c_of_1(field, &received, index, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn message_group_ops() {
        let f = Field::prime(11).unwrap();
        let a = OtMessage::from_elements(&f, &[3, 7]);
        let b = OtMessage::from_elements(&f, &[9, 5]);
        assert_eq!(a.add(&f, &b).unwrap().to_elements(&f).unwrap(), vec![1, 1]);
        assert_eq!(a.sub(&f, &b).unwrap().to_elements(&f).unwrap(), vec![5, 2]);
        assert!(a.add(&f, &OtMessage::from_elements(&f, &[1])).is_err());
        assert!(OtMessage(vec![1, 2, 3]).to_elements(&f).is_err());
    }

    #[test]
    fn c_of_1_all_indices_ideal() {
        let f = Field::prime(11).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        for c in 2..=32 {
            for _ in 0..4 {
                let secrets: Vec<OtMessage> =
                    (0..c).map(|_| OtMessage::random(&f, 3, &mut rng)).collect();
                for i in 0..c {
                    let mut backend = IdealOt2::default();
                    let got = ot_c_of_1(&f, &secrets, i, &mut backend, &mut rng).unwrap();
                    assert_eq!(got, secrets[i], "c={c} i={i}");
                    assert_eq!(backend.sender_view().len(), c - 1);
                }
            }
        }
    }

    #[test]
    fn c_of_1_two_secrets_is_single_transfer() {
        let f = Field::prime(11).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let secrets = [OtMessage::from_elements(&f, &[5]), OtMessage::from_elements(&f, &[9])];
        let mut backend = IdealOt2::default();
        assert_eq!(ot_c_of_1(&f, &secrets, 1, &mut backend, &mut rng).unwrap(), secrets[1]);
        assert_eq!(backend.sender_view().len(), 1);
    }

    #[test]
    fn c_of_1_sender_view_independent_of_index_ideal() {
        let f = Field::prime(13).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let secrets: Vec<OtMessage> = (0..6).map(|_| OtMessage::random(&f, 2, &mut rng)).collect();
        let views: Vec<Vec<SenderEvent>> = (0..6)
            .map(|i| {
                let mut backend = IdealOt2::default();
                let mut table_rng = ChaCha20Rng::seed_from_u64(99);
                ot_c_of_1(&f, &secrets, i, &mut backend, &mut table_rng).unwrap();
                backend.sender_view().to_vec()
            })
            .collect();
        assert!(views.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn c_of_1_bounded_storage_backend() {
        let f = Field::prime(11).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let params = BsOtParams::new(1 << 12, 2.0, 64, 6).unwrap();
        let secrets: Vec<OtMessage> = (0..4).map(|_| OtMessage::random(&f, 3, &mut rng)).collect();
        for i in 0..4 {
            let mut backend = BoundedStorageOt::new(params.clone(), i as u64);
            let got = ot_c_of_1(&f, &secrets, i, &mut backend, &mut rng).unwrap();
            assert_eq!(got, secrets[i]);
        }
    }
}
