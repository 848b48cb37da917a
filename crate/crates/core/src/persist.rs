//! Versioned binary state kept between the commitment and evaluation phases.
//!
//! Every file starts with a 4-byte magic and a `u16` format version; the body
//! uses the [`codec`](crate::codec) encodings.

use std::fmt;

use crate::codec::{DecodeError, Reader, Writer};
use crate::field::Field;
use crate::polymat::{Matrix, Polynomial};
use crate::protocol::{EvalResponse, ProtocolConfig, ProverKey, VerificationKey, VerifierKey};

pub const STATE_VERSION: u16 = 1;
const STATE_MAGIC: &[u8; 4] = b"ICST";
const VALUE_MAGIC: &[u8; 4] = b"ICVL";
const RESPONSE_MAGIC: &[u8; 4] = b"ICRS";

/// A protocol value with a field-dependent binary encoding.
pub trait Persist: Sized {
    fn put(&self, field: &Field, w: &mut Writer);
    fn get(field: &Field, r: &mut Reader) -> Result<Self, DecodeError>;
}

impl Persist for VerificationKey {
    fn put(&self, field: &Field, w: &mut Writer) {
        w.matrix(field, &self.gamma).matrix(field, &self.omega);
    }

    fn get(field: &Field, r: &mut Reader) -> Result<Self, DecodeError> {
        Ok(VerificationKey {
            gamma: r.matrix(field)?,
            omega: r.matrix(field)?,
        })
    }
}

impl Persist for VerifierKey {
    fn put(&self, field: &Field, w: &mut Writer) {
        w.elements(field, &self.lambdas).elements(field, &self.thetas);
    }

    fn get(field: &Field, r: &mut Reader) -> Result<Self, DecodeError> {
        Ok(VerifierKey {
            lambdas: r.elements(field)?,
            thetas: r.elements(field)?,
        })
    }
}

impl Persist for ProverKey {
    fn put(&self, field: &Field, w: &mut Writer) {
        w.matrix(field, &self.b);
    }

    fn get(field: &Field, r: &mut Reader) -> Result<Self, DecodeError> {
        Ok(ProverKey { b: r.matrix(field)? })
    }
}

impl Persist for EvalResponse {
    fn put(&self, field: &Field, w: &mut Writer) {
        w.elements(field, &self.v).elements(field, &self.u);
    }

    fn get(field: &Field, r: &mut Reader) -> Result<Self, DecodeError> {
        Ok(EvalResponse {
            v: r.elements(field)?,
            u: r.elements(field)?,
        })
    }
}

impl Persist for Polynomial {
    fn put(&self, field: &Field, w: &mut Writer) {
        w.elements(field, &self.coeffs);
    }

    fn get(field: &Field, r: &mut Reader) -> Result<Self, DecodeError> {
        Ok(Polynomial::new(r.elements(field)?))
    }
}

fn header(w: &mut Writer, magic: &[u8; 4]) {
    w.raw(magic).u16(STATE_VERSION);
}

fn check_header(r: &mut Reader, magic: &[u8; 4]) -> Result<(), DecodeError> {
    if r.take(4)? != magic {
        return Err(DecodeError::Magic);
    }
    match r.u16()? {
        STATE_VERSION => Ok(()),
        found => Err(DecodeError::Version {
            expected: STATE_VERSION,
            found,
        }),
    }
}

/// Standalone versioned encoding of one value.
pub fn encode_value<T: Persist>(field: &Field, value: &T) -> Vec<u8> {
    let mut w = Writer::new();
    header(&mut w, VALUE_MAGIC);
    value.put(field, &mut w);
    w.into_bytes()
}

pub fn decode_value<T: Persist>(field: &Field, bytes: &[u8]) -> Result<T, DecodeError> {
    let mut r = Reader::new(bytes);
    check_header(&mut r, VALUE_MAGIC)?;
    let v = T::get(field, &mut r)?;
    r.finish()?;
    Ok(v)
}

fn put_config(w: &mut Writer, c: &ProtocolConfig) {
    w.field_spec(c.field().spec())
        .u64(c.d() as u64)
        .u64(c.r() as u64)
        .u64(c.c() as u64)
        .u64(c.xi());
}

fn get_config(r: &mut Reader) -> Result<ProtocolConfig, DecodeError> {
    let invalid = |e: &dyn fmt::Display| DecodeError::Invalid(e.to_string());
    let field = Field::from_spec(&r.field_spec()?).map_err(|e| invalid(&e))?;
    let d = r.u64()? as usize;
    let rr = r.u64()? as usize;
    let c = r.u64()? as usize;
    let xi = r.u64()?;
    ProtocolConfig::new(field, d, rr, c, xi).map_err(|e| invalid(&e))
}

#[derive(Clone, PartialEq, Eq)]
pub enum PersistedState {
    Prover {
        config: ProtocolConfig,
        key: ProverKey,
        poly: Polynomial,
        /// Evaluation rounds answered so far.
        rounds: u64,
    },
    Verifier {
        config: ProtocolConfig,
        key: VerifierKey,
        vk: VerificationKey,
        /// Evaluation rounds checked so far.
        rounds: u64,
    },
}

impl fmt::Debug for PersistedState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (role, config, rounds) = match self {
            PersistedState::Prover { config, rounds, .. } => ("Prover", config, rounds),
            PersistedState::Verifier { config, rounds, .. } => ("Verifier", config, rounds),
        };
        f.debug_struct(role)
            .field("q", &config.field().order())
            .field("d", &config.d())
            .field("c", &config.c())
            .field("xi", &config.xi())
            .field("rounds", rounds)
            .finish_non_exhaustive()
    }
}

impl PersistedState {
    pub fn config(&self) -> &ProtocolConfig {
        match self {
            PersistedState::Prover { config, .. } | PersistedState::Verifier { config, .. } => config,
        }
    }

    pub fn rounds(&self) -> u64 {
        match self {
            PersistedState::Prover { rounds, .. } | PersistedState::Verifier { rounds, .. } => *rounds,
        }
    }

    pub fn bump_rounds(&mut self) {
        match self {
            PersistedState::Prover { rounds, .. } | PersistedState::Verifier { rounds, .. } => *rounds += 1,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        header(&mut w, STATE_MAGIC);
        match self {
            PersistedState::Prover {
                config,
                key,
                poly,
                rounds,
            } => {
                w.u8(1);
                put_config(&mut w, config);
                key.put(config.field(), &mut w);
                poly.put(config.field(), &mut w);
                w.u64(*rounds);
            }
            PersistedState::Verifier {
                config,
                key,
                vk,
                rounds,
            } => {
                w.u8(2);
                put_config(&mut w, config);
                key.put(config.field(), &mut w);
                vk.put(config.field(), &mut w);
                w.u64(*rounds);
            }
        }
        w.into_bytes()
    }

    /// Decodes and checks shapes against the embedded configuration.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        check_header(&mut r, STATE_MAGIC)?;
        let role = r.u8()?;
        let config = get_config(&mut r)?;
        let f = config.field().clone();
        let (s, c) = (config.s(), config.c());
        let shape = |m: &Matrix, rows: usize, cols: usize, what: &str| {
            if (m.rows(), m.cols()) == (rows, cols) {
                Ok(())
            } else {
                Err(DecodeError::Invalid(format!("{what} is {}x{}, expected {rows}x{cols}", m.rows(), m.cols())))
            }
        };
        let state = match role {
            1 => {
                let key = ProverKey::get(&f, &mut r)?;
                shape(&key.b, s, s, "B")?;
                let poly = Polynomial::get(&f, &mut r)?;
                if poly.degree_bound() != config.d() {
                    return Err(DecodeError::Invalid(format!("{} coefficients for d = {}", poly.degree_bound(), config.d())));
                }
                PersistedState::Prover {
                    key,
                    poly,
                    rounds: r.u64()?,
                    config,
                }
            }
            2 => {
                let key = VerifierKey::get(&f, &mut r)?;
                key.validate(&config).map_err(|e| DecodeError::Invalid(e.to_string()))?;
                let vk = VerificationKey::get(&f, &mut r)?;
                shape(&vk.gamma, c, s, "Gamma")?;
                shape(&vk.omega, s, c, "Omega")?;
                PersistedState::Verifier {
                    key,
                    vk,
                    rounds: r.u64()?,
                    config,
                }
            }
            t => return Err(DecodeError::BadTag(t)),
        };
        r.finish()?;
        Ok(state)
    }
}

/// An evaluation response in transit between `eval` and `verify`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResponseFile {
    pub x: u64,
    pub response: EvalResponse,
}

impl ResponseFile {
    pub fn to_bytes(&self, field: &Field) -> Vec<u8> {
        let mut w = Writer::new();
        header(&mut w, RESPONSE_MAGIC);
        w.element(field, self.x);
        self.response.put(field, &mut w);
        w.into_bytes()
    }

    pub fn from_bytes(field: &Field, bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        check_header(&mut r, RESPONSE_MAGIC)?;
        let x = r.element(field)?;
        let response = EvalResponse::get(field, &mut r)?;
        r.finish()?;
        Ok(ResponseFile { x, response })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{commit_direct, eval, keygen_prover, keygen_verifier};
    use crate::rng::SeedTree;
    use proptest::prelude::*;

    fn states(seed: u64) -> (PersistedState, PersistedState) {
        let config = ProtocolConfig::new(Field::prime(11).unwrap(), 9, 2, 3, 6).unwrap();
        let t = SeedTree::new(seed);
        let poly = Polynomial::random(config.field(), 9, &mut t.stream("p", 0));
        let pkey = keygen_prover(&config, &mut t.stream("b", 0));
        let vkey = keygen_verifier(&config, &mut t.stream("k", 0));
        let vk = commit_direct(&config, &poly.to_matrix(3).unwrap(), &vkey, &pkey).unwrap();
        (
            PersistedState::Prover {
                config: config.clone(),
                key: pkey,
                poly,
                rounds: 3,
            },
            PersistedState::Verifier {
                config,
                key: vkey,
                vk,
                rounds: 7,
            },
        )
    }

    #[test]
    fn states_round_trip_bit_exactly() {
        let (p, v) = states(1);
        for s in [p, v] {
            let bytes = s.to_bytes();
            let back = PersistedState::from_bytes(&bytes).unwrap();
            assert_eq!(back, s);
            assert_eq!(back.to_bytes(), bytes);
        }
    }

    #[test]
    fn verification_key_round_trips() {
        let (_, v) = states(2);
        let PersistedState::Verifier { config, vk, .. } = v else { unreachable!() };
        let f = config.field();
        let bytes = encode_value(f, &vk);
        assert_eq!(&bytes[..4], b"ICVL");
        assert_eq!(decode_value::<VerificationKey>(f, &bytes).unwrap(), vk);
    }

    #[test]
    fn table_field_state_round_trips() {
        let config = ProtocolConfig::new(Field::gf4(), 4, 2, 1, 0).unwrap();
        let t = SeedTree::new(3);
        let state = PersistedState::Prover {
            key: keygen_prover(&config, &mut t.stream("b", 0)),
            poly: Polynomial::random(config.field(), 4, &mut t.stream("p", 0)),
            config,
            rounds: 0,
        };
        assert_eq!(PersistedState::from_bytes(&state.to_bytes()).unwrap(), state);
    }

    #[test]
    fn corrupt_inputs_are_typed_errors() {
        let (p, v) = states(4);
        let bytes = v.to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert_eq!(PersistedState::from_bytes(&bad), Err(DecodeError::Magic));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert_eq!(
            PersistedState::from_bytes(&bad),
            Err(DecodeError::Version { expected: 1, found: 9 })
        );
        for cut in [0, 5, 7, 30, bytes.len() - 1] {
            assert!(PersistedState::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut long = p.to_bytes();
        long.push(0);
        assert_eq!(PersistedState::from_bytes(&long), Err(DecodeError::Trailing(1)));
        let mut bad = bytes;
        bad[6] = 3;
        assert_eq!(PersistedState::from_bytes(&bad), Err(DecodeError::BadTag(3)));
    }

    #[test]
    fn debug_output_is_redacted() {
        let (p, v) = states(5);
        for s in [p, v] {
            let text = format!("{s:?}");
            assert!(!text.contains("key") && !text.contains("poly") && !text.contains("vk"), "{text}");
        }
    }

    #[test]
    fn response_file_round_trips() {
        let (p, _) = states(6);
        let PersistedState::Prover { config, key, poly, .. } = p else { unreachable!() };
        let resp = eval(&config, 4, &poly.to_matrix(3).unwrap(), &key.b).unwrap();
        let file = ResponseFile { x: 4, response: resp };
        let bytes = file.to_bytes(config.field());
        assert_eq!(ResponseFile::from_bytes(config.field(), &bytes).unwrap(), file);
        assert!(ResponseFile::from_bytes(config.field(), &bytes[..10]).is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
            let _ = PersistedState::from_bytes(&bytes);
        }

        #[test]
        fn flipped_bytes_never_panic(seed in 0u64..50, pos in 0usize..400, bit in 0u8..8) {
            let (_, v) = states(seed);
            let mut bytes = v.to_bytes();
            let i = pos % bytes.len();
            bytes[i] ^= 1 << bit;
            let _ = PersistedState::from_bytes(&bytes);
        }
    }
}
