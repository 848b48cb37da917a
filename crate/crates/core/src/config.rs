//! JSON configuration files.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{Field, FieldError, FieldSpec};
use crate::ot::{BsOtParams, OtError};
use crate::polymat::Polynomial;
use crate::protocol::{keygen_prover, keygen_verifier, ProtocolConfig, ProtocolError, ProverKey, VerifierKey};
use crate::rng::SeedTree;
use crate::session::{ProverRole, SessionParams, VerifierRole};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported config version {0} (expected {CONFIG_VERSION})")]
    Version(u32),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Ot(#[from] OtError),
}

/// Bounded-storage OT settings; the remaining parameters are derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OtSettings {
    pub storage_bound: u64,
    pub alpha: f64,
    pub ell: u64,
    pub k: usize,
}

impl OtSettings {
    pub fn params(&self) -> Result<BsOtParams, OtError> {
        BsOtParams::new(self.storage_bound, self.alpha, self.ell, self.k)
    }
}

impl From<&BsOtParams> for OtSettings {
    fn from(p: &BsOtParams) -> Self {
        OtSettings {
            storage_bound: p.storage_bound,
            alpha: p.alpha,
            ell: p.ell,
            k: p.k,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub version: u32,
    pub field: FieldSpec,
    pub d: usize,
    pub r: usize,
    pub c: usize,
    pub xi: u64,
    pub seed: u64,
    /// Omitted means the desk defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ot: Option<OtSettings>,
}

impl ConfigFile {
    /// Builds and validates a config for a field of order `q`.
    pub fn generate(q: u64, d: usize, r: usize, c: usize, xi: u64, seed: u64) -> Result<Self, ConfigError> {
        let field = Field::from_order(q)?;
        let cfg = ConfigFile {
            version: CONFIG_VERSION,
            field: field.spec().clone(),
            d,
            r,
            c,
            xi,
            seed,
            ot: None,
        };
        cfg.protocol()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ConfigFile = serde_json::from_str(text)?;
        if cfg.version != CONFIG_VERSION {
            return Err(ConfigError::Version(cfg.version));
        }
        cfg.session_params()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn protocol(&self) -> Result<ProtocolConfig, ConfigError> {
        let field = Field::from_spec(&self.field)?;
        Ok(ProtocolConfig::new(field, self.d, self.r, self.c, self.xi)?)
    }

    pub fn ot_params(&self) -> Result<BsOtParams, ConfigError> {
        Ok(match &self.ot {
            Some(o) => o.params()?,
            None => BsOtParams::desk(),
        })
    }

    pub fn session_params(&self) -> Result<SessionParams, ConfigError> {
        Ok(SessionParams::new(self.protocol()?, self.ot_params()?))
    }

    /// Derives the polynomial, both keys and both role seed trees from `seed`.
    pub fn setup(&self) -> Result<Setup, ConfigError> {
        let params = self.session_params()?;
        let seeds = SeedTree::new(self.seed);
        let config = &params.config;
        let poly = Polynomial::random(config.field(), config.d(), &mut seeds.stream("polynomial", 0));
        let prover_key = keygen_prover(config, &mut seeds.stream("prover-key", 0));
        let verifier_key = keygen_verifier(config, &mut seeds.stream("verifier-key", 0));
        Ok(Setup {
            poly,
            prover_key,
            verifier_key,
            prover_seeds: seeds.child("prover", 0),
            verifier_seeds: seeds.child("verifier", 0),
            params,
        })
    }
}

/// Demo material derived from one configuration seed.
#[derive(Clone, Debug)]
pub struct Setup {
    pub params: SessionParams,
    pub poly: Polynomial,
    pub prover_key: ProverKey,
    pub verifier_key: VerifierKey,
    pub prover_seeds: SeedTree,
    pub verifier_seeds: SeedTree,
}

impl Setup {
    pub fn prover_role(&self) -> ProverRole {
        ProverRole {
            params: self.params.clone(),
            a: self.poly.to_matrix(self.params.config.s()).expect("d = s^2"),
            key: self.prover_key.clone(),
            seeds: self.prover_seeds,
        }
    }

    pub fn verifier_role(&self, queries: Vec<u64>, tamper: bool) -> VerifierRole {
        VerifierRole {
            params: self.params.clone(),
            key: self.verifier_key.clone(),
            seeds: self.verifier_seeds,
            queries,
            tamper,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generate_derives_the_set() {
        let cfg = ConfigFile::generate(11, 9, 2, 1, 6, 42).unwrap();
        assert_eq!(cfg.protocol().unwrap().prohibited(), &[7, 8, 9, 10]);
        let json = cfg.to_json();
        assert!(json.contains("\"kind\": \"prime\""));
        assert_eq!(ConfigFile::from_json(&json).unwrap(), cfg);
    }

    #[test]
    fn table_fields_round_trip() {
        let cfg = ConfigFile::generate(4, 4, 2, 1, 0, 1).unwrap();
        assert!(matches!(cfg.field, FieldSpec::Table { .. }));
        assert_eq!(ConfigFile::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn invalid_combinations_are_rejected() {
        let gen = |q, d, r, c, xi| ConfigFile::generate(q, d, r, c, xi, 0).map_err(|e| e.to_string());
        // gcd(2, 10) = 2
        assert!(matches!(
            ConfigFile::generate(11, 4, 2, 1, 0, 0),
            Err(ConfigError::Protocol(ProtocolError::Permutation(_)))
        ));
        assert!(matches!(
            ConfigFile::generate(11, 8, 2, 1, 0, 0),
            Err(ConfigError::Protocol(ProtocolError::NotSquare(8)))
        ));
        assert!(matches!(
            ConfigFile::generate(11, 1, 2, 1, 0, 0),
            Err(ConfigError::Protocol(ProtocolError::TooSmall { .. }))
        ));
        assert!(matches!(
            ConfigFile::generate(11, 9, 1, 1, 0, 0),
            Err(ConfigError::Protocol(ProtocolError::BadR(1)))
        ));
        assert!(matches!(
            ConfigFile::generate(11, 9, 2, 5, 6, 0),
            Err(ConfigError::Protocol(ProtocolError::BadC { c: 5, set: 4 }))
        ));
        assert!(matches!(
            ConfigFile::generate(11, 9, 2, 0, 6, 0),
            Err(ConfigError::Protocol(ProtocolError::BadC { c: 0, .. }))
        ));
        assert!(matches!(
            ConfigFile::generate(11, 9, 2, 1, 11, 0),
            Err(ConfigError::Protocol(ProtocolError::BadXi(11)))
        ));
        let too_small = gen(11, 9, 2, 1, 8).unwrap_err();
        assert!(too_small.contains("field too small"), "{too_small}");
        assert!(matches!(ConfigFile::generate(12, 9, 2, 1, 0, 0), Err(ConfigError::Field(_))));
    }

    #[test]
    fn setup_is_deterministic() {
        let cfg = ConfigFile::generate(11, 9, 2, 3, 6, 9).unwrap();
        let (a, b) = (cfg.setup().unwrap(), cfg.setup().unwrap());
        assert_eq!(a.poly, b.poly);
        assert_eq!(a.verifier_key, b.verifier_key);
        a.verifier_key.validate(&a.params.config).unwrap();
        assert_ne!(a.prover_seeds, a.verifier_seeds);
    }

    #[test]
    fn malformed_json_is_rejected() {
        let good = ConfigFile::generate(11, 9, 2, 1, 6, 42).unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&good.to_json()).unwrap();
        v["version"] = 2.into();
        assert!(matches!(ConfigFile::from_json(&v.to_string()), Err(ConfigError::Version(2))));
        v["version"] = 1.into();
        v["extra"] = 0.into();
        assert!(matches!(ConfigFile::from_json(&v.to_string()), Err(ConfigError::Json(_))));
        v.as_object_mut().unwrap().remove("extra");
        v["d"] = 4.into();
        assert!(matches!(ConfigFile::from_json(&v.to_string()), Err(ConfigError::Protocol(_))));
        v["d"] = 9.into();
        v["ot"] = serde_json::json!({"storage_bound": 4096, "alpha": 0.5, "ell": 64, "k": 6});
        assert!(matches!(ConfigFile::from_json(&v.to_string()), Err(ConfigError::Ot(_))));
        v["ot"]["alpha"] = 2.0.into();
        let cfg = ConfigFile::from_json(&v.to_string()).unwrap();
        assert_eq!(cfg.ot_params().unwrap().k, 6);
        assert!(ConfigFile::from_json("{").is_err());
    }
}
