//! Exact conditional entropy of `A` under linear observations of `(A, B)`.
//!
//! For uniform `(A, B)` and an observation map `M` over `vec(A) || vec(B)`,
//! `H_q(A | M z) = d + rank(M_B) - rank(M)`, where `M_B` is the B-block of `M`.
//! The enumeration oracle computes the same quantity from the definition.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::field::Field;
use crate::polymat::{power_values, Direction, Matrix};
use crate::protocol::VerifierKey;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error("instance too large to enumerate: q^(2d) = {q}^{exponent} exceeds 2^20")]
    TooLarge { q: u64, exponent: usize },
    #[error("input is not full rank ({rows}x{cols}, rank {rank})")]
    RankDeficient { rows: usize, cols: usize, rank: usize },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("zero perturbation is not an attack")]
    ZeroPerturbation,
    #[error("adversary returned the honest response")]
    HonestResponse,
    #[error(transparent)]
    Protocol(#[from] crate::protocol::ProtocolError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowTag {
    Gamma,
    Omega,
    V,
    U,
    Custom,
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            RowTag::Gamma => "gamma",
            RowTag::Omega => "omega",
            RowTag::V => "v",
            RowTag::U => "u",
            RowTag::Custom => "custom",
        };
        f.write_str(name)
    }
}

/// Rows are linear functionals of the `2d`-vector `vec(A) || vec(B)`, with
/// `vec` row-major (`(i, j) -> s*i + j`).
#[derive(Clone, Debug)]
pub struct ObservationSystem {
    field: Field,
    s: usize,
    rows: Vec<Vec<u64>>,
    tags: Vec<RowTag>,
}

impl ObservationSystem {
    pub fn new(field: &Field, s: usize) -> Self {
        ObservationSystem {
            field: field.clone(),
            s,
            rows: Vec::new(),
            tags: Vec::new(),
        }
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn d(&self) -> usize {
        self.s * self.s
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn tags(&self) -> &[RowTag] {
        &self.tags
    }

    pub fn push(&mut self, tag: RowTag, row: Vec<u64>) -> Result<(), AuditError> {
        if row.len() != 2 * self.d() {
            return Err(AuditError::Shape(format!("row of length {}, expected {}", row.len(), 2 * self.d())));
        }
        self.rows.push(row);
        self.tags.push(tag);
        Ok(())
    }

    /// `s` rows observing `w (a A + b B)`, one per column.
    pub fn push_left(&mut self, tag: RowTag, w: &[u64], on_a: bool, on_b: bool) {
        let (s, d) = (self.s, self.d());
        for k in 0..s {
            let mut row = vec![0; 2 * d];
            for (j, &wj) in w.iter().enumerate() {
                if on_a {
                    row[j * s + k] = wj;
                }
                if on_b {
                    row[d + j * s + k] = wj;
                }
            }
            self.rows.push(row);
            self.tags.push(tag);
        }
    }

    /// `s` rows observing `(a A + b B) w^T`, one per row of the matrix.
    pub fn push_right(&mut self, tag: RowTag, w: &[u64], on_a: bool, on_b: bool) {
        let (s, d) = (self.s, self.d());
        for k in 0..s {
            let mut row = vec![0; 2 * d];
            for (j, &wj) in w.iter().enumerate() {
                if on_a {
                    row[k * s + j] = wj;
                }
                if on_b {
                    row[d + k * s + j] = wj;
                }
            }
            self.rows.push(row);
            self.tags.push(tag);
        }
    }

    pub fn matrix(&self) -> Matrix {
        let mut m = Matrix::zeros(0, 2 * self.d());
        for r in &self.rows {
            m.push_row(r).expect("row length checked");
        }
        m
    }

    fn b_block(&self) -> Matrix {
        let d = self.d();
        let mut m = Matrix::zeros(0, d);
        for r in &self.rows {
            m.push_row(&r[d..]).expect("row length checked");
        }
        m
    }

    /// `d + rank(M_B) - rank(M)`, in `log_q` units.
    pub fn rank_entropy(&self) -> usize {
        if self.rows.is_empty() {
            return self.d();
        }
        self.d() + self.b_block().rank(&self.field) - self.matrix().rank(&self.field)
    }

    /// `H_q(A | M z)` by enumerating every `(A, B)`.
    pub fn enumeration_entropy(&self) -> Result<f64, AuditError> {
        let q = self.field.order();
        let n = 2 * self.d();
        let total = (q as u128).checked_pow(n as u32).filter(|&t| t <= 1 << 20);
        let Some(total) = total else {
            return Err(AuditError::TooLarge { q, exponent: n });
        };
        let d = self.d();
        let mut classes: HashMap<Vec<u64>, HashMap<Vec<u64>, u64>> = HashMap::new();
        let mut z = vec![0u64; n];
        for _ in 0..total {
            let obs: Vec<u64> = self.rows.iter().map(|r| crate::polymat::dot(&self.field, r, &z)).collect();
            *classes.entry(obs).or_default().entry(z[..d].to_vec()).or_default() += 1;
            // odometer increment
            for digit in z.iter_mut() {
                *digit += 1;
                if *digit < q {
                    break;
                }
                *digit = 0;
            }
        }
        let total = total as f64;
        let ln_q = (q as f64).ln();
        let mut h = 0.0;
        for dist in classes.values() {
            let class_total: u64 = dist.values().sum();
            let p_obs = class_total as f64 / total;
            let h_class: f64 = dist
                .values()
                .map(|&n| {
                    let p = n as f64 / class_total as f64;
                    -p * p.ln() / ln_q
                })
                .sum();
            h += p_obs * h_class;
        }
        Ok(h)
    }
}

/// Which commitment the verifier receives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// `Gamma = Lambda (A + B)`, `Omega = B Theta^T`, responses `(v, u)`.
    Masked,
    /// `Gamma = Lambda A` with no mask; responses `A low(x)^T`.
    Basic,
}

/// Verifier-side generators: key rows (possibly illegal) and query points.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Observation {
    pub gamma_rows: Vec<Vec<u64>>,
    pub omega_rows: Vec<Vec<u64>>,
    pub queries: Vec<u64>,
}

impl Observation {
    /// Power-row keys as the protocol builds them.
    pub fn legal(field: &Field, s: usize, key: &VerifierKey, queries: &[u64]) -> Self {
        Observation {
            gamma_rows: key
                .lambdas
                .iter()
                .map(|&l| power_values(field, l, s, Direction::High))
                .collect(),
            omega_rows: key
                .thetas
                .iter()
                .map(|&t| power_values(field, t, s, Direction::Low))
                .collect(),
            queries: queries.to_vec(),
        }
    }

    pub fn system(&self, field: &Field, s: usize, scheme: Scheme) -> ObservationSystem {
        let mut sys = ObservationSystem::new(field, s);
        let masked = scheme == Scheme::Masked;
        for w in &self.gamma_rows {
            sys.push_left(RowTag::Gamma, w, true, masked);
        }
        if masked {
            for w in &self.omega_rows {
                sys.push_right(RowTag::Omega, w, false, true);
            }
        }
        for &x in &self.queries {
            let low = power_values(field, x, s, Direction::Low);
            sys.push_right(RowTag::V, &low, true, masked);
            if masked {
                let high = power_values(field, x, s, Direction::High);
                sys.push_left(RowTag::U, &high, false, true);
            }
        }
        sys
    }
}

/// `H_q(A | Gamma, Omega, V, U)` for the masked scheme, via the rank identity.
pub fn privacy_rank_oracle(field: &Field, s: usize, obs: &Observation) -> usize {
    obs.system(field, s, Scheme::Masked).rank_entropy()
}

/// Definitional counterpart of [`privacy_rank_oracle`]; only for `q^(2d) <= 2^20`.
pub fn privacy_enumeration_oracle(field: &Field, s: usize, obs: &Observation) -> Result<f64, AuditError> {
    obs.system(field, s, Scheme::Masked).enumeration_entropy()
}

/// The entropy floor `d - (m + c)^2`, clamped at zero.
pub fn privacy_floor(s: usize, c: usize, m: usize) -> usize {
    (s * s).saturating_sub((m + c) * (m + c))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttackReport {
    pub s: usize,
    /// Entropy with `Lambda = e_1` and one query at `x = 0`.
    pub attacked: usize,
    /// `d - s`, the leak the attack is claimed to achieve.
    pub attack_ceiling: usize,
    /// Entropy for the same query shape with legal keys.
    pub legal: usize,
    pub legal_floor: usize,
}

impl AttackReport {
    pub fn holds(&self) -> bool {
        self.attacked <= self.attack_ceiling && self.legal >= self.legal_floor
    }
}

/// The unrestricted-key attack: `Lambda = e_1` reads the first row of `A + B`,
/// and the response `u = high(0) B` at `x = 0` is the first row of `B`.
pub fn attack_demo_unrestricted(field: &Field, s: usize, legal_key: &VerifierKey) -> AttackReport {
    let mut e1 = vec![0; s];
    e1[0] = 1;
    let attacked_obs = Observation {
        gamma_rows: vec![e1],
        omega_rows: vec![power_values(field, legal_key.thetas[0], s, Direction::Low)],
        queries: vec![0],
    };
    let attacked = privacy_rank_oracle(field, s, &attacked_obs);
    let legal_obs = Observation::legal(field, s, legal_key, &[0]);
    let c = legal_key.lambdas.len();
    AttackReport {
        s,
        attacked,
        attack_ceiling: s * s - s,
        legal: privacy_rank_oracle(field, s, &legal_obs),
        legal_floor: privacy_floor(s, c, 1),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BaselineReport {
    pub s: usize,
    pub c: usize,
    /// Basic-scheme entropy after `0, 1, ..., m` queries.
    pub basic: Vec<usize>,
    /// Masked-scheme entropy after `0, 1, ..., m` queries.
    pub masked: Vec<usize>,
}

/// Entropy of the unmasked scheme (and the masked one for contrast) as queries
/// accumulate.
pub fn baseline_leakage(field: &Field, s: usize, key: &VerifierKey, queries: &[u64]) -> BaselineReport {
    let mut basic = Vec::with_capacity(queries.len() + 1);
    let mut masked = Vec::with_capacity(queries.len() + 1);
    for m in 0..=queries.len() {
        let obs = Observation::legal(field, s, key, &queries[..m]);
        basic.push(obs.system(field, s, Scheme::Basic).rank_entropy());
        masked.push(obs.system(field, s, Scheme::Masked).rank_entropy());
    }
    BaselineReport {
        s,
        c: key.lambdas.len(),
        basic,
        masked,
    }
}

/// Minimum rank-oracle entropy over every key choice from `set` (`c` lambdas,
/// `c` thetas) and every `m`-subset of `0..=xi`.
pub fn worst_case_entropy(field: &Field, s: usize, set: &[u64], c: usize, xi: u64, m: usize) -> usize {
    let key_sets = subsets(set, c);
    let points: Vec<u64> = (0..=xi).collect();
    let query_sets = subsets(&points, m);
    let mut best = usize::MAX;
    for lambdas in &key_sets {
        for thetas in &key_sets {
            let key = VerifierKey {
                lambdas: lambdas.clone(),
                thetas: thetas.clone(),
            };
            for qs in &query_sets {
                best = best.min(privacy_rank_oracle(field, s, &Observation::legal(field, s, &key, qs)));
            }
        }
    }
    best
}

fn subsets(items: &[u64], k: usize) -> Vec<Vec<u64>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if items.len() < k {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (i, &first) in items.iter().enumerate() {
        for mut rest in subsets(&items[i + 1..], k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}
