//! Exact and Monte-Carlo checks of the soundness and privacy claims.
//!
//! * [`soundness`]: exact acceptance probabilities and cheating adversaries.
//! * [`privacy`]: rank and enumeration entropy oracles, the unrestricted-key
//!   attack and the unmasked baseline.
//! * [`lemmas`]: rank checks of the two matrix lemmas.
//!
//! The `*_suite` functions bundle the standard desk-scale audits into report
//! rows.

pub mod lemmas;
pub mod privacy;
pub mod soundness;

use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng;

use crate::exec::Exec;
use crate::field::Field;
use crate::protocol::{keygen_verifier, ProtocolConfig, VerifierKey};
use crate::rng::SeedTree;

pub use lemmas::{lemma1_check, lemma3_check, random_full_rank, LemmaResult};
pub use privacy::{
    attack_demo_unrestricted, baseline_leakage, privacy_enumeration_oracle, privacy_floor,
    privacy_rank_oracle, worst_case_entropy, AttackReport, AuditError, BaselineReport, Observation,
    ObservationSystem, RowTag, Scheme,
};
pub use soundness::{
    monte_carlo_detection, soundness_ceiling, soundness_exact, soundness_exact_pair, Adversary,
    McReport, Side,
};

/// One machine-readable audit line.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditRow {
    pub check: String,
    /// `key=value` pairs separated by `;`.
    pub params: String,
    pub bound: String,
    pub measured: String,
    pub pass: bool,
}

impl AuditRow {
    pub const CSV_HEADER: &'static str = "check,params,bound,measured,verdict";

    fn new(check: &str, params: String, bound: impl ToString, measured: impl ToString, pass: bool) -> Self {
        AuditRow {
            check: check.to_string(),
            params,
            bound: bound.to_string(),
            measured: measured.to_string(),
            pass,
        }
    }

    pub fn to_csv(&self) -> String {
        let field = |v: &str| {
            if v.contains([',', '"', '\n']) {
                format!("\"{}\"", v.replace('"', "\"\""))
            } else {
                v.to_string()
            }
        };
        format!(
            "{},{},{},{},{}",
            field(&self.check),
            field(&self.params),
            field(&self.bound),
            field(&self.measured),
            if self.pass { "pass" } else { "fail" }
        )
    }
}

pub fn to_csv(rows: &[AuditRow]) -> String {
    let mut out = String::from(AuditRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

/// One line per check plus a pass count.
pub fn summary(rows: &[AuditRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let _ = writeln!(
            out,
            "[{}] {} ({}): measured {} vs bound {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.check,
            r.params,
            r.measured,
            r.bound
        );
    }
    let passed = rows.iter().filter(|r| r.pass).count();
    let _ = writeln!(out, "{passed}/{} checks passed", rows.len());
    out
}

/// Soundness audit at `q = 13, d = 25, r = 2, c = 3`: every shipped adversary
/// against the exact oracle (3 sigma), plus the root-crafting exact value.
pub fn soundness_suite(trials: usize, seeds: &SeedTree, exec: Exec) -> Result<Vec<AuditRow>, AuditError> {
    let cfg = ProtocolConfig::new(Field::prime(13)?, 25, 2, 3, 4)?;
    let params = |adv: &Adversary| format!("q=13;d=25;r=2;c=3;trials={trials};adversary={adv:?}");
    let ceiling = soundness_ceiling(cfg.s(), cfg.r(), cfg.c());
    let adversaries = [
        Adversary::RandomPerturbation {
            support: cfg.s(),
            both_sides: false,
        },
        Adversary::RootCrafting {
            roots: cfg.s() - 1,
            side: Side::V,
        },
        Adversary::RootCrafting {
            roots: cfg.s() - 1,
            side: Side::U,
        },
        Adversary::Replay,
    ];
    let mut rows = Vec::new();
    for (i, adv) in adversaries.iter().enumerate() {
        let r = monte_carlo_detection(adv, &cfg, trials, &seeds.child("adversary", i as u64), exec)?;
        rows.push(AuditRow::new(
            "soundness.rate_vs_exact",
            params(adv),
            format!("{:.6}+-{:.6}", r.expected, 3.0 * r.sigma),
            format!("{:.6}", r.rate),
            r.within(3.0) && r.rate <= 0.25,
        ));
        if let Adversary::RootCrafting { .. } = adv {
            rows.push(AuditRow::new(
                "soundness.root_crafting_exact",
                params(adv),
                &ceiling,
                &r.max_exact,
                r.max_exact == ceiling,
            ));
        }
    }
    Ok(rows)
}

fn random_queries<R: Rng + ?Sized>(rng: &mut R, xi: u64, m: usize) -> Vec<u64> {
    sample(rng, xi as usize + 1, m).into_iter().map(|q| q as u64).collect()
}

/// Privacy audit at `q = 11, s = 3`: random legal instances, exhaustive
/// worst-case sweeps, oracle agreement on GF(4), the attack and the baseline.
pub fn privacy_suite(instances: usize, seeds: &SeedTree, exec: Exec) -> Result<Vec<AuditRow>, AuditError> {
    let f = Field::prime(11)?;
    let s = 3;
    let mut rows = Vec::new();
    for c in 1..=2 {
        let cfg = ProtocolConfig::new(f.clone(), 9, 2, c, 6)?;
        for m in 1..=3 {
            let floor = privacy_floor(s, c, m);
            let stream = seeds.child("privacy", (c * 10 + m) as u64);
            let entropies = exec.map(instances, |i| {
                let mut rng = stream.stream("instance", i as u64);
                let key = keygen_verifier(&cfg, &mut rng);
                let qs = random_queries(&mut rng, cfg.xi(), m);
                privacy_rank_oracle(&f, s, &Observation::legal(&f, s, &key, &qs))
            });
            let min = entropies.iter().copied().min().unwrap_or(s * s);
            rows.push(AuditRow::new(
                "privacy.random_min_entropy",
                format!("q=11;s=3;c={c};m={m};instances={instances}"),
                floor,
                min,
                min >= floor,
            ));
            let worst = worst_case_entropy(&f, s, cfg.prohibited(), c, cfg.xi(), m);
            rows.push(AuditRow::new(
                "privacy.worst_case_entropy",
                format!("q=11;s=3;c={c};m={m};exhaustive"),
                floor,
                worst,
                worst >= floor,
            ));
        }
    }

    let gf4 = Field::gf4();
    let cfg4 = ProtocolConfig::new(gf4.clone(), 4, 2, 1, 1)?;
    let mut agree = true;
    let mut count = 0;
    for &l in cfg4.prohibited() {
        for &t in cfg4.prohibited() {
            for x in 0..=cfg4.xi() {
                let key = VerifierKey {
                    lambdas: vec![l],
                    thetas: vec![t],
                };
                let obs = Observation::legal(&gf4, 2, &key, &[x]);
                let rank = privacy_rank_oracle(&gf4, 2, &obs) as f64;
                let enumerated = privacy_enumeration_oracle(&gf4, 2, &obs)?;
                agree &= (rank - enumerated).abs() < 1e-9;
                count += 1;
            }
        }
    }
    rows.push(AuditRow::new(
        "privacy.rank_vs_enumeration",
        format!("q=4;d=4;c=1;m=1;instances={count}"),
        "equal",
        if agree { "equal" } else { "differ" },
        agree,
    ));

    let legal = VerifierKey {
        lambdas: vec![7],
        thetas: vec![8],
    };
    let attack = attack_demo_unrestricted(&f, s, &legal);
    rows.push(AuditRow::new(
        "privacy.attack_unrestricted",
        "q=11;s=3;lambda=e1;x=0".into(),
        format!("<={}", attack.attack_ceiling),
        attack.attacked,
        attack.attacked <= attack.attack_ceiling,
    ));
    rows.push(AuditRow::new(
        "privacy.attack_legal_keys",
        "q=11;s=3;lambda=7;x=0".into(),
        format!(">={}", attack.legal_floor),
        attack.legal,
        attack.legal >= attack.legal_floor,
    ));

    let base = baseline_leakage(&f, s, &legal, &[]);
    rows.push(AuditRow::new(
        "privacy.baseline_basic",
        "q=11;s=3;c=1;m=0".into(),
        s * s - s,
        base.basic[0],
        base.basic[0] == s * s - s && base.masked[0] > base.basic[0],
    ));
    Ok(rows)
}

/// Lemma audit: `instances` random full-rank pairs with `s <= 6` over GF(11),
/// exhaustive GF(2) at `s = 2`, and the `s = 4, c = 3, d = 2` shape.
pub fn lemma_suite(instances: usize, seeds: &SeedTree, exec: Exec) -> Result<Vec<AuditRow>, AuditError> {
    let f = Field::prime(11)?;
    let results = exec.map(instances, |i| -> Result<(bool, bool), AuditError> {
        let mut rng = seeds.stream("lemma", i as u64);
        let s = rng.gen_range(1..=6);
        let c = rng.gen_range(1..=s);
        let d = rng.gen_range(1..=s);
        let fm = random_full_rank(&f, c, s, &mut rng);
        let l1 = lemma1_check(&f, &fm, &random_full_rank(&f, s, d, &mut rng))?.pass;
        let l3 = lemma3_check(&f, &fm, &random_full_rank(&f, d, s, &mut rng))?.pass;
        Ok((l1, l3))
    });
    let mut l1_pass = 0;
    let mut l3_pass = 0;
    for r in results {
        let (a, b) = r?;
        l1_pass += a as usize;
        l3_pass += b as usize;
    }
    let mut rows = vec![
        AuditRow::new(
            "lemma1.random",
            format!("q=11;s<=6;instances={instances}"),
            instances,
            l1_pass,
            l1_pass == instances,
        ),
        AuditRow::new(
            "lemma3.random",
            format!("q=11;s<=6;instances={instances}"),
            instances,
            l3_pass,
            l3_pass == instances,
        ),
    ];

    let gf2 = Field::from_order(2)?;
    let (mut total, mut passed) = (0, 0);
    for fm in full_rank_matrices(&gf2, 1, 2) {
        for g in full_rank_matrices(&gf2, 2, 1) {
            total += 1;
            passed += lemma1_check(&gf2, &fm, &g)?.pass as usize;
        }
        for g in full_rank_matrices(&gf2, 1, 2) {
            total += 1;
            passed += lemma3_check(&gf2, &fm, &g)?.pass as usize;
        }
    }
    rows.push(AuditRow::new(
        "lemmas.exhaustive_gf2",
        "q=2;s=2;c=d=1".into(),
        total,
        passed,
        passed == total,
    ));

    let mut rng = seeds.stream("lemma3-shape", 0);
    let shape = lemma3_check(
        &f,
        &random_full_rank(&f, 3, 4, &mut rng),
        &random_full_rank(&f, 2, 4, &mut rng),
    )?;
    rows.push(AuditRow::new(
        "lemma3.illustrated_shape",
        "q=11;s=4;c=3;d=2".into(),
        format!(">={}", shape.bound),
        shape.value,
        shape.pass,
    ));
    Ok(rows)
}

/// Every full-rank `rows x cols` matrix over a small field.
pub fn full_rank_matrices(field: &Field, rows: usize, cols: usize) -> Vec<crate::polymat::Matrix> {
    let q = field.order();
    let n = rows * cols;
    (0..q.pow(n as u32))
        .map(|mut v| {
            let data = (0..n)
                .map(|_| {
                    let d = v % q;
                    v /= q;
                    d
                })
                .collect();
            crate::polymat::Matrix::from_vec(rows, cols, data).expect("sized")
        })
        .filter(|m| m.rank(field) == rows.min(cols))
        .collect()
}

impl From<crate::field::FieldError> for AuditError {
    fn from(e: crate::field::FieldError) -> Self {
        AuditError::Protocol(e.into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_quoting() {
        let row = AuditRow::new("a", "x=1,y=2".into(), 3, 4, true);
        assert_eq!(row.to_csv(), "a,\"x=1,y=2\",3,4,pass");
        let text = to_csv(&[row]);
        assert!(text.starts_with(AuditRow::CSV_HEADER));
    }

    #[test]
    fn small_suites_pass() {
        let seeds = SeedTree::new(7);
        for rows in [
            privacy_suite(20, &seeds, Exec::Parallel).unwrap(),
            lemma_suite(30, &seeds, Exec::Parallel).unwrap(),
            soundness_suite(1000, &seeds, Exec::Parallel).unwrap(),
        ] {
            assert!(rows.iter().all(|r| r.pass), "{}", summary(&rows));
        }
    }

    #[test]
    fn full_rank_enumeration_counts() {
        let gf2 = Field::from_order(2).unwrap();
        assert_eq!(full_rank_matrices(&gf2, 1, 2).len(), 3);
        assert_eq!(full_rank_matrices(&gf2, 2, 2).len(), 6);
    }
}
