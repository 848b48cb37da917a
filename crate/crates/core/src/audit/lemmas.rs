//! Rank checks for the two matrix-entropy lemmas.

use super::privacy::AuditError;
use crate::field::Field;
use crate::polymat::Matrix;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LemmaResult {
    pub pass: bool,
    /// Entropy (lemma 1) or rank (lemma 3).
    pub value: usize,
    pub bound: i64,
}

fn full_rank(field: &Field, m: &Matrix) -> Result<(), AuditError> {
    let rank = m.rank(field);
    if rank != m.rows().min(m.cols()) {
        return Err(AuditError::RankDeficient {
            rows: m.rows(),
            cols: m.cols(),
            rank,
        });
    }
    Ok(())
}

/// `H_q(FE | EG)` for uniform `s x s` `E`, with `F` (`c x s`) and `G` (`s x d`)
/// full rank; passes iff it is at least `cs - cd`.
pub fn lemma1_check(field: &Field, f: &Matrix, g: &Matrix) -> Result<LemmaResult, AuditError> {
    let s = f.cols();
    let (c, d) = (f.rows(), g.cols());
    if g.rows() != s || c > s || d > s {
        return Err(AuditError::Shape(format!("F is {c}x{s}, G is {}x{d}", g.rows())));
    }
    full_rank(field, f)?;
    full_rank(field, g)?;
    // rows over vec(E), row-major
    let mut fe = Matrix::zeros(0, s * s);
    for i in 0..c {
        for k in 0..s {
            let mut row = vec![0; s * s];
            for j in 0..s {
                row[j * s + k] = f.get(i, j);
            }
            fe.push_row(&row)?;
        }
    }
    let mut eg = Matrix::zeros(0, s * s);
    for j in 0..s {
        for l in 0..d {
            let mut row = vec![0; s * s];
            for k in 0..s {
                row[j * s + k] = g.get(k, l);
            }
            eg.push_row(&row)?;
        }
    }
    let joint = fe.vstack(&eg)?;
    let value = joint.rank(field) - eg.rank(field);
    let bound = (c * s) as i64 - (c * d) as i64;
    Ok(LemmaResult {
        pass: value as i64 >= bound,
        value,
        bound,
    })
}

/// `rank((I ⊗ F) || (G ⊗ I))` for full-rank `F` (`c x s`) and `G` (`d x s`);
/// passes iff it is at least `(c + d) s - cd`.
pub fn lemma3_check(field: &Field, f: &Matrix, g: &Matrix) -> Result<LemmaResult, AuditError> {
    let s = f.cols();
    let (c, d) = (f.rows(), g.rows());
    if g.cols() != s || c > s || d > s {
        return Err(AuditError::Shape(format!("F is {c}x{s}, G is {d}x{}", g.cols())));
    }
    full_rank(field, f)?;
    full_rank(field, g)?;
    let id = Matrix::identity(s);
    let h = id.kron(field, f).vstack(&g.kron(field, &id))?;
    let value = h.rank(field);
    let bound = ((c + d) * s) as i64 - (c * d) as i64;
    Ok(LemmaResult {
        pass: value as i64 >= bound,
        value,
        bound,
    })
}

impl From<crate::polymat::PolyMatError> for AuditError {
    fn from(e: crate::polymat::PolyMatError) -> Self {
        AuditError::Shape(e.to_string())
    }
}

/// A uniformly random full-rank `rows x cols` matrix, by rejection.
pub fn random_full_rank<R: rand::Rng + ?Sized>(field: &Field, rows: usize, cols: usize, rng: &mut R) -> Matrix {
    loop {
        let m = Matrix::random(field, rows, cols, rng);
        if m.rank(field) == rows.min(cols) {
            return m;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn gf11() -> Field {
        Field::prime(11).unwrap()
    }

    fn first_rows(c: usize, s: usize) -> Matrix {
        Matrix::from_rows(&(0..c).map(|i| (0..s).map(|j| (i == j) as u64).collect()).collect::<Vec<_>>())
            .unwrap()
    }

    #[test]
    fn lemma1_coordinate_aligned_is_tight() {
        let f = gf11();
        for s in 2..=5 {
            for c in 1..=s {
                for d in 1..=s {
                    let r = lemma1_check(&f, &first_rows(c, s), &first_rows(d, s).transpose()).unwrap();
                    assert_eq!(r.value as i64, r.bound, "s={s} c={c} d={d}");
                    assert!(r.pass);
                }
            }
        }
    }

    #[test]
    fn lemma1_square_g_gives_zero() {
        let f = gf11();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let fm = random_full_rank(&f, 2, 4, &mut rng);
        let g = random_full_rank(&f, 4, 4, &mut rng);
        let r = lemma1_check(&f, &fm, &g).unwrap();
        assert_eq!(r.bound, 0);
        assert_eq!(r.value, 0);
    }

    #[test]
    fn lemma_checks_reject_deficient_inputs() {
        let f = gf11();
        let bad = Matrix::from_rows(&[vec![1, 2, 3], vec![2, 4, 6]]).unwrap();
        assert!(matches!(
            lemma1_check(&f, &bad, &Matrix::identity(3)),
            Err(AuditError::RankDeficient { .. })
        ));
        assert!(lemma3_check(&f, &bad, &Matrix::identity(3)).is_err());
    }

    #[test]
    fn lemma3_illustrated_shape() {
        let f = gf11();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for _ in 0..50 {
            let fm = random_full_rank(&f, 3, 4, &mut rng);
            let g = random_full_rank(&f, 2, 4, &mut rng);
            let r = lemma3_check(&f, &fm, &g).unwrap();
            assert_eq!(r.bound, 14);
            assert!(r.value >= 14 && r.pass);
        }
        let id = Matrix::identity(4);
        assert_eq!(lemma3_check(&f, &id, &id).unwrap().value, 16);
    }

    #[test]
    fn lemma3_exhaustive_gf2() {
        let f = Field::from_order(2).unwrap();
        let nonzero = [vec![0, 1], vec![1, 0], vec![1, 1]];
        for a in &nonzero {
            for b in &nonzero {
                let fm = Matrix::from_rows(std::slice::from_ref(a)).unwrap();
                let g = Matrix::from_rows(std::slice::from_ref(b)).unwrap();
                let r = lemma3_check(&f, &fm, &g).unwrap();
                assert!(r.pass && r.bound == 3, "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn randomized_lemmas() {
        let f = gf11();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..200 {
            let s = rng.gen_range(1..=6);
            let c = rng.gen_range(1..=s);
            let d = rng.gen_range(1..=s);
            let fm = random_full_rank(&f, c, s, &mut rng);
            assert!(lemma1_check(&f, &fm, &random_full_rank(&f, s, d, &mut rng)).unwrap().pass);
            assert!(lemma3_check(&f, &fm, &random_full_rank(&f, d, s, &mut rng)).unwrap().pass);
        }
    }
}
