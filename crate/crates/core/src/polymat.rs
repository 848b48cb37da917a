//! Polynomial/matrix duality and dense linear algebra over F_q.
//!
//! A polynomial `f` of degree below `d = s^2` is reshaped row-major into the
//! `s x s` matrix `A` with `A[i][j] = a_{s*i + j}`, so that
//! `f(x) = high(x) * A * low(x)^T` where `low(x) = [1, x, ..., x^{s-1}]` and
//! `high(x) = [1, x^s, ..., x^{s(s-1)}]`.

use std::collections::HashSet;
use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::field::Field;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyMatError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("coefficient count {0} is not a perfect square")]
    NotSquare(usize),
    #[error("generator point {0} appears more than once")]
    DuplicatePoint(u64),
}

fn dim_err(what: impl Into<String>) -> PolyMatError {
    PolyMatError::Dimension(what.into())
}

/// Dense row-major matrix of canonical field values.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix{}x{}", self.rows, self.cols)?;
        f.debug_list().entries(self.data.chunks(self.cols.max(1))).finish()
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<u64>) -> Result<Self, PolyMatError> {
        if data.len() != rows * cols {
            return Err(dim_err(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self, PolyMatError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(dim_err("ragged rows"));
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn random<R: Rng + ?Sized>(field: &Field, rows: usize, cols: usize, rng: &mut R) -> Self {
        Matrix {
            rows,
            cols,
            data: (0..rows * cols).map(|_| field.random(rng)).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[u64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<u64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn add(&self, field: &Field, other: &Matrix) -> Result<Matrix, PolyMatError> {
        self.zip_with(other, |a, b| field.add(a, b))
    }

    pub fn sub(&self, field: &Field, other: &Matrix) -> Result<Matrix, PolyMatError> {
        self.zip_with(other, |a, b| field.sub(a, b))
    }

    fn zip_with(&self, other: &Matrix, f: impl Fn(u64, u64) -> u64) -> Result<Matrix, PolyMatError> {
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(dim_err(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn mul(&self, field: &Field, other: &Matrix) -> Result<Matrix, PolyMatError> {
        if self.cols != other.rows {
            return Err(dim_err(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let v = field.mul_add(out.get(i, j), a, other.get(k, j));
                    out.set(i, j, v);
                }
            }
        }
        Ok(out)
    }

    /// `M * v` for a column vector `v`.
    pub fn mul_vec(&self, field: &Field, v: &[u64]) -> Result<Vec<u64>, PolyMatError> {
        if v.len() != self.cols {
            return Err(dim_err(format!(
                "{}x{} matrix times length-{} vector",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(field, self.row(i), v)).collect())
    }

    /// `v * M` for a row vector `v`.
    pub fn vec_mul(&self, field: &Field, v: &[u64]) -> Result<Vec<u64>, PolyMatError> {
        if v.len() != self.rows {
            return Err(dim_err(format!(
                "length-{} vector times {}x{} matrix",
                v.len(),
                self.rows,
                self.cols
            )));
        }
        let mut out = vec![0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0 {
                continue;
            }
            for (o, &m) in out.iter_mut().zip(self.row(i)) {
                *o = field.mul_add(*o, vi, m);
            }
        }
        Ok(out)
    }

    /// Vertical concatenation `self || other`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix, PolyMatError> {
        if self.rows > 0 && other.rows > 0 && self.cols != other.cols {
            return Err(dim_err(format!(
                "cannot stack {} columns on {}",
                other.cols, self.cols
            )));
        }
        let cols = if self.rows > 0 { self.cols } else { other.cols };
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Matrix {
            rows: self.rows + other.rows,
            cols,
            data,
        })
    }

    pub fn push_row(&mut self, row: &[u64]) -> Result<(), PolyMatError> {
        if self.rows == 0 && self.data.is_empty() {
            self.cols = row.len();
        } else if row.len() != self.cols {
            return Err(dim_err(format!("row of length {} into {} columns", row.len(), self.cols)));
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, field: &Field, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a == 0 {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(i * other.rows + k, j * other.cols + l, field.mul(a, other.get(k, l)));
                    }
                }
            }
        }
        out
    }

    /// Rank by Gauss-Jordan elimination; the pivot is the first nonzero entry in
    /// column order.
    pub fn rank(&self, field: &Field) -> usize {
        let mut m = self.clone();
        let mut rank = 0;
        for col in 0..m.cols {
            if rank == m.rows {
                break;
            }
            let Some(pivot) = (rank..m.rows).find(|&r| m.get(r, col) != 0) else {
                continue;
            };
            m.swap_rows(pivot, rank);
            let inv = field.inv(m.get(rank, col)).expect("pivot is nonzero");
            for j in col..m.cols {
                let v = field.mul(m.get(rank, j), inv);
                m.set(rank, j, v);
            }
            for r in 0..m.rows {
                if r == rank {
                    continue;
                }
                let factor = m.get(r, col);
                if factor == 0 {
                    continue;
                }
                for j in col..m.cols {
                    let v = field.sub(m.get(r, j), field.mul(factor, m.get(rank, j)));
                    m.set(r, j, v);
                }
            }
            rank += 1;
        }
        rank
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

pub fn dot(field: &Field, a: &[u64], b: &[u64]) -> u64 {
    a.iter().zip(b).fold(0, |acc, (&x, &y)| field.mul_add(acc, x, y))
}

/// Coefficients `a_0..a_{d-1}`, lowest degree first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    pub coeffs: Vec<u64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<u64>) -> Self {
        Polynomial { coeffs }
    }

    pub fn random<R: Rng + ?Sized>(field: &Field, d: usize, rng: &mut R) -> Self {
        Polynomial {
            coeffs: (0..d).map(|_| field.random(rng)).collect(),
        }
    }

    pub fn degree_bound(&self) -> usize {
        self.coeffs.len()
    }

    /// Reshapes into the `s x s` coefficient matrix, `(i, j) -> a_{s*i + j}`.
    pub fn to_matrix(&self, s: usize) -> Result<Matrix, PolyMatError> {
        if self.coeffs.len() != s * s {
            return Err(PolyMatError::NotSquare(self.coeffs.len()));
        }
        Matrix::from_vec(s, s, self.coeffs.clone())
    }

    /// Inverse of [`Polynomial::to_matrix`].
    pub fn from_matrix(m: &Matrix) -> Result<Self, PolyMatError> {
        if m.rows() != m.cols() {
            return Err(dim_err(format!("{}x{} is not square", m.rows(), m.cols())));
        }
        Ok(Polynomial {
            coeffs: m.as_slice().to_vec(),
        })
    }

    pub fn horner_eval(&self, field: &Field, x: u64) -> u64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0, |acc, &a| field.add(field.mul(acc, x), a))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    /// `[1, x, ..., x^{s-1}]`
    Low,
    /// `[1, x^s, ..., x^{s(s-1)}]`
    High,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PowerRow {
    pub direction: Direction,
    pub values: Vec<u64>,
}

pub fn power_row(field: &Field, x: u64, s: usize, direction: Direction) -> PowerRow {
    PowerRow {
        direction,
        values: power_values(field, x, s, direction),
    }
}

/// The entries of [`power_row`] without the wrapper; `s - 1` multiplications plus
/// one exponentiation for the high direction.
pub fn power_values(field: &Field, x: u64, s: usize, direction: Direction) -> Vec<u64> {
    let step = match direction {
        Direction::Low => x,
        Direction::High => field.pow(x, s as u64),
    };
    let mut out = Vec::with_capacity(s);
    let mut cur = 1;
    for _ in 0..s {
        out.push(cur);
        cur = field.mul(cur, step);
    }
    out
}

/// `f(x) = high(x) * A * low(x)^T`.
pub fn bilinear_eval(field: &Field, a: &Matrix, x: u64) -> Result<u64, PolyMatError> {
    if a.rows() != a.cols() {
        return Err(dim_err(format!("{}x{} is not square", a.rows(), a.cols())));
    }
    let s = a.rows();
    let low = power_values(field, x, s, Direction::Low);
    let high = power_values(field, x, s, Direction::High);
    let av = a.mul_vec(field, &low)?;
    Ok(dot(field, &high, &av))
}

/// Power rows of distinct generator points stacked into a `c x s` matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StructuredMatrix {
    pub direction: Direction,
    pub points: Vec<u64>,
    pub matrix: Matrix,
}

pub fn structured_matrix(
    field: &Field,
    points: &[u64],
    s: usize,
    direction: Direction,
) -> Result<StructuredMatrix, PolyMatError> {
    let mut seen = HashSet::new();
    for &p in points {
        if !seen.insert(p) {
            return Err(PolyMatError::DuplicatePoint(p));
        }
    }
    let mut matrix = Matrix::zeros(points.len(), s);
    for (i, &p) in points.iter().enumerate() {
        for (j, v) in power_values(field, p, s, direction).into_iter().enumerate() {
            matrix.set(i, j, v);
        }
    }
    Ok(StructuredMatrix {
        direction,
        points: points.to_vec(),
        matrix,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn gf11() -> Field {
        Field::prime(11).unwrap()
    }

    #[test]
    fn reshape_layout() {
        let p = Polynomial::new(vec![10, 11, 12, 13]);
        let m = p.to_matrix(2).unwrap();
        assert_eq!(m, Matrix::from_rows(&[vec![10, 11], vec![12, 13]]).unwrap());
        assert_eq!(Polynomial::from_matrix(&m).unwrap(), p);
        let p9 = Polynomial::new((0..9).collect());
        assert_eq!(p9.to_matrix(3).unwrap().get(2, 1), 7);
        assert_eq!(p9.to_matrix(2), Err(PolyMatError::NotSquare(9)));
    }

    #[test]
    fn horner_examples() {
        let f = gf11();
        let p = Polynomial::new(vec![1, 2, 3, 4]);
        // direct sum oracle: 1 + 4 + 12 + 32 = 49
        let direct = (0..4).map(|i| (i as u64 + 1) * 2u64.pow(i)).sum::<u64>() % 11;
        assert_eq!(direct, 5);
        assert_eq!(p.horner_eval(&f, 2), 5);
        assert_eq!(p.horner_eval(&f, 0), 1);
        assert_eq!(Polynomial::new(vec![0; 4]).horner_eval(&f, 9), 0);
    }

    #[test]
    fn power_rows() {
        let f = gf11();
        assert_eq!(power_row(&f, 2, 3, Direction::Low).values, vec![1, 2, 4]);
        // 7^3 = 343 = 2 mod 11, 7^6 = 4
        assert_eq!(power_row(&f, 7, 3, Direction::High).values, vec![1, 2, 4]);
        assert_eq!(power_row(&f, 0, 4, Direction::Low).values, vec![1, 0, 0, 0]);
        assert_eq!(power_row(&f, 0, 4, Direction::High).values, vec![1, 0, 0, 0]);
    }

    #[test]
    fn bilinear_examples() {
        let f = gf11();
        let a = Polynomial::new(vec![1, 2, 3, 4]).to_matrix(2).unwrap();
        assert_eq!(bilinear_eval(&f, &a, 2).unwrap(), 5);
        assert_eq!(bilinear_eval(&f, &Matrix::zeros(3, 3), 6).unwrap(), 0);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let r = Matrix::random(&f, 3, 3, &mut rng);
        assert_eq!(bilinear_eval(&f, &r, 0).unwrap(), r.get(0, 0));
        assert!(bilinear_eval(&f, &Matrix::zeros(2, 3), 1).is_err());
    }

    #[test]
    fn structured_examples() {
        let f = gf11();
        let m = structured_matrix(&f, &[7, 8], 3, Direction::High).unwrap();
        assert_eq!(m.matrix, Matrix::from_rows(&[vec![1, 2, 4], vec![1, 6, 3]]).unwrap());
        let x = structured_matrix(&f, &[1, 2, 3], 3, Direction::Low).unwrap();
        assert_eq!(
            x.matrix,
            Matrix::from_rows(&[vec![1, 1, 1], vec![1, 2, 4], vec![1, 3, 9]]).unwrap()
        );
        let z = structured_matrix(&f, &[0], 3, Direction::Low).unwrap();
        assert_eq!(z.matrix.row(0), &[1, 0, 0]);
        assert_eq!(
            structured_matrix(&f, &[4, 4], 3, Direction::Low),
            Err(PolyMatError::DuplicatePoint(4))
        );
    }

    #[test]
    fn matrix_products_and_shapes() {
        let f = gf11();
        let a = Matrix::from_rows(&[vec![1, 2], vec![3, 4]]).unwrap();
        let b = Matrix::from_rows(&[vec![5, 6], vec![7, 8]]).unwrap();
        // [[19, 22], [43, 50]] mod 11
        assert_eq!(a.mul(&f, &b).unwrap(), Matrix::from_rows(&[vec![8, 0], vec![10, 6]]).unwrap());
        assert_eq!(a.mul_vec(&f, &[1, 1]).unwrap(), vec![3, 7]);
        assert_eq!(a.vec_mul(&f, &[1, 1]).unwrap(), vec![4, 6]);
        assert_eq!(a.transpose().get(0, 1), 3);
        assert!(a.mul(&f, &Matrix::zeros(3, 1)).is_err());
        assert!(a.mul_vec(&f, &[1]).is_err());
        assert!(a.vstack(&Matrix::zeros(1, 3)).is_err());
        let k = Matrix::identity(2).kron(&f, &a);
        assert_eq!(k.rows(), 4);
        assert_eq!(k.get(2, 2), 1);
        assert_eq!(k.get(0, 2), 0);
    }

    #[test]
    fn rank_examples() {
        let f = gf11();
        for s in 1..7 {
            assert_eq!(Matrix::identity(s).rank(&f), s);
        }
        // c + m distinct points, c + m <= s
        let v = structured_matrix(&f, &[7, 8, 9, 1, 2], 6, Direction::Low).unwrap();
        assert_eq!(v.matrix.rank(&f), 5);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let m = Matrix::random(&f, 3, 5, &mut rng);
        assert_eq!(m.vstack(&m).unwrap().rank(&f), m.rank(&f));
        assert_eq!(Matrix::zeros(3, 3).rank(&f), 0);
    }

    #[test]
    fn vandermonde_full_rank_high_kind_when_valid() {
        let f = gf11();
        let s = 3; // gcd(3, 10) = 1
        let pts: Vec<u64> = f.elements().collect();
        for a in &pts {
            for b in &pts {
                if a < b {
                    for c in &pts {
                        if b < c {
                            let m = structured_matrix(&f, &[*a, *b, *c], s, Direction::High).unwrap();
                            assert_eq!(m.matrix.rank(&f), 3);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rank_invariant_under_permutation_and_scaling() {
        let f = gf11();
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..200 {
            let rows = rng.gen_range(1..6);
            let cols = rng.gen_range(1..6);
            let m = Matrix::random(&f, rows, cols, &mut rng);
            let mut order: Vec<usize> = (0..rows).collect();
            order.shuffle(&mut rng);
            let mut permuted = Matrix::zeros(0, cols);
            for &i in &order {
                let scale = rng.gen_range(1..11);
                let row: Vec<u64> = m.row(i).iter().map(|&v| f.mul(v, scale)).collect();
                permuted.push_row(&row).unwrap();
            }
            assert_eq!(m.rank(&f), permuted.rank(&f));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn bilinear_matches_horner(coeffs in proptest::collection::vec(0u64..11, 9), x in 0u64..11) {
            let f = gf11();
            let p = Polynomial::new(coeffs);
            prop_assert_eq!(bilinear_eval(&f, &p.to_matrix(3).unwrap(), x).unwrap(), p.horner_eval(&f, x));
        }

        #[test]
        fn bilinear_matches_horner_large_prime(coeffs in proptest::collection::vec(0u64..1_000_003, 16), x in 0u64..1_000_003) {
            let f = Field::prime(1_000_003).unwrap();
            let p = Polynomial::new(coeffs);
            prop_assert_eq!(bilinear_eval(&f, &p.to_matrix(4).unwrap(), x).unwrap(), p.horner_eval(&f, x));
        }

        #[test]
        fn reshape_round_trip(coeffs in proptest::collection::vec(0u64..11, 16)) {
            let p = Polynomial::new(coeffs);
            prop_assert_eq!(Polynomial::from_matrix(&p.to_matrix(4).unwrap()).unwrap(), p);
        }
    }
}
