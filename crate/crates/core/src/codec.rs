//! Little-endian binary encoding shared by wire payloads and persisted state.

use thiserror::Error;

use crate::field::{Field, FieldSpec, FieldTables};
use crate::polymat::Matrix;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("truncated input: needed {needed} bytes, {available} available")]
    Truncated { needed: usize, available: usize },
    #[error("unsupported format version {found} (expected {expected})")]
    Version { expected: u16, found: u16 },
    #[error("bad magic bytes")]
    Magic,
    #[error("element {value} out of range for a field of order {order}")]
    OutOfRange { value: u64, order: u64 },
    #[error("unknown tag {0}")]
    BadTag(u8),
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("invalid value: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, Default)]
pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u16(&mut self, v: u16) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn raw(&mut self, bytes: &[u8]) -> &mut Self {
        self.buf.extend_from_slice(bytes);
        self
    }

    /// `u32` length, then the bytes.
    pub fn bytes(&mut self, bytes: &[u8]) -> &mut Self {
        self.u32(bytes.len() as u32).raw(bytes)
    }

    pub fn element(&mut self, field: &Field, v: u64) -> &mut Self {
        field.write_element(v, &mut self.buf);
        self
    }

    /// `u32` count, then the elements.
    pub fn elements(&mut self, field: &Field, vs: &[u64]) -> &mut Self {
        self.u32(vs.len() as u32);
        for &v in vs {
            self.element(field, v);
        }
        self
    }

    /// `u32` rows, `u32` cols, then entries row-major.
    pub fn matrix(&mut self, field: &Field, m: &Matrix) -> &mut Self {
        self.u32(m.rows() as u32).u32(m.cols() as u32);
        for &v in m.as_slice() {
            self.element(field, v);
        }
        self
    }

    pub fn field_spec(&mut self, spec: &FieldSpec) -> &mut Self {
        match spec {
            FieldSpec::Prime { modulus } => {
                self.u8(0).u64(*modulus);
            }
            FieldSpec::Table { tables } => {
                self.u8(1).u16(tables.add.len() as u16);
                for row in tables.add.iter().chain(&tables.mul) {
                    self.raw(row);
                }
            }
        }
        self
    }
}

#[derive(Clone, Debug)]
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.remaining() < n {
            return Err(DecodeError::Truncated {
                needed: n,
                available: self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], DecodeError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, DecodeError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        let n = self.u32()? as usize;
        self.take(n)
    }

    pub fn element(&mut self, field: &Field) -> Result<u64, DecodeError> {
        let w = field.element_width();
        let raw = self.take(w)?;
        let value = match w {
            1 => raw[0] as u64,
            _ => u64::from_le_bytes(raw.try_into().expect("width 8")),
        };
        if !field.contains(value) {
            return Err(DecodeError::OutOfRange {
                value,
                order: field.order(),
            });
        }
        Ok(value)
    }

    /// Count-prefixed elements; the count is checked against the bytes left
    /// before anything is allocated.
    pub fn elements(&mut self, field: &Field) -> Result<Vec<u64>, DecodeError> {
        let n = self.u32()? as usize;
        self.ensure(n.saturating_mul(field.element_width()))?;
        (0..n).map(|_| self.element(field)).collect()
    }

    pub fn matrix(&mut self, field: &Field) -> Result<Matrix, DecodeError> {
        let rows = self.u32()? as usize;
        let cols = self.u32()? as usize;
        self.ensure(rows.saturating_mul(cols).saturating_mul(field.element_width()))?;
        let data = (0..rows * cols)
            .map(|_| self.element(field))
            .collect::<Result<Vec<_>, _>>()?;
        Matrix::from_vec(rows, cols, data).map_err(|e| DecodeError::Invalid(e.to_string()))
    }

    pub fn field_spec(&mut self) -> Result<FieldSpec, DecodeError> {
        match self.u8()? {
            0 => Ok(FieldSpec::Prime { modulus: self.u64()? }),
            1 => {
                let q = self.u16()? as usize;
                let mut table = || -> Result<Vec<Vec<u8>>, DecodeError> {
                    (0..q).map(|_| Ok(self.take(q)?.to_vec())).collect()
                };
                let add = table()?;
                let mul = table()?;
                Ok(FieldSpec::Table {
                    tables: FieldTables { add, mul },
                })
            }
            t => Err(DecodeError::BadTag(t)),
        }
    }

    pub fn ensure(&self, n: usize) -> Result<(), DecodeError> {
        if self.remaining() < n {
            return Err(DecodeError::Truncated {
                needed: n,
                available: self.remaining(),
            });
        }
        Ok(())
    }

    pub fn finish(self) -> Result<(), DecodeError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(DecodeError::Trailing(n)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_widths() {
        let f = Field::prime(11).unwrap();
        let mut w = Writer::new();
        w.element(&f, 7);
        assert_eq!(w.into_bytes(), vec![7, 0, 0, 0, 0, 0, 0, 0]);
        let g = Field::gf4();
        let mut w = Writer::new();
        w.element(&g, 3);
        assert_eq!(w.into_bytes(), vec![3]);
        assert_eq!(
            Reader::new(&[12, 0, 0, 0, 0, 0, 0, 0]).element(&f),
            Err(DecodeError::OutOfRange { value: 12, order: 11 })
        );
    }

    #[test]
    fn round_trips() {
        let f = Field::prime(13).unwrap();
        let m = Matrix::from_rows(&[vec![1, 2, 3], vec![4, 5, 6]]).unwrap();
        let g = Field::gf4();
        let mut w = Writer::new();
        w.u16(9).elements(&f, &[3, 12]).matrix(&f, &m).field_spec(f.spec()).field_spec(g.spec()).bytes(b"hi");
        let bytes = w.into_bytes();
        let mut r = Reader::new(&bytes);
        assert_eq!(r.u16().unwrap(), 9);
        assert_eq!(r.elements(&f).unwrap(), vec![3, 12]);
        assert_eq!(r.matrix(&f).unwrap(), m);
        assert_eq!(&r.field_spec().unwrap(), f.spec());
        assert_eq!(&r.field_spec().unwrap(), g.spec());
        assert_eq!(r.bytes().unwrap(), b"hi");
        r.finish().unwrap();
    }

    #[test]
    fn corrupt_counts_fail_cleanly() {
        let f = Field::prime(13).unwrap();
        let mut r = Reader::new(&[0xff, 0xff, 0xff, 0xff]);
        assert!(matches!(r.elements(&f), Err(DecodeError::Truncated { .. })));
        let mut r = Reader::new(&[0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff, 0xff]);
        assert!(matches!(r.matrix(&f), Err(DecodeError::Truncated { .. })));
        assert_eq!(Reader::new(&[1, 2]).finish(), Err(DecodeError::Trailing(2)));
    }
}
