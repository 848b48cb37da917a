//! 1-of-c transfer from `c - 1` transfers of 1-of-2.
//!
//! For secrets `a_0..a_{c-1}` and uniform masks `r_0..r_{c-3}` the table has
//! `c - 1` columns:
//!
//! ```text
//! column   0        j (1..=c-3)          c-2
//! first    a_0      a_j + r_{j-1}        a_{c-2} + r_{c-3}
//! second   r_0      r_{j-1} + r_j        a_{c-1} + r_{c-3}
//! ```
//!
//! To learn `a_i` the receiver takes the second row for every column before `i`
//! and the first row at column `i`; the second-row picks telescope to `r_{i-1}`.

use rand::Rng;

use super::{OtError, OtMessage};
use crate::field::Field;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Row {
    First,
    Second,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionTable {
    columns: Vec<(OtMessage, OtMessage)>,
}

impl ReductionTable {
    pub fn columns(&self) -> &[(OtMessage, OtMessage)] {
        &self.columns
    }

    pub fn pick(&self, picks: &[Row]) -> Vec<OtMessage> {
        self.columns
            .iter()
            .zip(picks)
            .map(|((a, b), row)| match row {
                Row::First => a.clone(),
                Row::Second => b.clone(),
            })
            .collect()
    }
}

/// Builds the table with masks drawn uniformly from `rng`.
pub fn build_reduction_table<R: Rng + ?Sized>(
    field: &Field,
    secrets: &[OtMessage],
    rng: &mut R,
) -> Result<ReductionTable, OtError> {
    let c = secrets.len();
    if c < 2 {
        return Err(OtError::TooFewSecrets(c));
    }
    let len = secrets[0].len();
    if let Some(bad) = secrets.iter().find(|m| m.len() != len) {
        return Err(OtError::LengthMismatch(len, bad.len()));
    }
    let elements = secrets[0].to_elements(field)?.len();
    let masks: Vec<OtMessage> = (0..c.saturating_sub(2))
        .map(|_| OtMessage::random(field, elements, rng))
        .collect();
    table_with_masks(field, secrets, &masks)
}

/// Builds the table from explicit masks (`c - 2` of them).
pub fn table_with_masks(
    field: &Field,
    secrets: &[OtMessage],
    masks: &[OtMessage],
) -> Result<ReductionTable, OtError> {
    let c = secrets.len();
    if c < 2 {
        return Err(OtError::TooFewSecrets(c));
    }
    if masks.len() != c - 2 {
        return Err(OtError::Malformed(format!("{} masks for c = {c}", masks.len())));
    }
    if c == 2 {
        return Ok(ReductionTable {
            columns: vec![(secrets[0].clone(), secrets[1].clone())],
        });
    }
    let mut columns = Vec::with_capacity(c - 1);
    columns.push((secrets[0].clone(), masks[0].clone()));
    for j in 1..=c - 3 {
        columns.push((
            secrets[j].add(field, &masks[j - 1])?,
            masks[j - 1].add(field, &masks[j])?,
        ));
    }
    columns.push((
        secrets[c - 2].add(field, &masks[c - 3])?,
        secrets[c - 1].add(field, &masks[c - 3])?,
    ));
    Ok(ReductionTable { columns })
}

/// Receiver's row choice per column for target `index`. Columns after the
/// target are fixed to the second row.
pub fn row_picks(index: usize, c: usize) -> Result<Vec<Row>, OtError> {
    if c < 2 {
        return Err(OtError::TooFewSecrets(c));
    }
    if index >= c {
        return Err(OtError::IndexOutOfRange { index, c });
    }
    Ok((0..c - 1)
        .map(|col| if col == index { Row::First } else { Row::Second })
        .collect())
}

/// Recovers `a_index` from the messages picked per [`row_picks`].
pub fn decode_c_of_1(
    field: &Field,
    received: &[OtMessage],
    index: usize,
    c: usize,
) -> Result<OtMessage, OtError> {
    if c < 2 {
        return Err(OtError::TooFewSecrets(c));
    }
    if index >= c {
        return Err(OtError::IndexOutOfRange { index, c });
    }
    if received.len() != c - 1 {
        return Err(OtError::WrongPickCount {
            expected: c - 1,
            got: received.len(),
        });
    }
    if index == 0 || c == 2 {
        return Ok(received[0].clone());
    }
    // r_0 = second_0, r_j = second_j - r_{j-1}
    let mut mask = received[0].clone();
    let last = index.min(c - 2);
    for msg in &received[1..last] {
        mask = msg.sub(field, &mask)?;
    }
    received[last].sub(field, &mask)
}
