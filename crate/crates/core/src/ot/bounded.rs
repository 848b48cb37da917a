//! 1-of-2 OT in the bounded-storage model, desk-scale.
//!
//! 1. The sender streams a random tape of `K > alpha * N` bits. Each party keeps
//!    the bits at `n = ceil(sqrt(2 * ell * N))` random positions (`Omega_A`,
//!    `Omega_B`) and nothing else.
//! 2. The sender reveals `Omega_A`. Positions of `Omega_A` (in sorted order) are
//!    grouped into `k` blocks of `2^beta` consecutive entries. A candidate set
//!    picks one position per block and is encoded in `L = k * beta` bits, so every
//!    `L`-bit string names a valid candidate. The receiver picks, per block, a
//!    uniformly random position it also stored.
//! 3. Interactive hashing: the sender announces `L - 1` linearly independent
//!    random constraints one at a time and the receiver answers each with the
//!    parity of its encoding. Exactly two encodings satisfy all answers; the
//!    receiver's final swap bit labels its own set `X_b`.
//! 4. The sender one-time-pads `m_i` with parity-extractor output over the tape
//!    bits `R_{X_i}` (fresh public seed per message).

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{Ot2Backend, OtError, OtMessage, SenderEvent};
use crate::rng::SeedTree;

/// Largest tape slice carried by one chunk, in bits (64 KiB of payload).
pub const TAPE_CHUNK_BITS: u64 = 64 * 1024 * 8;
/// Phase-one restarts before the backend gives up.
pub const MAX_ATTEMPTS: u32 = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct BsOtParams {
    /// Receiver storage bound `N`, in bits.
    pub storage_bound: u64,
    /// Tape length `K`, in bits.
    pub tape_len: u64,
    pub alpha: f64,
    /// Target intersection size.
    pub ell: u64,
    /// Bits stored per party.
    pub stored: u64,
    /// Number of interactive-hashing blocks, i.e. `|X_0| = |X_1|`.
    pub k: usize,
}

impl BsOtParams {
    pub fn new(storage_bound: u64, alpha: f64, ell: u64, k: usize) -> Result<Self, OtError> {
        if alpha.is_nan() || alpha <= 1.0 {
            return Err(OtError::Params(format!("alpha = {alpha} must exceed 1")));
        }
        let tape_len = (alpha * storage_bound as f64).floor() as u64 + 1;
        let params = BsOtParams {
            storage_bound,
            tape_len,
            alpha,
            ell,
            stored: stored_bits(ell, storage_bound),
            k,
        };
        params.validate()?;
        Ok(params)
    }

    /// Default desk-scale parameters: `N = 2^16`, `alpha = 2`, `ell = 512`, `k = 40`.
    pub fn desk() -> Self {
        Self::new(1 << 16, 2.0, 512, 40).expect("desk parameters are valid")
    }

    pub fn validate(&self) -> Result<(), OtError> {
        let err = |m: String| Err(OtError::Params(m));
        if (self.tape_len as f64) <= self.alpha * self.storage_bound as f64 {
            return err(format!("K = {} must exceed alpha * N", self.tape_len));
        }
        if self.stored > self.storage_bound {
            return err(format!("n = {} exceeds N = {}", self.stored, self.storage_bound));
        }
        if self.ell < 8 {
            return err(format!("ell = {} must be at least 8", self.ell));
        }
        IhLayout::new(self.stored as usize, self.k)?;
        Ok(())
    }
}

/// `ceil(sqrt(2 * ell * n_bound))`.
pub fn stored_bits(ell: u64, storage_bound: u64) -> u64 {
    let target = 2 * ell * storage_bound;
    let mut r = (target as f64).sqrt() as u64;
    while r * r > target {
        r -= 1;
    }
    while r * r < target {
        r += 1;
    }
    r
}

/// Dense bit vector over GF(2).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Gf2Vec {
    len: usize,
    words: Vec<u64>,
}

impl Gf2Vec {
    pub fn zeros(len: usize) -> Self {
        Gf2Vec {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut v = Self::zeros(len);
        for w in v.words.iter_mut() {
            *w = rng.gen();
        }
        v.clear_tail();
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    /// Random vector whose lowest set bit is `pivot`.
    pub fn with_pivot<R: Rng + ?Sized>(len: usize, pivot: usize, rng: &mut R) -> Self {
        let mut v = Self::random(len, rng);
        let (w, b) = (pivot / 64, pivot % 64);
        v.words[..w].fill(0);
        v.words[w] &= u64::MAX << b;
        v.set(pivot, true);
        v
    }

    fn clear_tail(&mut self) {
        let extra = self.words.len() * 64 - self.len;
        if extra > 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= u64::MAX >> extra;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, b: bool) {
        let mask = 1u64 << (i % 64);
        if b {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn dot(&self, other: &Gf2Vec) -> bool {
        self.words
            .iter()
            .zip(&other.words)
            .fold(0u32, |acc, (a, b)| acc ^ (a & b).count_ones())
            & 1
            == 1
    }

    /// Lowest set bit, if any.
    pub fn pivot(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.len.div_ceil(8));
        out
    }

    pub fn from_bytes(len: usize, bytes: &[u8]) -> Result<Self, OtError> {
        if bytes.len() != len.div_ceil(8) {
            return Err(OtError::Malformed(format!("{} bytes for {len} bits", bytes.len())));
        }
        let mut v = Self::zeros(len);
        for (i, chunk) in bytes.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            v.words[i] = u64::from_le_bytes(buf);
        }
        let before = v.words.clone();
        v.clear_tail();
        if before != v.words {
            return Err(OtError::Malformed("bits set beyond length".into()));
        }
        Ok(v)
    }
}

/// A slice of the broadcast tape, bits packed LSB-first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TapeChunk {
    pub offset: u64,
    pub len: u64,
    pub bytes: Vec<u8>,
}

impl TapeChunk {
    pub fn bit(&self, index: u64) -> bool {
        let i = (index - self.offset) as usize;
        self.bytes[i / 8] >> (i % 8) & 1 == 1
    }
}

/// Sender-side tape generator; chunks are produced on demand and never retained.
#[derive(Debug)]
pub struct TapeSource {
    len: u64,
    pos: u64,
}

impl TapeSource {
    pub fn new(len: u64) -> Self {
        TapeSource { len, pos: 0 }
    }

    pub fn next_chunk<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Option<TapeChunk> {
        if self.pos >= self.len {
            return None;
        }
        let len = TAPE_CHUNK_BITS.min(self.len - self.pos);
        let mut bytes = vec![0u8; len.div_ceil(8) as usize];
        rng.fill(&mut bytes[..]);
        if !len.is_multiple_of(8) {
            *bytes.last_mut().unwrap() &= (1u8 << (len % 8)) - 1;
        }
        let chunk = TapeChunk {
            offset: self.pos,
            len,
            bytes,
        };
        self.pos += len;
        Some(chunk)
    }
}

/// Counts retained tape bits against a declared bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StorageMeter {
    bound: u64,
    used: u64,
}

impl StorageMeter {
    pub fn new(bound: u64) -> Self {
        StorageMeter { bound, used: 0 }
    }

    pub fn charge(&mut self, bits: u64) -> Result<(), OtError> {
        let used = self.used + bits;
        if used > self.bound {
            return Err(OtError::StorageExceeded {
                used,
                bound: self.bound,
            });
        }
        self.used = used;
        Ok(())
    }

    pub fn used(&self) -> u64 {
        self.used
    }
}

/// One party's retained view of the tape: sorted indices and their bits.
#[derive(Clone, Debug)]
pub struct StoredBits {
    indices: Vec<u64>,
    bits: Vec<Option<bool>>,
    meter: StorageMeter,
}

impl StoredBits {
    /// Chooses `count` uniformly random distinct positions of a `tape_len` tape.
    pub fn choose<R: Rng + ?Sized>(tape_len: u64, count: u64, bound: u64, rng: &mut R) -> Self {
        if count.saturating_mul(4) > tape_len || tape_len > u32::MAX as u64 {
            let indices = sample(rng, tape_len as usize, count as usize)
                .into_iter()
                .map(|i| i as u64)
                .collect();
            return Self::with_indices(indices, bound);
        }
        // Sparse case: bulk-drawn words, reduced without bias by rejection, into
        // a bitmap whose scan yields the positions already sorted.
        let n = tape_len as u32;
        let zone = u32::MAX - u32::MAX % n;
        let mut taken = vec![0u64; tape_len.div_ceil(64) as usize];
        let mut drawn = 0;
        let mut buf = [0u32; 512];
        while drawn < count {
            rng.fill(&mut buf[..]);
            for &x in buf.iter().filter(|&&x| x < zone) {
                let i = (x % n) as u64;
                let (w, b) = ((i / 64) as usize, i % 64);
                if taken[w] >> b & 1 == 0 {
                    taken[w] |= 1 << b;
                    drawn += 1;
                    if drawn == count {
                        break;
                    }
                }
            }
        }
        let mut indices = Vec::with_capacity(count as usize);
        for (w, &word) in taken.iter().enumerate() {
            let mut word = word;
            while word != 0 {
                indices.push(w as u64 * 64 + word.trailing_zeros() as u64);
                word &= word - 1;
            }
        }
        let bits = vec![None; indices.len()];
        StoredBits {
            indices,
            bits,
            meter: StorageMeter::new(bound),
        }
    }

    pub fn with_indices(mut indices: Vec<u64>, bound: u64) -> Self {
        indices.sort_unstable();
        indices.dedup();
        let bits = vec![None; indices.len()];
        StoredBits {
            indices,
            bits,
            meter: StorageMeter::new(bound),
        }
    }

    /// Keeps the bits of `chunk` at stored positions.
    pub fn absorb(&mut self, chunk: &TapeChunk) -> Result<(), OtError> {
        let start = self.indices.partition_point(|&i| i < chunk.offset);
        let end = self.indices.partition_point(|&i| i < chunk.offset + chunk.len);
        self.meter.charge((end - start) as u64)?;
        for k in start..end {
            self.bits[k] = Some(chunk.bit(self.indices[k]));
        }
        Ok(())
    }

    pub fn indices(&self) -> &[u64] {
        &self.indices
    }

    pub fn bit_at(&self, index: u64) -> Option<bool> {
        self.indices
            .binary_search(&index)
            .ok()
            .and_then(|k| self.bits[k])
    }

    /// Which of the ascending `positions` have a stored bit, by a merge walk.
    pub fn holds_sorted(&self, positions: &[u64]) -> Vec<bool> {
        let mut k = self.indices.partition_point(|&i| i < positions.first().copied().unwrap_or(0));
        positions
            .iter()
            .map(|&p| {
                while k < self.indices.len() && self.indices[k] < p {
                    k += 1;
                }
                k < self.indices.len() && self.indices[k] == p && self.bits[k].is_some()
            })
            .collect()
    }

    pub fn bits_at(&self, indices: &[u64]) -> Vec<Option<bool>> {
        indices.iter().map(|&i| self.bit_at(i)).collect()
    }

    pub fn stored_bits(&self) -> u64 {
        self.meter.used()
    }
}

#[derive(Debug)]
pub struct Phase1 {
    pub alice: StoredBits,
    pub bob: StoredBits,
    pub chunks: usize,
}

/// Streams a fresh tape; each party retains only its own random positions.
pub fn bs_phase1<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    params: &BsOtParams,
    sender_rng: &mut R1,
    receiver_rng: &mut R2,
) -> Result<Phase1, OtError> {
    bs_phase1_observed(params, sender_rng, receiver_rng, |_| {})
}

/// [`bs_phase1`] with a hook that sees every chunk as it is broadcast.
pub fn bs_phase1_observed<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    params: &BsOtParams,
    sender_rng: &mut R1,
    receiver_rng: &mut R2,
    mut observe: impl FnMut(&TapeChunk),
) -> Result<Phase1, OtError> {
    let mut alice = StoredBits::choose(params.tape_len, params.stored, params.storage_bound, sender_rng);
    let mut bob = StoredBits::choose(params.tape_len, params.stored, params.storage_bound, receiver_rng);
    let mut tape = TapeSource::new(params.tape_len);
    let mut chunks = 0;
    while let Some(chunk) = tape.next_chunk(sender_rng) {
        observe(&chunk);
        alice.absorb(&chunk)?;
        bob.absorb(&chunk)?;
        chunks += 1;
    }
    Ok(Phase1 { alice, bob, chunks })
}

/// Block structure of candidate sets over the sorted positions of `Omega_A`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IhLayout {
    pub blocks: usize,
    pub block_bits: u32,
}

impl IhLayout {
    pub fn new(stored: usize, k: usize) -> Result<Self, OtError> {
        if k == 0 || stored < 2 * k {
            return Err(OtError::Params(format!(
                "need at least 2k = {} stored positions, have {stored}",
                2 * k
            )));
        }
        let block_bits = (stored / k).ilog2();
        Ok(IhLayout {
            blocks: k,
            block_bits,
        })
    }

    pub fn block_size(&self) -> usize {
        1 << self.block_bits
    }

    /// Encoding length `L`.
    pub fn encoding_bits(&self) -> usize {
        self.blocks * self.block_bits as usize
    }

    /// Number of constraint rounds, `L - 1`.
    pub fn rounds(&self) -> usize {
        self.encoding_bits() - 1
    }

    /// Positions (into sorted `Omega_A`) named by an encoding.
    pub fn decode(&self, w: &Gf2Vec) -> Vec<usize> {
        let beta = self.block_bits as usize;
        (0..self.blocks)
            .map(|j| {
                let offset = (0..beta).fold(0usize, |acc, t| acc | (w.get(j * beta + t) as usize) << t);
                j * self.block_size() + offset
            })
            .collect()
    }

    fn encode_into(&self, w: &mut Gf2Vec, block: usize, offset: usize) {
        let beta = self.block_bits as usize;
        for t in 0..beta {
            w.set(block * beta + t, offset >> t & 1 == 1);
        }
    }
}

/// The two encodings consistent with `L - 1` pivoted constraints, ordered by
/// their last bit.
pub fn solve_candidates(
    len: usize,
    constraints: &[Gf2Vec],
    answers: &[bool],
) -> Result<[Gf2Vec; 2], OtError> {
    if constraints.len() + 1 != len || answers.len() != constraints.len() {
        return Err(OtError::Sequence(format!(
            "{} constraints and {} answers for {len} bits",
            constraints.len(),
            answers.len()
        )));
    }
    let solve = |free: bool| {
        let mut w = Gf2Vec::zeros(len);
        w.set(len - 1, free);
        for j in (0..len - 1).rev() {
            let bit = answers[j] ^ constraints[j].dot(&w);
            w.set(j, bit);
        }
        w
    };
    Ok([solve(false), solve(true)])
}

fn check_constraint(h: &Gf2Vec, len: usize, round: usize) -> Result<(), OtError> {
    if h.len() != len || h.pivot() != Some(round) {
        return Err(OtError::Sequence(format!("constraint {round} is not pivoted at {round}")));
    }
    Ok(())
}

/// Sender half of interactive hashing.
#[derive(Clone, Debug)]
pub struct IhSender {
    layout: IhLayout,
    constraints: Vec<Gf2Vec>,
    answers: Vec<bool>,
}

impl IhSender {
    pub fn new(layout: IhLayout) -> Self {
        IhSender {
            layout,
            constraints: Vec::new(),
            answers: Vec::new(),
        }
    }

    /// Next constraint, or `None` once all `L - 1` have been answered.
    pub fn next_constraint<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Option<Gf2Vec>, OtError> {
        if self.answers.len() != self.constraints.len() {
            return Err(OtError::Sequence("previous constraint unanswered".into()));
        }
        if self.constraints.len() == self.layout.rounds() {
            return Ok(None);
        }
        let h = Gf2Vec::with_pivot(self.layout.encoding_bits(), self.constraints.len(), rng);
        self.constraints.push(h.clone());
        Ok(Some(h))
    }

    pub fn record_answer(&mut self, bit: bool) -> Result<(), OtError> {
        if self.answers.len() + 1 != self.constraints.len() {
            return Err(OtError::Sequence("answer without pending constraint".into()));
        }
        self.answers.push(bit);
        Ok(())
    }

    /// `(X_0, X_1)` as positions into sorted `Omega_A`.
    pub fn finish(&self, swap: bool) -> Result<(Vec<usize>, Vec<usize>), OtError> {
        let [c0, c1] = solve_candidates(self.layout.encoding_bits(), &self.constraints, &self.answers)?;
        let (x0, x1) = if swap { (c1, c0) } else { (c0, c1) };
        Ok((self.layout.decode(&x0), self.layout.decode(&x1)))
    }

    pub fn constraints(&self) -> &[Gf2Vec] {
        &self.constraints
    }

    pub fn answers(&self) -> &[bool] {
        &self.answers
    }
}

/// Receiver half of interactive hashing.
#[derive(Clone, Debug)]
pub struct IhReceiver {
    layout: IhLayout,
    choice: bool,
    encoding: Gf2Vec,
    constraints: Vec<Gf2Vec>,
    answers: Vec<bool>,
}

impl IhReceiver {
    /// Picks one jointly stored position per block. Fails (retriably) when some
    /// block has none.
    pub fn new<R: Rng + ?Sized>(
        layout: IhLayout,
        omega_a: &[u64],
        bob: &StoredBits,
        choice: bool,
        rng: &mut R,
    ) -> Result<Self, OtError> {
        let size = layout.block_size();
        if omega_a.len() < layout.blocks * size {
            return Err(OtError::Params(format!(
                "Omega_A has {} positions, layout needs {}",
                omega_a.len(),
                layout.blocks * size
            )));
        }
        let mut encoding = Gf2Vec::zeros(layout.encoding_bits());
        if !omega_a.windows(2).all(|w| w[0] < w[1]) {
            return Err(OtError::Params("Omega_A is not strictly ascending".into()));
        }
        let stored = bob.holds_sorted(&omega_a[..layout.blocks * size]);
        for block in 0..layout.blocks {
            let held: Vec<usize> = (0..size).filter(|&off| stored[block * size + off]).collect();
            if held.is_empty() {
                return Err(OtError::InsufficientIntersection);
            }
            let offset = held[rng.gen_range(0..held.len())];
            layout.encode_into(&mut encoding, block, offset);
        }
        Ok(IhReceiver {
            layout,
            choice,
            encoding,
            constraints: Vec::new(),
            answers: Vec::new(),
        })
    }

    pub fn answer(&mut self, h: &Gf2Vec) -> Result<bool, OtError> {
        if self.constraints.len() == self.layout.rounds() {
            return Err(OtError::Sequence("too many constraints".into()));
        }
        check_constraint(h, self.layout.encoding_bits(), self.constraints.len())?;
        let bit = h.dot(&self.encoding);
        self.constraints.push(h.clone());
        self.answers.push(bit);
        Ok(bit)
    }

    pub fn is_done(&self) -> bool {
        self.constraints.len() == self.layout.rounds()
    }

    /// Swap bit that makes the receiver's own set `X_choice`.
    pub fn swap_bit(&self) -> Result<bool, OtError> {
        let cands = solve_candidates(self.layout.encoding_bits(), &self.constraints, &self.answers)?;
        let mine = cands
            .iter()
            .position(|c| *c == self.encoding)
            .expect("own encoding satisfies its own answers");
        Ok((mine == 1) ^ self.choice)
    }

    pub fn encoding(&self) -> &Gf2Vec {
        &self.encoding
    }

    /// The receiver's own set as positions into sorted `Omega_A`.
    pub fn own_positions(&self) -> Vec<usize> {
        self.layout.decode(&self.encoding)
    }
}

/// `X_0`, `X_1` as tape indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetPair {
    pub x0: Vec<u64>,
    pub x1: Vec<u64>,
}

impl SetPair {
    pub fn from_positions(omega_a: &[u64], x0: &[usize], x1: &[usize]) -> Self {
        SetPair {
            x0: x0.iter().map(|&p| omega_a[p]).collect(),
            x1: x1.iter().map(|&p| omega_a[p]).collect(),
        }
    }

    pub fn get(&self, b: bool) -> &[u64] {
        if b {
            &self.x1
        } else {
            &self.x0
        }
    }
}

/// Everything the sender sees of one 1-of-2 run.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct BsSenderView {
    /// Phase-one restarts requested by the receiver.
    pub restarts: u32,
    pub constraints: Vec<Gf2Vec>,
    pub answers: Vec<bool>,
    pub swap: bool,
}

/// Runs interactive hashing in-process and returns the set pair with the
/// sender's view of the exchange.
pub fn bs_setpair<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    omega_a: &[u64],
    bob: &StoredBits,
    choice: bool,
    k: usize,
    sender_rng: &mut R1,
    receiver_rng: &mut R2,
) -> Result<(SetPair, BsSenderView), OtError> {
    let layout = IhLayout::new(omega_a.len(), k)?;
    let mut receiver = IhReceiver::new(layout, omega_a, bob, choice, receiver_rng)?;
    let mut sender = IhSender::new(layout);
    while let Some(h) = sender.next_constraint(sender_rng)? {
        let bit = receiver.answer(&h)?;
        sender.record_answer(bit)?;
    }
    let swap = receiver.swap_bit()?;
    let (x0, x1) = sender.finish(swap)?;
    let view = BsSenderView {
        restarts: 0,
        constraints: sender.constraints().to_vec(),
        answers: sender.answers().to_vec(),
        swap,
    };
    Ok((SetPair::from_positions(omega_a, &x0, &x1), view))
}

/// A message padded with parity-extractor output; one public seed per bit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedMessage {
    pub seeds: Vec<Gf2Vec>,
    pub body: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncodedPair {
    pub first: EncodedMessage,
    pub second: EncodedMessage,
}

fn pad_bit(seed: &Gf2Vec, key: &Gf2Vec) -> bool {
    seed.dot(key)
}

pub fn encode_message<R: Rng + ?Sized>(m: &OtMessage, key: &Gf2Vec, rng: &mut R) -> EncodedMessage {
    let seeds: Vec<Gf2Vec> = (0..m.len() * 8).map(|_| Gf2Vec::random(key.len(), rng)).collect();
    let mut body = m.0.clone();
    for (t, seed) in seeds.iter().enumerate() {
        if pad_bit(seed, key) {
            body[t / 8] ^= 1 << (t % 8);
        }
    }
    EncodedMessage { seeds, body }
}

pub fn decode_message(e: &EncodedMessage, key: &Gf2Vec) -> OtMessage {
    let mut body = e.body.clone();
    for (t, seed) in e.seeds.iter().enumerate() {
        if pad_bit(seed, key) {
            body[t / 8] ^= 1 << (t % 8);
        }
    }
    OtMessage(body)
}

/// Tape bits at `set`, all of which must be stored.
pub fn key_for(stored: &StoredBits, set: &[u64]) -> Result<Gf2Vec, OtError> {
    let bits: Option<Vec<bool>> = stored.bits_at(set).into_iter().collect();
    bits.map(|b| Gf2Vec::from_bools(&b))
        .ok_or_else(|| OtError::Sequence("key bits not stored".into()))
}

pub fn encode_pair<R: Rng + ?Sized>(
    m0: &OtMessage,
    m1: &OtMessage,
    pair: &SetPair,
    alice: &StoredBits,
    rng: &mut R,
) -> Result<EncodedPair, OtError> {
    if m0.len() != m1.len() {
        return Err(OtError::LengthMismatch(m0.len(), m1.len()));
    }
    Ok(EncodedPair {
        first: encode_message(m0, &key_for(alice, &pair.x0)?, rng),
        second: encode_message(m1, &key_for(alice, &pair.x1)?, rng),
    })
}

pub fn decode_choice(
    encoded: &EncodedPair,
    pair: &SetPair,
    bob: &StoredBits,
    choice: bool,
) -> Result<OtMessage, OtError> {
    let key = key_for(bob, pair.get(choice))?;
    let e = if choice { &encoded.second } else { &encoded.first };
    Ok(decode_message(e, &key))
}

/// Encodes both messages and lets the receiver decode its choice.
pub fn bs_transfer<R: Rng + ?Sized>(
    m0: &OtMessage,
    m1: &OtMessage,
    pair: &SetPair,
    alice: &StoredBits,
    bob: &StoredBits,
    choice: bool,
    rng: &mut R,
) -> Result<OtMessage, OtError> {
    let encoded = encode_pair(m0, m1, pair, alice, rng)?;
    decode_choice(&encoded, pair, bob, choice)
}

/// In-process bounded-storage 1-of-2 backend.
#[derive(Debug)]
pub struct BoundedStorageOt {
    params: BsOtParams,
    sender_rng: ChaCha20Rng,
    receiver_rng: ChaCha20Rng,
    view: Vec<SenderEvent>,
}

impl BoundedStorageOt {
    pub fn new(params: BsOtParams, seed: u64) -> Self {
        let tree = SeedTree::new(seed);
        Self::with_rngs(params, tree.stream("ot-sender", 0), tree.stream("ot-receiver", 0))
    }

    pub fn with_rngs(params: BsOtParams, sender_rng: ChaCha20Rng, receiver_rng: ChaCha20Rng) -> Self {
        BoundedStorageOt {
            params,
            sender_rng,
            receiver_rng,
            view: Vec::new(),
        }
    }

    pub fn params(&self) -> &BsOtParams {
        &self.params
    }
}

impl Ot2Backend for BoundedStorageOt {
    fn transfer(&mut self, m0: &OtMessage, m1: &OtMessage, choice: bool) -> Result<OtMessage, OtError> {
        if m0.len() != m1.len() {
            return Err(OtError::LengthMismatch(m0.len(), m1.len()));
        }
        for attempt in 0..MAX_ATTEMPTS {
            let phase1 = bs_phase1(&self.params, &mut self.sender_rng, &mut self.receiver_rng)?;
            let result = bs_setpair(
                phase1.alice.indices(),
                &phase1.bob,
                choice,
                self.params.k,
                &mut self.sender_rng,
                &mut self.receiver_rng,
            );
            match result {
                Err(OtError::InsufficientIntersection) => continue,
                Err(e) => return Err(e),
                Ok((pair, mut view)) => {
                    view.restarts = attempt;
                    let out = bs_transfer(m0, m1, &pair, &phase1.alice, &phase1.bob, choice, &mut self.sender_rng)?;
                    self.view.push(SenderEvent::BoundedStorage(view));
                    return Ok(out);
                }
            }
        }
        Err(OtError::RetriesExhausted(MAX_ATTEMPTS))
    }

    fn sender_view(&self) -> &[SenderEvent] {
        &self.view
    }
}

/// Weighted distribution of the sender's interactive-hashing view: the
/// answers plus swap bit, or `None` when the receiver has to restart.
pub type ViewDistribution = HashMap<Option<(Vec<bool>, bool)>, u64>;

/// Enumerates every receiver tape on a `tape_len`-bit tape (each `n`-subset
/// `Omega_B` and every per-block pick) against a fixed sender tape, `Omega_A`
/// and constraint sequence, and returns the sender-view distribution for
/// choice bits 0 and 1. Weights are exact integers.
pub fn exhaustive_sender_views(
    tape_len: u64,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<[ViewDistribution; 2], OtError> {
    if tape_len > 24 || n as u64 > tape_len {
        return Err(OtError::Params(format!("tape of {tape_len} bits with n = {n} is not enumerable")));
    }
    let mut srng = test_rng(seed);
    let tape = TapeSource::new(tape_len)
        .next_chunk(&mut srng)
        .ok_or_else(|| OtError::Params("empty tape".into()))?;
    let mut alice = StoredBits::choose(tape_len, n as u64, tape_len, &mut srng);
    alice.absorb(&tape)?;
    let omega_a = alice.indices().to_vec();
    let layout = IhLayout::new(n, k)?;
    let size = layout.block_size();

    // Constraints do not depend on the answers; fix them once.
    let mut sender = IhSender::new(layout);
    let mut constraints = Vec::new();
    while let Some(h) = sender.next_constraint(&mut srng)? {
        constraints.push(h);
        sender.record_answer(false)?;
    }

    let lcm = (1..=size as u64).fold(1u64, |acc, v| acc / gcd(acc, v) * v);
    let scale = lcm.pow(k as u32);
    let mut dists: [ViewDistribution; 2] = Default::default();
    for mask in 0u32..(1 << tape_len) {
        if mask.count_ones() as usize != n {
            continue;
        }
        let indices: Vec<u64> = (0..tape_len).filter(|i| mask >> i & 1 == 1).collect();
        let mut bob = StoredBits::with_indices(indices, tape_len);
        bob.absorb(&tape)?;
        let held: Vec<Vec<usize>> = (0..k)
            .map(|blk| {
                (0..size)
                    .filter(|off| bob.bit_at(omega_a[blk * size + off]).is_some())
                    .collect()
            })
            .collect();
        if held.iter().any(Vec::is_empty) {
            for dist in dists.iter_mut() {
                *dist.entry(None).or_default() += scale;
            }
            continue;
        }
        let weight = scale / held.iter().map(|h| h.len() as u64).product::<u64>();
        let mut picks = vec![0usize; k];
        loop {
            let mut encoding = Gf2Vec::zeros(layout.encoding_bits());
            for (blk, &p) in picks.iter().enumerate() {
                layout.encode_into(&mut encoding, blk, held[blk][p]);
            }
            for (b, dist) in dists.iter_mut().enumerate() {
                let mut r = IhReceiver {
                    layout,
                    choice: b == 1,
                    encoding: encoding.clone(),
                    constraints: Vec::new(),
                    answers: Vec::new(),
                };
                let answers = constraints.iter().map(|h| r.answer(h)).collect::<Result<Vec<_>, _>>()?;
                let swap = r.swap_bit()?;
                *dist.entry(Some((answers, swap))).or_default() += weight;
            }
            // odometer over the per-block picks
            let mut blk = 0;
            while blk < k {
                picks[blk] += 1;
                if picks[blk] < held[blk].len() {
                    break;
                }
                picks[blk] = 0;
                blk += 1;
            }
            if blk == k {
                break;
            }
        }
    }
    Ok(dists)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Seeded generator for tests and tools that need a throwaway stream.
pub fn test_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_params() -> BsOtParams {
        BsOtParams::new(1 << 12, 2.0, 64, 6).unwrap()
    }

    #[test]
    fn stored_size_formula() {
        // sqrt(2 * 16 * 4096) = sqrt(131072) = 362.04
        assert_eq!(stored_bits(16, 4096), 363);
        assert_eq!(stored_bits(8, 2), 6);
        assert_eq!(stored_bits(8, 8), 12);
        let desk = BsOtParams::desk();
        assert_eq!(desk.storage_bound, 65_536);
        assert_eq!(desk.stored, 8192);
        assert!(desk.tape_len as f64 > 2.0 * 65_536.0);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(BsOtParams::new(1 << 12, 1.0, 64, 4).is_err());
        assert!(BsOtParams::new(1 << 12, 2.0, 4, 4).is_err());
        // n = ceil(sqrt(2 * 64 * 16)) = 46 > N = 16
        assert!(BsOtParams::new(16, 2.0, 64, 2).is_err());
        assert!(BsOtParams::new(1 << 12, 2.0, 64, 1000).is_err());
    }

    #[test]
    fn gf2_vec_bytes_round_trip() {
        let mut rng = test_rng(1);
        for len in [1, 7, 8, 63, 64, 65, 280] {
            let v = Gf2Vec::random(len, &mut rng);
            assert_eq!(Gf2Vec::from_bytes(len, &v.to_bytes()).unwrap(), v);
        }
        assert!(Gf2Vec::from_bytes(3, &[0xff]).is_err());
    }

    #[test]
    fn stored_bits_match_tape() {
        let params = small_params();
        let mut tape = Vec::new();
        let p1 = bs_phase1_observed(&params, &mut test_rng(2), &mut test_rng(3), |c| {
            tape.extend((c.offset..c.offset + c.len).map(|i| c.bit(i)))
        })
        .unwrap();
        assert_eq!(tape.len() as u64, params.tape_len);
        for party in [&p1.alice, &p1.bob] {
            assert_eq!(party.indices().len() as u64, params.stored);
            assert_eq!(party.stored_bits(), params.stored);
            for &i in party.indices() {
                assert_eq!(party.bit_at(i), Some(tape[i as usize]));
            }
        }
    }

    #[test]
    fn intersection_mean_is_hypergeometric() {
        let params = small_params();
        let (n, k) = (params.stored as f64, params.tape_len as f64);
        let mean = n * n / k;
        let var = n * (n / k) * (1.0 - n / k) * (k - n) / (k - 1.0);
        let runs = 200;
        let mut rng_a = test_rng(10);
        let mut rng_b = test_rng(11);
        let total: usize = (0..runs)
            .map(|_| {
                let p1 = bs_phase1(&params, &mut rng_a, &mut rng_b).unwrap();
                p1.alice
                    .indices()
                    .iter()
                    .filter(|&&i| p1.bob.bit_at(i).is_some())
                    .count()
            })
            .sum();
        let observed = total as f64 / runs as f64;
        assert!((observed - mean).abs() <= 3.0 * (var / runs as f64).sqrt(), "{observed} vs {mean}");
    }

    #[test]
    fn chosen_positions_are_distinct_sorted_and_uniform() {
        let mut rng = test_rng(50);
        let (len, count) = (64u64, 8u64);
        let mut hits = [0u32; 64];
        for _ in 0..4000 {
            let st = StoredBits::choose(len, count, len, &mut rng);
            assert_eq!(st.indices().len(), count as usize);
            assert!(st.indices().windows(2).all(|w| w[0] < w[1]));
            for &i in st.indices() {
                hits[i as usize] += 1;
            }
        }
        // expected 500 per position, sd about 21
        assert!(hits.iter().all(|&h| (400..=600).contains(&h)), "{hits:?}");
        let dense = StoredBits::choose(10, 9, 10, &mut rng);
        assert_eq!(dense.indices().len(), 9);
        assert!(dense.indices().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn storage_meter_enforces_bound() {
        let mut bits = StoredBits::with_indices((0..10).collect(), 5);
        let chunk = TapeSource::new(16).next_chunk(&mut test_rng(0)).unwrap();
        assert_eq!(
            bits.absorb(&chunk),
            Err(OtError::StorageExceeded { used: 10, bound: 5 })
        );
    }

    #[test]
    fn honest_setpair_contract() {
        let params = small_params();
        let mut srng = test_rng(20);
        let mut rrng = test_rng(21);
        let mut done = 0;
        while done < 30 {
            let p1 = bs_phase1(&params, &mut srng, &mut rrng).unwrap();
            for b in [false, true] {
                match bs_setpair(p1.alice.indices(), &p1.bob, b, params.k, &mut srng, &mut rrng) {
                    Ok((pair, _)) => {
                        assert_eq!(pair.x0.len(), pair.x1.len());
                        assert_eq!(pair.x0.len(), params.k);
                        for set in [&pair.x0, &pair.x1] {
                            assert!(set.iter().all(|i| p1.alice.bit_at(*i).is_some()));
                        }
                        assert!(pair.get(b).iter().all(|i| p1.bob.bit_at(*i).is_some()));
                        done += 1;
                    }
                    Err(OtError::InsufficientIntersection) => {}
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }

    #[test]
    fn receiver_rejects_unpivoted_constraint() {
        let layout = IhLayout::new(8, 2).unwrap();
        let omega_a: Vec<u64> = (0..8).collect();
        let bob = {
            let mut b = StoredBits::with_indices((0..8).collect(), 8);
            b.absorb(&TapeSource::new(8).next_chunk(&mut test_rng(0)).unwrap()).unwrap();
            b
        };
        let mut r = IhReceiver::new(layout, &omega_a, &bob, false, &mut test_rng(1)).unwrap();
        let mut bad = Gf2Vec::zeros(layout.encoding_bits());
        bad.set(2, true);
        assert!(r.answer(&bad).is_err());
        let mut s = IhSender::new(layout);
        assert!(s.record_answer(true).is_err());
    }

    #[test]
    fn interactive_hashing_receiver_privacy_exhaustive() {
        let [d0, d1] = exhaustive_sender_views(16, 8, 2, 30).unwrap();
        assert!(d0.len() > 4);
        assert_eq!(d0, d1);
    }

    #[test]
    fn transfer_recovers_choice() {
        let params = small_params();
        let f = crate::field::Field::prime(11).unwrap();
        let m0 = OtMessage::from_elements(&f, &[1, 2, 3]);
        let m1 = OtMessage::from_elements(&f, &[4, 5, 6]);
        for (seed, b) in [(0, false), (1, true), (2, false), (3, true)] {
            let mut ot = BoundedStorageOt::new(params.clone(), seed);
            let got = ot.transfer(&m0, &m1, b).unwrap();
            assert_eq!(got, if b { m1.clone() } else { m0.clone() });
        }
        let mut ot = BoundedStorageOt::new(params, 9);
        assert_eq!(ot.transfer(&m0, &m0, true).unwrap(), m0);
        assert!(ot.transfer(&m0, &OtMessage(vec![1]), true).is_err());
    }

    /// For each extractor output bit whose seed touches an unknown key bit,
    /// exactly half of the completions of the unknown bits decode correctly.
    #[test]
    fn missing_bits_leave_fair_coins() {
        let mut rng = test_rng(40);
        for trial in 0..20 {
            let k = 6;
            let key = Gf2Vec::random(k, &mut rng);
            let msg = OtMessage(vec![rng.gen(), rng.gen()]);
            let enc = encode_message(&msg, &key, &mut rng);
            let missing: Vec<usize> = (0..k).filter(|i| (trial + i) % 3 == 0).collect();
            let mut correct = vec![0u32; enc.seeds.len()];
            for guess in 0u32..(1 << missing.len()) {
                let mut k2 = key.clone();
                for (t, &pos) in missing.iter().enumerate() {
                    k2.set(pos, guess >> t & 1 == 1);
                }
                let dec = decode_message(&enc, &k2);
                for (t, c) in correct.iter_mut().enumerate() {
                    if (dec.0[t / 8] ^ msg.0[t / 8]) >> (t % 8) & 1 == 0 {
                        *c += 1;
                    }
                }
            }
            let total = 1u32 << missing.len();
            for (t, seed) in enc.seeds.iter().enumerate() {
                let touches = missing.iter().any(|&p| seed.get(p));
                let expected = if touches { total / 2 } else { total };
                assert_eq!(correct[t], expected, "bit {t}");
            }
        }
    }

    /// A receiver that guesses the unstored bits of `R_{X_{1-b}}` recovers the
    /// other message at the rate predicted by the missing-bit analysis.
    #[test]
    fn other_message_recovery_matches_missing_bit_analysis() {
        let params = BsOtParams::new(64, 2.0, 8, 2).unwrap();
        let mut srng = test_rng(50);
        let mut rrng = test_rng(51);
        let mut guess_rng = test_rng(52);
        let (mut expected, mut variance, mut successes, mut runs) = (0.0f64, 0.0f64, 0u32, 0);
        while runs < 200 {
            let p1 = bs_phase1(&params, &mut srng, &mut rrng).unwrap();
            let b = runs % 2 == 0;
            let Ok((pair, _)) = bs_setpair(p1.alice.indices(), &p1.bob, b, params.k, &mut srng, &mut rrng)
            else {
                continue;
            };
            runs += 1;
            let m0 = OtMessage(vec![guess_rng.gen()]);
            let m1 = OtMessage(vec![guess_rng.gen()]);
            let enc = encode_pair(&m0, &m1, &pair, &p1.alice, &mut srng).unwrap();
            let other = pair.get(!b);
            let known = p1.bob.bits_at(other);
            let key = Gf2Vec::from_bools(
                &known.iter().map(|k| k.unwrap_or_else(|| guess_rng.gen())).collect::<Vec<_>>(),
            );
            let target = if b { &m0 } else { &m1 };
            let e = if b { &enc.first } else { &enc.second };
            if decode_message(e, &key) == *target {
                successes += 1;
            }
            let unknown: Vec<usize> = (0..other.len()).filter(|&i| known[i].is_none()).collect();
            // each output bit whose seed touches an unknown position is a fair coin,
            // but bits share the same guess; compute the exact success probability
            let mut ok = 0u32;
            for g in 0u32..(1 << unknown.len()) {
                let mut k2 = key.clone();
                for (t, &pos) in unknown.iter().enumerate() {
                    k2.set(pos, g >> t & 1 == 1);
                }
                ok += (decode_message(e, &k2) == *target) as u32;
            }
            let p = ok as f64 / (1u32 << unknown.len()) as f64;
            expected += p;
            variance += p * (1.0 - p);
        }
        assert!(
            (successes as f64 - expected).abs() <= 3.0 * variance.sqrt() + 1e-9,
            "{successes} vs {expected}"
        );
    }

    #[test]
    fn unchosen_set_mostly_unknown() {
        let params = small_params();
        let mut srng = test_rng(60);
        let mut rrng = test_rng(61);
        let mut runs = 0;
        while runs < 50 {
            let p1 = bs_phase1(&params, &mut srng, &mut rrng).unwrap();
            let Ok((pair, _)) = bs_setpair(p1.alice.indices(), &p1.bob, true, params.k, &mut srng, &mut rrng)
            else {
                continue;
            };
            runs += 1;
            let covered = pair.x0.iter().filter(|&&i| p1.bob.bit_at(i).is_some()).count();
            assert!(covered * 2 <= pair.x0.len() + 1, "covered {covered}");
        }
    }
}
