//! Framed session messages: `[length u32 BE][tag u8][payload]`, where the
//! length counts payload bytes only.

use std::fmt;
use std::io::{self, Read, Write};

use thiserror::Error;

use crate::codec::{DecodeError, Reader, Writer};
use crate::field::Field;
use crate::ot::bounded::{EncodedMessage, EncodedPair, Gf2Vec, TapeChunk};
use crate::s2pc::Eta;

/// Frames above this payload size are rejected before allocation.
pub const MAX_FRAME_LEN: u32 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Tag {
    Negotiate = 1,
    SetAgree = 2,
    S2pcBegin = 3,
    TapeChunk = 4,
    OmegaReveal = 5,
    IhRound = 6,
    EncodedPair = 7,
    CommitDone = 8,
    EvalReq = 9,
    EvalResp = 10,
    Verdict = 11,
    Abort = 12,
}

impl Tag {
    pub const ALL: [Tag; 12] = [
        Tag::Negotiate,
        Tag::SetAgree,
        Tag::S2pcBegin,
        Tag::TapeChunk,
        Tag::OmegaReveal,
        Tag::IhRound,
        Tag::EncodedPair,
        Tag::CommitDone,
        Tag::EvalReq,
        Tag::EvalResp,
        Tag::Verdict,
        Tag::Abort,
    ];

    pub fn from_u8(b: u8) -> Option<Tag> {
        Tag::ALL.get((b as usize).wrapping_sub(1)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Tag::Negotiate => "NEGOTIATE",
            Tag::SetAgree => "SET_AGREE",
            Tag::S2pcBegin => "S2PC_BEGIN",
            Tag::TapeChunk => "TAPE_CHUNK",
            Tag::OmegaReveal => "OMEGA_REVEAL",
            Tag::IhRound => "IH_ROUND",
            Tag::EncodedPair => "ENCODED_PAIR",
            Tag::CommitDone => "COMMIT_DONE",
            Tag::EvalReq => "EVAL_REQ",
            Tag::EvalResp => "EVAL_RESP",
            Tag::Verdict => "VERDICT",
            Tag::Abort => "ABORT",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("peer closed the channel")]
    Closed,
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(u32),
    #[error("unknown frame tag {0}")]
    UnknownTag(u8),
    #[error("malformed {tag} payload: {source}")]
    Payload { tag: Tag, source: DecodeError },
    #[error("replay diverged: {0}")]
    Replay(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub tag: Tag,
    pub payload: Vec<u8>,
}

impl Frame {
    pub fn new(tag: Tag, payload: Vec<u8>) -> Self {
        Frame { tag, payload }
    }

    pub fn encoded_len(&self) -> usize {
        5 + self.payload.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&(self.payload.len() as u32).to_be_bytes());
        out.push(self.tag as u8);
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes one frame from the front of `bytes`, returning it and the bytes used.
    pub fn decode(bytes: &[u8]) -> Result<(Frame, usize), WireError> {
        if bytes.len() < 5 {
            return Err(WireError::Io(io::ErrorKind::UnexpectedEof.into()));
        }
        let len = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes"));
        if len > MAX_FRAME_LEN {
            return Err(WireError::TooLarge(len));
        }
        let tag = Tag::from_u8(bytes[4]).ok_or(WireError::UnknownTag(bytes[4]))?;
        let end = 5 + len as usize;
        if bytes.len() < end {
            return Err(WireError::Io(io::ErrorKind::UnexpectedEof.into()));
        }
        Ok((Frame::new(tag, bytes[5..end].to_vec()), end))
    }

    pub fn write_to<W: Write + ?Sized>(&self, w: &mut W) -> Result<(), WireError> {
        w.write_all(&self.to_bytes())?;
        w.flush()?;
        Ok(())
    }

    /// Reads one frame; a clean end of stream before the header is [`WireError::Closed`].
    pub fn read_from<R: Read + ?Sized>(r: &mut R) -> Result<Frame, WireError> {
        let mut header = [0u8; 5];
        let mut got = 0;
        while got < header.len() {
            match r.read(&mut header[got..]) {
                Ok(0) if got == 0 => return Err(WireError::Closed),
                Ok(0) => return Err(WireError::Io(io::ErrorKind::UnexpectedEof.into())),
                Ok(n) => got += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let len = u32::from_be_bytes(header[..4].try_into().expect("4 bytes"));
        if len > MAX_FRAME_LEN {
            return Err(WireError::TooLarge(len));
        }
        let tag = Tag::from_u8(header[4]).ok_or(WireError::UnknownTag(header[4]))?;
        let mut payload = vec![0u8; len as usize];
        r.read_exact(&mut payload)?;
        Ok(Frame::new(tag, payload))
    }
}

/// Interactive-hashing traffic inside `IH_ROUND` frames.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum IhMsg {
    /// Sender: next pivoted constraint.
    Constraint(Gf2Vec),
    /// Receiver: the revealed positions leave every block populated.
    Start,
    /// Receiver: some block is empty, restart phase one.
    Retry,
    /// Receiver: inner product with its encoding.
    Answer(bool),
    /// Receiver: swap bit labelling its own candidate.
    Choose(bool),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RejectCode {
    Dimension = 1,
    GammaParity = 2,
    OmegaParity = 3,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalReply {
    Answer { v: Vec<u64>, u: Vec<u64> },
    Refused,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Negotiate { version: u16, digest: [u8; 32], xi: u64 },
    SetAgree { set: Vec<u64> },
    S2pcBegin { session: u32, eta: Eta },
    TapeChunk(TapeChunk),
    OmegaReveal(Vec<u64>),
    IhRound(IhMsg),
    EncodedPair(EncodedPair),
    CommitDone,
    /// `None` ends the evaluation phase.
    EvalReq(Option<u64>),
    EvalResp(EvalReply),
    Verdict { round: u32, reject: Option<RejectCode> },
    Abort { code: u8, reason: String },
}

fn put_gf2(w: &mut Writer, v: &Gf2Vec) {
    w.u32(v.len() as u32).raw(&v.to_bytes());
}

fn get_gf2(r: &mut Reader) -> Result<Gf2Vec, DecodeError> {
    let len = r.u32()? as usize;
    let bytes = r.take(len.div_ceil(8))?;
    Gf2Vec::from_bytes(len, bytes).map_err(|e| DecodeError::Invalid(e.to_string()))
}

fn put_encoded(w: &mut Writer, m: &EncodedMessage) {
    w.u32(m.seeds.len() as u32);
    for s in &m.seeds {
        put_gf2(w, s);
    }
    w.bytes(&m.body);
}

fn get_encoded(r: &mut Reader) -> Result<EncodedMessage, DecodeError> {
    let n = r.u32()? as usize;
    r.ensure(n.saturating_mul(4))?;
    let seeds = (0..n).map(|_| get_gf2(r)).collect::<Result<Vec<_>, _>>()?;
    let body = r.bytes()?.to_vec();
    if body.len() * 8 != seeds.len() {
        return Err(DecodeError::Invalid(format!("{} seeds for a {}-byte body", seeds.len(), body.len())));
    }
    Ok(EncodedMessage { seeds, body })
}

fn get_bool(r: &mut Reader) -> Result<bool, DecodeError> {
    match r.u8()? {
        0 => Ok(false),
        1 => Ok(true),
        b => Err(DecodeError::Invalid(format!("boolean byte {b}"))),
    }
}

impl Message {
    pub fn tag(&self) -> Tag {
        match self {
            Message::Negotiate { .. } => Tag::Negotiate,
            Message::SetAgree { .. } => Tag::SetAgree,
            Message::S2pcBegin { .. } => Tag::S2pcBegin,
            Message::TapeChunk(_) => Tag::TapeChunk,
            Message::OmegaReveal(_) => Tag::OmegaReveal,
            Message::IhRound(_) => Tag::IhRound,
            Message::EncodedPair(_) => Tag::EncodedPair,
            Message::CommitDone => Tag::CommitDone,
            Message::EvalReq(_) => Tag::EvalReq,
            Message::EvalResp(_) => Tag::EvalResp,
            Message::Verdict { .. } => Tag::Verdict,
            Message::Abort { .. } => Tag::Abort,
        }
    }

    pub fn to_frame(&self, field: &Field) -> Frame {
        let mut w = Writer::new();
        match self {
            Message::Negotiate { version, digest, xi } => {
                w.u16(*version).raw(digest).element(field, *xi);
            }
            Message::SetAgree { set } => {
                w.elements(field, set);
            }
            Message::S2pcBegin { session, eta } => {
                w.u32(*session).u8(eta.id());
            }
            Message::TapeChunk(c) => {
                w.u64(c.offset).u64(c.len).raw(&c.bytes);
            }
            Message::OmegaReveal(indices) => {
                w.u32(indices.len() as u32);
                for &i in indices {
                    w.u64(i);
                }
            }
            Message::IhRound(m) => match m {
                IhMsg::Constraint(h) => {
                    w.u8(0);
                    put_gf2(&mut w, h);
                }
                IhMsg::Start => {
                    w.u8(1);
                }
                IhMsg::Retry => {
                    w.u8(2);
                }
                IhMsg::Answer(b) => {
                    w.u8(3).u8(*b as u8);
                }
                IhMsg::Choose(b) => {
                    w.u8(4).u8(*b as u8);
                }
            },
            Message::EncodedPair(p) => {
                put_encoded(&mut w, &p.first);
                put_encoded(&mut w, &p.second);
            }
            Message::CommitDone => {}
            Message::EvalReq(x) => {
                if let Some(x) = x {
                    w.element(field, *x);
                }
            }
            Message::EvalResp(EvalReply::Answer { v, u }) => {
                w.u8(0).elements(field, v).elements(field, u);
            }
            Message::EvalResp(EvalReply::Refused) => {
                w.u8(1);
            }
            Message::Verdict { round, reject } => {
                w.u32(*round).u8(reject.map_or(0, |r| r as u8));
            }
            Message::Abort { code, reason } => {
                w.u8(*code).raw(reason.as_bytes());
            }
        }
        Frame::new(self.tag(), w.into_bytes())
    }

    pub fn from_frame(frame: &Frame, field: &Field) -> Result<Message, WireError> {
        Self::parse(frame, field).map_err(|source| WireError::Payload { tag: frame.tag, source })
    }

    fn parse(frame: &Frame, field: &Field) -> Result<Message, DecodeError> {
        let mut r = Reader::new(&frame.payload);
        let msg = match frame.tag {
            Tag::Negotiate => {
                let version = r.u16()?;
                let digest = r.take(32)?.try_into().expect("32 bytes");
                Message::Negotiate {
                    version,
                    digest,
                    xi: r.element(field)?,
                }
            }
            Tag::SetAgree => Message::SetAgree { set: r.elements(field)? },
            Tag::S2pcBegin => {
                let session = r.u32()?;
                let id = r.u8()?;
                let eta = Eta::from_id(id).ok_or_else(|| DecodeError::Invalid(format!("eta id {id}")))?;
                Message::S2pcBegin { session, eta }
            }
            Tag::TapeChunk => {
                let offset = r.u64()?;
                let len = r.u64()?;
                if len == 0 || len > crate::ot::bounded::TAPE_CHUNK_BITS {
                    return Err(DecodeError::Invalid(format!("tape chunk of {len} bits")));
                }
                let bytes = r.take(len.div_ceil(8) as usize)?.to_vec();
                Message::TapeChunk(TapeChunk { offset, len, bytes })
            }
            Tag::OmegaReveal => {
                let n = r.u32()? as usize;
                r.ensure(n.saturating_mul(8))?;
                Message::OmegaReveal((0..n).map(|_| r.u64()).collect::<Result<_, _>>()?)
            }
            Tag::IhRound => Message::IhRound(match r.u8()? {
                0 => IhMsg::Constraint(get_gf2(&mut r)?),
                1 => IhMsg::Start,
                2 => IhMsg::Retry,
                3 => IhMsg::Answer(get_bool(&mut r)?),
                4 => IhMsg::Choose(get_bool(&mut r)?),
                t => return Err(DecodeError::BadTag(t)),
            }),
            Tag::EncodedPair => Message::EncodedPair(EncodedPair {
                first: get_encoded(&mut r)?,
                second: get_encoded(&mut r)?,
            }),
            Tag::CommitDone => Message::CommitDone,
            Tag::EvalReq => Message::EvalReq(match r.remaining() {
                0 => None,
                _ => Some(r.element(field)?),
            }),
            Tag::EvalResp => Message::EvalResp(match r.u8()? {
                0 => EvalReply::Answer {
                    v: r.elements(field)?,
                    u: r.elements(field)?,
                },
                1 => EvalReply::Refused,
                t => return Err(DecodeError::BadTag(t)),
            }),
            Tag::Verdict => {
                let round = r.u32()?;
                let reject = match r.u8()? {
                    0 => None,
                    1 => Some(RejectCode::Dimension),
                    2 => Some(RejectCode::GammaParity),
                    3 => Some(RejectCode::OmegaParity),
                    t => return Err(DecodeError::BadTag(t)),
                };
                Message::Verdict { round, reject }
            }
            Tag::Abort => {
                let code = r.u8()?;
                let reason = String::from_utf8_lossy(r.take(r.remaining())?).into_owned();
                Message::Abort { code, reason }
            }
        };
        r.finish()?;
        Ok(msg)
    }
}
