//! Frame transports and transcript recording.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::path::Path;
use std::sync::mpsc::{channel, Receiver, Sender};

use crate::wire::{Frame, Tag, WireError};

pub trait Transport {
    fn send(&mut self, frame: &Frame) -> Result<(), WireError>;
    fn recv(&mut self) -> Result<Frame, WireError>;
}

impl<T: Transport + ?Sized> Transport for &mut T {
    fn send(&mut self, frame: &Frame) -> Result<(), WireError> {
        (**self).send(frame)
    }

    fn recv(&mut self) -> Result<Frame, WireError> {
        (**self).recv()
    }
}

/// One end of an in-process channel pair.
#[derive(Debug)]
pub struct DuplexEnd {
    tx: Sender<Frame>,
    rx: Receiver<Frame>,
}

pub fn duplex() -> (DuplexEnd, DuplexEnd) {
    let (a_tx, b_rx) = channel();
    let (b_tx, a_rx) = channel();
    (DuplexEnd { tx: a_tx, rx: a_rx }, DuplexEnd { tx: b_tx, rx: b_rx })
}

impl Transport for DuplexEnd {
    fn send(&mut self, frame: &Frame) -> Result<(), WireError> {
        self.tx.send(frame.clone()).map_err(|_| WireError::Closed)
    }

    fn recv(&mut self) -> Result<Frame, WireError> {
        self.rx.recv().map_err(|_| WireError::Closed)
    }
}

/// Frames over a byte stream, typically TCP.
#[derive(Debug)]
pub struct StreamTransport<R: Read, W: Write> {
    reader: BufReader<R>,
    writer: BufWriter<W>,
}

impl<R: Read, W: Write> StreamTransport<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        StreamTransport {
            reader: BufReader::new(reader),
            writer: BufWriter::new(writer),
        }
    }
}

pub type TcpTransport = StreamTransport<TcpStream, TcpStream>;

impl TcpTransport {
    pub fn from_stream(stream: TcpStream) -> io::Result<Self> {
        // interactive hashing is a long run of one-bit round trips
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        Ok(StreamTransport::new(reader, stream))
    }

    pub fn connect<A: ToSocketAddrs>(addr: A) -> io::Result<Self> {
        Self::from_stream(TcpStream::connect(addr)?)
    }

    pub fn accept(listener: &TcpListener) -> io::Result<Self> {
        Self::from_stream(listener.accept()?.0)
    }
}

impl<R: Read, W: Write> Transport for StreamTransport<R, W> {
    fn send(&mut self, frame: &Frame) -> Result<(), WireError> {
        frame.write_to(&mut self.writer)
    }

    fn recv(&mut self) -> Result<Frame, WireError> {
        Frame::read_from(&mut self.reader)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexEntry {
    pub offset: u64,
    pub tag: Tag,
    pub len: u32,
}

/// Every frame seen by one endpoint, in order, as concatenated wire bytes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Transcript {
    bytes: Vec<u8>,
    index: Vec<IndexEntry>,
}

impl Transcript {
    pub fn push(&mut self, frame: &Frame) {
        self.index.push(IndexEntry {
            offset: self.bytes.len() as u64,
            tag: frame.tag,
            len: frame.payload.len() as u32,
        });
        self.bytes.extend_from_slice(&frame.to_bytes());
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn index(&self) -> &[IndexEntry] {
        &self.index
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// One `offset tag length` line per frame.
    pub fn index_text(&self) -> String {
        let mut out = String::new();
        for e in &self.index {
            writeln!(out, "{} {} {}", e.offset, e.tag, e.len).expect("writing to a String");
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WireError> {
        let mut t = Transcript::default();
        let mut pos = 0;
        while pos < bytes.len() {
            let (frame, used) = Frame::decode(&bytes[pos..])?;
            t.push(&frame);
            pos += used;
        }
        Ok(t)
    }

    pub fn frames(&self) -> Vec<Frame> {
        self.index
            .iter()
            .map(|e| {
                let start = e.offset as usize + 5;
                Frame::new(e.tag, self.bytes[start..start + e.len as usize].to_vec())
            })
            .collect()
    }

    pub fn write_files(&self, bin: &Path, index: &Path) -> io::Result<()> {
        std::fs::write(bin, &self.bytes)?;
        std::fs::write(index, self.index_text())
    }
}

/// Wraps a transport and records both directions.
#[derive(Debug)]
pub struct Recorder<T> {
    inner: T,
    transcript: Transcript,
}

impl<T: Transport> Recorder<T> {
    pub fn new(inner: T) -> Self {
        Recorder {
            inner,
            transcript: Transcript::default(),
        }
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }
}

impl<T: Transport> Transport for Recorder<T> {
    fn send(&mut self, frame: &Frame) -> Result<(), WireError> {
        self.transcript.push(frame);
        self.inner.send(frame)
    }

    fn recv(&mut self) -> Result<Frame, WireError> {
        let frame = self.inner.recv()?;
        self.transcript.push(&frame);
        Ok(frame)
    }
}

/// Plays a recorded transcript back to one role: received frames come from
/// the recording and every sent frame must equal the recorded one.
#[derive(Debug)]
pub struct ReplayTransport {
    frames: VecDeque<Frame>,
    position: usize,
}

impl ReplayTransport {
    pub fn new(transcript: &Transcript) -> Self {
        ReplayTransport {
            frames: transcript.frames().into(),
            position: 0,
        }
    }

    pub fn is_exhausted(&self) -> bool {
        self.frames.is_empty()
    }

    fn next(&mut self) -> Result<Frame, WireError> {
        self.position += 1;
        self.frames.pop_front().ok_or(WireError::Closed)
    }
}

impl Transport for ReplayTransport {
    fn send(&mut self, frame: &Frame) -> Result<(), WireError> {
        let expected = self.next()?;
        if &expected != frame {
            return Err(WireError::Replay(format!(
                "frame {} differs: recorded {}, sent {}",
                self.position - 1,
                expected.tag,
                frame.tag
            )));
        }
        Ok(())
    }

    fn recv(&mut self) -> Result<Frame, WireError> {
        self.next()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(tag: Tag, n: u8) -> Frame {
        Frame::new(tag, vec![n; n as usize])
    }

    #[test]
    fn duplex_is_bidirectional() {
        let (mut a, mut b) = duplex();
        a.send(&frame(Tag::Negotiate, 3)).unwrap();
        b.send(&frame(Tag::SetAgree, 1)).unwrap();
        assert_eq!(b.recv().unwrap(), frame(Tag::Negotiate, 3));
        assert_eq!(a.recv().unwrap(), frame(Tag::SetAgree, 1));
        drop(b);
        assert!(matches!(a.recv(), Err(WireError::Closed)));
    }

    #[test]
    fn stream_transport_round_trip() {
        let mut buf = Vec::new();
        {
            let mut t = StreamTransport::new(io::empty(), &mut buf);
            t.send(&frame(Tag::TapeChunk, 4)).unwrap();
            t.send(&frame(Tag::CommitDone, 0)).unwrap();
        }
        let mut t = StreamTransport::new(&buf[..], io::sink());
        assert_eq!(t.recv().unwrap(), frame(Tag::TapeChunk, 4));
        assert_eq!(t.recv().unwrap(), frame(Tag::CommitDone, 0));
        assert!(matches!(t.recv(), Err(WireError::Closed)));
    }

    #[test]
    fn transcript_index_and_parse() {
        let (a, mut b) = duplex();
        let mut rec = Recorder::new(a);
        rec.send(&frame(Tag::Negotiate, 2)).unwrap();
        b.send(&frame(Tag::SetAgree, 3)).unwrap();
        rec.recv().unwrap();
        let t = rec.into_transcript();
        assert_eq!(t.index_text(), "0 NEGOTIATE 2\n7 SET_AGREE 3\n");
        let parsed = Transcript::from_bytes(t.bytes()).unwrap();
        assert_eq!(parsed, t);
        assert_eq!(parsed.frames(), vec![frame(Tag::Negotiate, 2), frame(Tag::SetAgree, 3)]);
    }

    #[test]
    fn replay_checks_sent_frames() {
        let mut t = Transcript::default();
        t.push(&frame(Tag::Negotiate, 1));
        t.push(&frame(Tag::SetAgree, 2));
        let mut r = ReplayTransport::new(&t);
        r.send(&frame(Tag::Negotiate, 1)).unwrap();
        assert_eq!(r.recv().unwrap(), frame(Tag::SetAgree, 2));
        assert!(r.is_exhausted());
        let mut r = ReplayTransport::new(&t);
        assert!(matches!(r.send(&frame(Tag::Negotiate, 3)), Err(WireError::Replay(_))));
    }
}
