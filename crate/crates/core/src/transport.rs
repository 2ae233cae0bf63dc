//! Message framing and the two-party channel.
//!
//! Wire layout of a frame: magic `MPC1`, one message-type byte, the payload
//! length as a little-endian `u64`, then the payload. Ring and bit payloads
//! are sequences of little-endian 64-bit words.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{Shutdown, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc;
use std::time::Duration;

use log::debug;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MPC1";
pub const HEADER_LEN: usize = 13;
/// Largest payload a peer may announce.
pub const MAX_PAYLOAD: u64 = 1 << 30;
pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    OpenRing = 1,
    OpenBits = 2,
    Reshare = 3,
    Control = 4,
    Randomness = 5,
}

impl MsgType {
    pub fn from_byte(b: u8) -> Result<Self> {
        Ok(match b {
            1 => MsgType::OpenRing,
            2 => MsgType::OpenBits,
            3 => MsgType::Reshare,
            4 => MsgType::Control,
            5 => MsgType::Randomness,
            other => return Err(Error::Frame(format!("unknown message type {other}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

/// Validates a frame header and returns the message type and payload length.
pub fn parse_header(h: &[u8]) -> Result<(MsgType, usize)> {
    if h.len() < HEADER_LEN {
        return Err(Error::Frame(format!("short header ({} bytes)", h.len())));
    }
    if h[..4] != MAGIC {
        return Err(Error::Frame(format!("bad magic {:?}", &h[..4])));
    }
    let t = MsgType::from_byte(h[4])?;
    let len = u64::from_le_bytes(h[5..13].try_into().expect("8 bytes"));
    if len > MAX_PAYLOAD {
        return Err(Error::Frame(format!("payload length {len} exceeds limit")));
    }
    Ok((t, len as usize))
}

impl Frame {
    pub fn new(msg_type: MsgType, payload: Vec<u8>) -> Self {
        Frame { msg_type, payload }
    }

    pub fn from_words(msg_type: MsgType, words: &[u64]) -> Self {
        let mut payload = Vec::with_capacity(words.len() * 8);
        for w in words {
            payload.extend_from_slice(&w.to_le_bytes());
        }
        Frame { msg_type, payload }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.push(self.msg_type as u8);
        out.extend_from_slice(&(self.payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes exactly one frame occupying all of `bytes`.
    pub fn decode(bytes: &[u8]) -> Result<Frame> {
        let (t, len) = parse_header(bytes)?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != len {
            return Err(Error::Frame(format!(
                "payload holds {} bytes, header announces {len}",
                body.len()
            )));
        }
        Ok(Frame::new(t, body.to_vec()))
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn words(&self) -> Result<Vec<u64>> {
        words_from_le(&self.payload)
    }

    pub fn expect(self, t: MsgType) -> Result<Frame> {
        if self.msg_type != t {
            return Err(Error::protocol(format!(
                "expected {t:?} frame, received {:?}",
                self.msg_type
            )));
        }
        Ok(self)
    }
}

pub fn words_from_le(bytes: &[u8]) -> Result<Vec<u64>> {
    if !bytes.len().is_multiple_of(8) {
        return Err(Error::Frame(format!(
            "payload of {} bytes is not word aligned",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}

/// An outbound frame whose payload words are written in place, behind a reserved header.
#[derive(Clone, Debug)]
pub struct FrameBuf {
    bytes: Vec<u8>,
}

impl FrameBuf {
    pub fn new(msg_type: MsgType, words: usize) -> Self {
        let mut bytes = vec![0u8; HEADER_LEN + 8 * words];
        bytes[..4].copy_from_slice(&MAGIC);
        bytes[4] = msg_type as u8;
        bytes[5..13].copy_from_slice(&((8 * words) as u64).to_le_bytes());
        FrameBuf { bytes }
    }

    pub fn msg_type(&self) -> MsgType {
        MsgType::from_byte(self.bytes[4]).expect("constructed with a valid type")
    }

    pub fn words(&self) -> usize {
        (self.bytes.len() - HEADER_LEN) / 8
    }

    #[inline]
    pub fn set(&mut self, i: usize, w: u64) {
        let at = HEADER_LEN + 8 * i;
        self.bytes[at..at + 8].copy_from_slice(&w.to_le_bytes());
    }

    pub fn get(&self, i: usize) -> u64 {
        let at = HEADER_LEN + 8 * i;
        u64::from_le_bytes(self.bytes[at..at + 8].try_into().expect("8 bytes"))
    }

    /// Payload bytes, word `i` at `8 * i`, for in-place (possibly parallel) fills.
    pub fn payload_mut(&mut self) -> &mut [u8] {
        &mut self.bytes[HEADER_LEN..]
    }

    pub fn payload(&self) -> &[u8] {
        &self.bytes[HEADER_LEN..]
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.bytes
    }
}

impl From<&Frame> for FrameBuf {
    fn from(f: &Frame) -> Self {
        FrameBuf { bytes: f.encode() }
    }
}

/// A reliable, ordered, full-duplex link to the peer.
pub trait Channel: Send {
    /// Sends one encoded frame.
    fn send(&mut self, frame: FrameBuf) -> Result<()>;

    fn recv(&mut self) -> Result<Frame>;

    /// Sends `frame` and receives the peer's frame of the same round.
    fn exchange(&mut self, frame: FrameBuf) -> Result<Frame> {
        self.send(frame)?;
        self.recv()
    }
}

impl<C: Channel + ?Sized> Channel for Box<C> {
    fn send(&mut self, frame: FrameBuf) -> Result<()> {
        (**self).send(frame)
    }

    fn recv(&mut self) -> Result<Frame> {
        (**self).recv()
    }

    fn exchange(&mut self, frame: FrameBuf) -> Result<Frame> {
        (**self).exchange(frame)
    }
}

/// In-memory channel end; frames cross as encoded bytes.
#[derive(Debug)]
pub struct LocalChannel {
    tx: mpsc::Sender<Vec<u8>>,
    rx: mpsc::Receiver<Vec<u8>>,
}

pub fn local_pair() -> (LocalChannel, LocalChannel) {
    let (tx_a, rx_b) = mpsc::channel();
    let (tx_b, rx_a) = mpsc::channel();
    (
        LocalChannel { tx: tx_a, rx: rx_a },
        LocalChannel { tx: tx_b, rx: rx_b },
    )
}

impl Channel for LocalChannel {
    fn send(&mut self, frame: FrameBuf) -> Result<()> {
        self.tx
            .send(frame.into_bytes())
            .map_err(|_| Error::Disconnected)
    }

    fn recv(&mut self) -> Result<Frame> {
        let bytes = self.rx.recv().map_err(|_| Error::Disconnected)?;
        Frame::decode(&bytes)
    }
}

/// Frames up to this size are written before reading; larger ones are
/// written from a helper thread so two peers never block on full buffers.
const INLINE_WRITE_LIMIT: usize = 32 * 1024;

#[derive(Debug)]
pub struct TcpChannel {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl TcpChannel {
    pub fn new(stream: TcpStream) -> Result<Self> {
        stream.set_nodelay(true)?;
        let writer = BufWriter::with_capacity(1 << 16, stream.try_clone()?);
        Ok(TcpChannel {
            reader: BufReader::with_capacity(1 << 16, stream),
            writer,
        })
    }

    pub fn connect<A: ToSocketAddrs>(addr: A) -> Result<Self> {
        TcpChannel::new(TcpStream::connect(addr)?)
    }

    /// Connects, retrying refused attempts until `patience` elapses.
    pub fn connect_with_patience<A: ToSocketAddrs + Clone>(addr: A, patience: Duration) -> Result<Self> {
        let start = std::time::Instant::now();
        loop {
            match TcpStream::connect(addr.clone()) {
                Ok(s) => return TcpChannel::new(s),
                Err(e) if start.elapsed() < patience => {
                    debug!("connect failed ({e}), retrying");
                    std::thread::sleep(Duration::from_millis(50));
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    pub fn accept(listener: &TcpListener) -> Result<Self> {
        let (stream, peer) = listener.accept()?;
        debug!("accepted connection from {peer}");
        TcpChannel::new(stream)
    }

    pub fn shutdown(&self) {
        let _ = self.reader.get_ref().shutdown(Shutdown::Both);
    }
}

fn read_frame<R: Read>(r: &mut R) -> Result<Frame> {
    let mut header = [0u8; HEADER_LEN];
    read_full(r, &mut header)?;
    let (t, len) = parse_header(&header)?;
    let mut payload = vec![0u8; len];
    read_full(r, &mut payload)?;
    Ok(Frame::new(t, payload))
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        io::ErrorKind::UnexpectedEof
        | io::ErrorKind::ConnectionReset
        | io::ErrorKind::ConnectionAborted
        | io::ErrorKind::BrokenPipe => Error::Disconnected,
        _ => Error::Transport(e),
    })
}

fn write_all<W: Write>(w: &mut W, bytes: &[u8]) -> Result<()> {
    w.write_all(bytes).and_then(|_| w.flush()).map_err(|e| match e.kind() {
        io::ErrorKind::ConnectionReset
        | io::ErrorKind::ConnectionAborted
        | io::ErrorKind::BrokenPipe => Error::Disconnected,
        _ => Error::Transport(e),
    })
}

impl Channel for TcpChannel {
    fn send(&mut self, frame: FrameBuf) -> Result<()> {
        write_all(&mut self.writer, &frame.into_bytes())
    }

    fn recv(&mut self) -> Result<Frame> {
        read_frame(&mut self.reader)
    }

    fn exchange(&mut self, frame: FrameBuf) -> Result<Frame> {
        if frame.len() <= INLINE_WRITE_LIMIT {
            self.send(frame)?;
            return self.recv();
        }
        let TcpChannel { reader, writer } = self;
        std::thread::scope(|s| {
            let sender = s.spawn(move || write_all(writer, &frame.into_bytes()));
            let received = read_frame(reader);
            let sent = sender.join().expect("writer thread panicked");
            sent?;
            received
        })
    }
}

/// Session parameters both peers must agree on before any share traffic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Hello {
    pub version: u32,
    pub ring_bits: u32,
    pub frac_bits: u32,
    pub int_bits: u32,
    pub rows: u64,
    pub cols: u64,
    pub iterations: u64,
    pub session_id: u64,
    pub commitment: [u8; 32],
}

const HELLO_LEN: usize = 4 * 4 + 8 * 4 + 32;

impl Hello {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HELLO_LEN);
        for v in [self.version, self.ring_bits, self.frac_bits, self.int_bits] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in [self.rows, self.cols, self.iterations, self.session_id] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.commitment);
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() != HELLO_LEN {
            return Err(Error::Handshake(format!("hello of {} bytes", b.len())));
        }
        let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().expect("4 bytes"));
        let u64_at = |i: usize| u64::from_le_bytes(b[i..i + 8].try_into().expect("8 bytes"));
        Ok(Hello {
            version: u32_at(0),
            ring_bits: u32_at(4),
            frac_bits: u32_at(8),
            int_bits: u32_at(12),
            rows: u64_at(16),
            cols: u64_at(24),
            iterations: u64_at(32),
            session_id: u64_at(40),
            commitment: b[48..80].try_into().expect("32 bytes"),
        })
    }

    /// Names every field on which the two hellos differ.
    pub fn check(&self, peer: &Hello) -> Result<()> {
        let mut diffs = Vec::new();
        macro_rules! cmp {
            ($($f:ident),*) => {$(
                if self.$f != peer.$f {
                    diffs.push(format!("{} {} vs {}", stringify!($f), self.$f, peer.$f));
                }
            )*};
        }
        cmp!(version, ring_bits, frac_bits, int_bits, rows, cols, iterations, session_id);
        if self.commitment != peer.commitment {
            diffs.push("randomness commitment".to_string());
        }
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(Error::Handshake(diffs.join(", ")))
        }
    }
}

/// Exchanges hellos and aborts on any disagreement.
pub fn handshake<C: Channel + ?Sized>(ch: &mut C, ours: &Hello) -> Result<Hello> {
    let frame = Frame::new(MsgType::Control, ours.to_bytes());
    let reply = ch.exchange(FrameBuf::from(&frame))?.expect(MsgType::Control)?;
    let theirs = Hello::from_bytes(&reply.payload)?;
    ours.check(&theirs)?;
    Ok(theirs)
}
