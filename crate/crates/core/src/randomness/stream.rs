//! Per-party queues of pre-generated randomness and their file format.
//!
//! Layout (little-endian): magic `CRN1`, `u32` ring bits, `u32` role,
//! `u64` session id, 32-byte seed commitment, `u32` tag count, then per tag
//! `u32` tag and `u64` block count. Blocks follow grouped by tag, each as
//! `u32` tag, three `u64` dimensions, `u64` word count and the words.

use std::collections::VecDeque;
use std::path::Path;

use super::{CorrelatedSource, Dealer, Request, Tag};
use crate::error::{Error, Result};
use crate::sharing::Role;

const MAGIC: [u8; 4] = *b"CRN1";
const BLOCK_HEADER_LEN: usize = 4 + 3 * 8 + 8;
/// Widest decomposition a composition-network block may describe.
const MAX_NETWORK_BITS: u64 = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StreamHeader {
    pub ring_bits: u32,
    pub role: Role,
    pub session_id: u64,
    pub commitment: [u8; 32],
    /// Blocks per tag, indexed by [`Tag::index`].
    pub counts: [u64; 5],
}

impl StreamHeader {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(56 + 12 * 5);
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&self.ring_bits.to_le_bytes());
        out.extend_from_slice(&(self.role.index() as u32).to_le_bytes());
        out.extend_from_slice(&self.session_id.to_le_bytes());
        out.extend_from_slice(&self.commitment);
        out.extend_from_slice(&(Tag::ALL.len() as u32).to_le_bytes());
        for t in Tag::ALL {
            out.extend_from_slice(&(t as u32).to_le_bytes());
            out.extend_from_slice(&self.counts[t.index()].to_le_bytes());
        }
        out
    }

    /// Parses a header from the front of `bytes`, returning it and its length.
    pub fn from_bytes(bytes: &[u8]) -> Result<(StreamHeader, usize)> {
        let mut r = Cursor::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::format("randomness file: bad magic"));
        }
        let ring_bits = r.u32()?;
        let role = Role::from_index(r.u32()? as usize)
            .ok_or_else(|| Error::format("randomness file: bad role"))?;
        let session_id = r.u64()?;
        let commitment: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let ntags = r.u32()?;
        if ntags as usize > Tag::ALL.len() {
            return Err(Error::format(format!("randomness file: {ntags} tags")));
        }
        let mut counts = [0u64; 5];
        for _ in 0..ntags {
            let tag = Tag::from_u32(r.u32()?)?;
            counts[tag.index()] = r.u64()?;
        }
        Ok((
            StreamHeader {
                ring_bits,
                role,
                session_id,
                commitment,
                counts,
            },
            r.pos,
        ))
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format("randomness data truncated"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub(crate) fn encode_block(req: &Request, words: &[u64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(BLOCK_HEADER_LEN + 8 * words.len());
    out.extend_from_slice(&(req.tag() as u32).to_le_bytes());
    for d in req.dims() {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out.extend_from_slice(&(words.len() as u64).to_le_bytes());
    for w in words {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

/// Parses one block from the front of `bytes`; returns it and its encoded length.
pub(crate) fn decode_block(bytes: &[u8]) -> Result<(Request, Vec<u64>, usize)> {
    let mut r = Cursor::new(bytes);
    let tag = Tag::from_u32(r.u32()?)?;
    let dims = [r.u64()?, r.u64()?, r.u64()?];
    if tag == Tag::ComposeNet && !(2..=MAX_NETWORK_BITS).contains(&dims[0]) {
        return Err(Error::format(format!(
            "randomness block: network over {} bits",
            dims[0]
        )));
    }
    let req = Request::from_parts(tag, dims);
    let n = r.u64()?;
    if n > ((bytes.len() - r.pos) / 8) as u64 {
        return Err(Error::format("randomness block truncated"));
    }
    let expected = req.word_len()?;
    if n as usize != expected {
        return Err(Error::format(format!(
            "randomness block for {req:?} holds {n} words, expected {expected}"
        )));
    }
    let words = r
        .take(8 * n as usize)?
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok((req, words, r.pos))
}

/// One party's queues of correlated randomness, consumed FIFO per tag.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RandomnessStream {
    header: StreamHeader,
    queues: [VecDeque<(Request, Vec<u64>)>; 5],
}

impl RandomnessStream {
    pub fn new(header: StreamHeader) -> Self {
        RandomnessStream {
            header: StreamHeader {
                counts: [0; 5],
                ..header
            },
            queues: Default::default(),
        }
    }

    /// Generates both parties' streams for `plan`.
    pub fn generate(dealer: &mut Dealer, plan: &[Request]) -> Result<[RandomnessStream; 2]> {
        let mk = |role| {
            RandomnessStream::new(StreamHeader {
                ring_bits: dealer.ring_bits(),
                role,
                session_id: dealer.session_id(),
                commitment: dealer.commitment(),
                counts: [0; 5],
            })
        };
        let mut out = [mk(Role::A), mk(Role::B)];
        for req in plan {
            let [a, b] = dealer.generate(req)?;
            out[0].push(*req, a);
            out[1].push(*req, b);
        }
        Ok(out)
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    pub fn push(&mut self, req: Request, words: Vec<u64>) {
        let i = req.tag().index();
        self.header.counts[i] += 1;
        self.queues[i].push_back((req, words));
    }

    /// Blocks still queued for `tag`.
    pub fn remaining(&self, tag: Tag) -> usize {
        self.queues[tag.index()].len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header.to_bytes();
        for q in &self.queues {
            for (req, words) in q {
                out.extend_from_slice(&encode_block(req, words));
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (header, mut pos) = StreamHeader::from_bytes(bytes)?;
        let mut stream = RandomnessStream::new(header.clone());
        for t in Tag::ALL {
            for _ in 0..header.counts[t.index()] {
                let (req, words, used) = decode_block(&bytes[pos..])?;
                if req.tag() != t {
                    return Err(Error::format("randomness file: blocks out of tag order"));
                }
                pos += used;
                stream.push(req, words);
            }
        }
        if pos != bytes.len() {
            return Err(Error::format(format!(
                "randomness file: {} trailing bytes",
                bytes.len() - pos
            )));
        }
        Ok(stream)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        RandomnessStream::from_bytes(&std::fs::read(path)?)
    }

    pub(crate) fn pop(&mut self, req: &Request) -> Option<Result<Vec<u64>>> {
        let (got, words) = self.queues[req.tag().index()].pop_front()?;
        if got != *req {
            return Some(Err(Error::RandomnessMismatch {
                expected: format!("{req:?}"),
                found: format!("{got:?}"),
            }));
        }
        Some(Ok(words))
    }
}

impl CorrelatedSource for RandomnessStream {
    fn fetch(&mut self, req: &Request) -> Result<Vec<u64>> {
        self.pop(req).unwrap_or(Err(Error::RandomnessUnderflow {
            tag: req.tag().name(),
        }))
    }
}
