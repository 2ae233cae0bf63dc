//! Streaming randomness from a live trusted initializer.

use std::sync::mpsc;
use std::thread;

use log::debug;

use super::stream::{decode_block, encode_block, RandomnessStream, StreamHeader};
use super::{CorrelatedSource, Dealer, Request};
use crate::error::{Error, Result};
use crate::sharing::Role;
use crate::transport::{Channel, Frame, FrameBuf, MsgType};

/// Sends `role`'s half of `plan`, block by block, after a stream header.
pub fn serve_party<C: Channel + ?Sized>(
    mut dealer: Dealer,
    role: Role,
    plan: &[Request],
    ch: &mut C,
) -> Result<()> {
    let mut counts = [0u64; 5];
    for r in plan {
        counts[r.tag().index()] += 1;
    }
    let header = StreamHeader {
        ring_bits: dealer.ring_bits(),
        role,
        session_id: dealer.session_id(),
        commitment: dealer.commitment(),
        counts,
    };
    ch.send(FrameBuf::from(&Frame::new(MsgType::Randomness, header.to_bytes())))?;
    for req in plan {
        let [a, b] = dealer.generate(req)?;
        let words = if role.is_alice() { a } else { b };
        ch.send(FrameBuf::from(&Frame::new(
            MsgType::Randomness,
            encode_block(req, &words),
        )))?;
    }
    debug!("served {} blocks to {}", plan.len(), role.name());
    Ok(())
}

/// Receives blocks on a background thread and hands them out per tag.
pub struct RemoteSource {
    header: StreamHeader,
    buffered: RandomnessStream,
    rx: mpsc::Receiver<Result<(Request, Vec<u64>)>>,
    closed: bool,
}

impl RemoteSource {
    /// Reads the stream header, then starts the reader thread.
    pub fn start<C: Channel + 'static>(mut ch: C) -> Result<RemoteSource> {
        let first = ch.recv()?.expect(MsgType::Randomness)?;
        let (header, _) = StreamHeader::from_bytes(&first.payload)?;
        let (tx, rx) = mpsc::sync_channel(256);
        thread::Builder::new()
            .name("randomness-reader".into())
            .spawn(move || loop {
                let item = ch.recv().and_then(|f| {
                    let f = f.expect(MsgType::Randomness)?;
                    let (req, words, used) = decode_block(&f.payload)?;
                    if used != f.payload.len() {
                        return Err(Error::format("randomness frame has trailing bytes"));
                    }
                    Ok((req, words))
                });
                let stop = item.is_err();
                if matches!(item, Err(Error::Disconnected)) || tx.send(item).is_err() || stop {
                    break;
                }
            })
            .map_err(Error::Transport)?;
        Ok(RemoteSource {
            buffered: RandomnessStream::new(header.clone()),
            header,
            rx,
            closed: false,
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }
}

impl CorrelatedSource for RemoteSource {
    fn fetch(&mut self, req: &Request) -> Result<Vec<u64>> {
        loop {
            if let Some(r) = self.buffered.pop(req) {
                return r;
            }
            if self.closed {
                return Err(Error::RandomnessUnderflow {
                    tag: req.tag().name(),
                });
            }
            match self.rx.recv() {
                Ok(Ok((r, words))) => self.buffered.push(r, words),
                Ok(Err(e)) => return Err(e),
                Err(_) => self.closed = true,
            }
        }
    }
}
