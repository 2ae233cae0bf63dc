//! Round-based two-party sessions and Beaver multiplication.
//!
//! A session owns the channel to the peer, this party's randomness source
//! and a transcript. Every multiplication call, however many products it
//! carries, is one round: both parties send their masked differences in one
//! frame and receive the peer's.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::bits::{word_count, PackedBits};
use crate::error::{Error, Result};
use crate::fixedpoint::{truncate_exact, truncate_share};
use crate::randomness::{
    self, labelled_rng, parse_bit_triples, parse_matrix_triple, parse_ring_triples, BitTriples,
    CorrelatedSource, Dealer, DealerSource, Request, RingTriples, Seed,
};
use crate::ring::Ring;
use crate::scalar::RingWord;
use crate::sharing::{Role, ShareMatrix};
use crate::transport::{local_pair, Channel, Frame, FrameBuf, MsgType};

/// Batches at least this long are masked and recombined on the worker pool.
const PAR_MIN: usize = 1 << 12;

/// Per-session traffic and work counters.
#[derive(Clone, Debug)]
pub struct Transcript {
    pub rounds: u64,
    pub bytes_sent: u64,
    pub bytes_received: u64,
    /// Scalar products over `Z_{2^λ}` (a matrix product counts `i * j * k`).
    pub ring_mults: u64,
    /// AND gates over `Z_2`.
    pub bit_mults: u64,
    /// Ring elements this party sent for opening.
    pub ring_words_opened: u64,
    /// Bits this party sent for opening.
    pub bits_opened: u64,
    hasher: Sha256,
}

impl Default for Transcript {
    fn default() -> Self {
        Transcript {
            rounds: 0,
            bytes_sent: 0,
            bytes_received: 0,
            ring_mults: 0,
            bit_mults: 0,
            ring_words_opened: 0,
            bits_opened: 0,
            hasher: Sha256::new(),
        }
    }
}

impl Transcript {
    pub fn secure_mults(&self) -> u64 {
        self.ring_mults + self.bit_mults
    }

    /// Hash over every round's frames, Alice's first; equal on both parties.
    pub fn digest(&self) -> [u8; 32] {
        self.hasher.clone().finalize().into()
    }

    pub fn digest_hex(&self) -> String {
        self.digest().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// How shares of a product are rescaled by `2^-a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TruncationMode {
    /// Each party truncates its own share; off by at most one unit, rarely wrong.
    #[default]
    Local,
    /// Opens the value and re-shares the exact floor. Reveals the secret; tests only.
    RevealExact,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceValue {
    Ring(Vec<u64>),
    Bits(PackedBits),
}

/// A labelled value captured while tracing: opened values are public,
/// everything else is this party's share.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub label: &'static str,
    pub value: TraceValue,
}

pub struct Session<W: RingWord> {
    role: Role,
    ring: Ring<W>,
    channel: Box<dyn Channel>,
    source: Box<dyn CorrelatedSource>,
    transcript: Transcript,
    rng: ChaCha20Rng,
    pool: Option<Arc<rayon::ThreadPool>>,
    truncation: TruncationMode,
    trace: Option<Vec<TraceEntry>>,
}

impl<W: RingWord> Session<W> {
    /// `local_seed` feeds this party's private randomness (re-sharing masks).
    pub fn new(
        role: Role,
        ring: Ring<W>,
        channel: Box<dyn Channel>,
        source: Box<dyn CorrelatedSource>,
        local_seed: Seed,
    ) -> Self {
        Session {
            role,
            ring,
            channel,
            source,
            transcript: Transcript::default(),
            rng: ChaCha20Rng::from_seed(local_seed),
            pool: None,
            truncation: TruncationMode::Local,
            trace: None,
        }
    }

    pub fn with_pool(mut self, pool: Arc<rayon::ThreadPool>) -> Self {
        self.pool = Some(pool);
        self
    }

    pub fn with_truncation(mut self, mode: TruncationMode) -> Self {
        self.truncation = mode;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn ring(&self) -> &Ring<W> {
        &self.ring
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn take_trace(&mut self) -> Vec<TraceEntry> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn tracing(&self) -> bool {
        self.trace.is_some()
    }

    pub(crate) fn record(&mut self, label: &'static str, value: impl FnOnce() -> TraceValue) {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEntry {
                label,
                value: value(),
            });
        }
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    pub(crate) fn fetch(&mut self, req: &Request) -> Result<Vec<u64>> {
        self.source.fetch(req)
    }

    pub(crate) fn count_bit_mults(&mut self, n: usize) {
        self.transcript.bit_mults += n as u64;
    }

    /// Runs `f` on the session's worker pool (or rayon's global pool).
    pub(crate) fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        match &self.pool {
            Some(p) => p.install(f),
            None => f(),
        }
    }

    /// One round: sends `out`, receives the peer's frame of the same type and size.
    pub(crate) fn exchange(&mut self, out: FrameBuf) -> Result<Vec<u64>> {
        let t = out.msg_type();
        let words = out.words();
        let sent = out.len() as u64;
        let ours: [u8; 32] = Sha256::digest(out.payload()).into();
        let frame = self.channel.exchange(out)?;
        let frame = frame.expect(t)?;
        let theirs: [u8; 32] = Sha256::digest(&frame.payload).into();
        let (first, second) = if self.role.is_alice() {
            (ours, theirs)
        } else {
            (theirs, ours)
        };
        self.transcript.hasher.update([t as u8]);
        self.transcript.hasher.update(first);
        self.transcript.hasher.update(second);
        self.transcript.rounds += 1;
        self.transcript.bytes_sent += sent;
        self.transcript.bytes_received += frame.encoded_len() as u64;
        let received = frame.words()?;
        if received.len() != words {
            return Err(Error::protocol(format!(
                "peer sent {} words, expected {words}",
                received.len()
            )));
        }
        Ok(received)
    }

    /// Sends control bytes outside the round accounting.
    pub fn send_control(&mut self, payload: Vec<u8>) -> Result<()> {
        self.channel
            .send(FrameBuf::from(&Frame::new(MsgType::Control, payload)))
    }

    pub fn recv_control(&mut self) -> Result<Vec<u8>> {
        Ok(self.channel.recv()?.expect(MsgType::Control)?.payload)
    }

    fn fill_ring(&self, buf: &mut FrameBuf, f: impl Fn(usize) -> W + Sync) {
        let n = buf.words();
        if n >= PAR_MIN {
            self.install(|| {
                buf.payload_mut()
                    .par_chunks_exact_mut(8)
                    .enumerate()
                    .for_each(|(i, slot)| slot.copy_from_slice(&f(i).to_word().to_le_bytes()));
            });
        } else {
            for i in 0..n {
                buf.set(i, f(i).to_word());
            }
        }
    }

    fn collect_ring(&self, n: usize, f: impl Fn(usize) -> W + Sync + Send) -> Vec<W> {
        if n >= PAR_MIN {
            self.install(|| (0..n).into_par_iter().map(&f).collect())
        } else {
            (0..n).map(f).collect()
        }
    }

    /// Masks with `(U, V)` in one round and returns the opened `D = x - U`, `E = y - V`.
    fn open_masked(&mut self, x: &[W], u: &[W], y: &[W], v: &[W]) -> Result<(Vec<W>, Vec<W>)> {
        let (nx, ny) = (x.len(), y.len());
        let ring = self.ring;
        let mut buf = FrameBuf::new(MsgType::OpenRing, nx + ny);
        self.fill_ring(&mut buf, |i| {
            if i < nx {
                ring.sub(x[i], u[i])
            } else {
                ring.sub(y[i - nx], v[i - nx])
            }
        });
        let ours: Vec<u64> = (0..nx + ny).map(|i| buf.get(i)).collect();
        let theirs = self.exchange(buf)?;
        self.transcript.ring_words_opened += (nx + ny) as u64;
        let opened: Vec<W> = ours
            .iter()
            .zip(&theirs)
            .map(|(&a, &b)| ring.add(W::from_word(a), ring.from_u64(b)))
            .collect();
        self.record("open", || {
            TraceValue::Ring(opened.iter().map(|w| w.to_word()).collect())
        });
        let e = opened[nx..].to_vec();
        let mut d = opened;
        d.truncate(nx);
        Ok((d, e))
    }

    /// Elementwise products of shared vectors with supplied triples.
    pub fn mul_with(&mut self, x: &[W], y: &[W], t: &RingTriples<W>) -> Result<Vec<W>> {
        if x.len() != y.len() || t.len() != x.len() {
            return Err(Error::Dimension(format!(
                "elementwise product of lengths {} and {} with {} triples",
                x.len(),
                y.len(),
                t.len()
            )));
        }
        let (d, e) = self.open_masked(x, &t.u, y, &t.v)?;
        let ring = self.ring;
        let alice = self.role.is_alice();
        let z = self.collect_ring(x.len(), |i| {
            let mut z = ring.add(t.w[i], ring.mul(d[i], t.v[i]));
            z = ring.add(z, ring.mul(t.u[i], e[i]));
            if alice {
                z = ring.add(z, ring.mul(d[i], e[i]));
            }
            z
        });
        self.transcript.ring_mults += x.len() as u64;
        Ok(z)
    }

    /// Batched elementwise products; one round for any length.
    pub fn batch_mul(&mut self, x: &[W], y: &[W]) -> Result<Vec<W>> {
        if x.len() != y.len() {
            return Err(Error::Dimension(format!(
                "elementwise product of lengths {} and {}",
                x.len(),
                y.len()
            )));
        }
        let n = x.len();
        let words = self.fetch(&Request::RingTriples { n })?;
        let t = parse_ring_triples(n, &words)?;
        self.mul_with(x, y, &t)
    }

    pub fn mul(&mut self, x: W, y: W) -> Result<W> {
        Ok(self.batch_mul(&[x], &[y])?[0])
    }

    /// Products using conversion triples (kept under their own tag).
    pub(crate) fn conversion_mul(&mut self, x: &[W], y: &[W]) -> Result<Vec<W>> {
        let n = x.len();
        let words = self.fetch(&Request::Conversion { n })?;
        let t = parse_ring_triples(n, &words)?;
        self.mul_with(x, y, &t)
    }

    pub fn matmul(&mut self, x: &ShareMatrix<W>, y: &ShareMatrix<W>) -> Result<ShareMatrix<W>> {
        if x.cols != y.rows || x.values.len() != x.rows * x.cols || y.values.len() != y.rows * y.cols {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                x.rows, x.cols, y.rows, y.cols
            )));
        }
        let z = self.matmul_raw(&x.values, &y.values, x.rows, x.cols, y.cols)?;
        ShareMatrix::new(self.role, x.rows, y.cols, z)
    }

    fn matmul_raw(&mut self, x: &[W], y: &[W], rows: usize, inner: usize, cols: usize) -> Result<Vec<W>> {
        let words = self.fetch(&Request::MatrixTriple { rows, inner, cols })?;
        let t = parse_matrix_triple::<W>(rows, inner, cols, &words)?;
        let (d, e) = self.open_masked(x, &t.u, y, &t.v)?;
        let ring = self.ring;
        let dv = randomness::ring_matmul(&d, &t.v, rows, inner, cols, &ring);
        let ue = randomness::ring_matmul(&t.u, &e, rows, inner, cols, &ring);
        let de = if self.role.is_alice() {
            randomness::ring_matmul(&d, &e, rows, inner, cols, &ring)
        } else {
            vec![W::zero(); rows * cols]
        };
        let z = (0..rows * cols)
            .map(|i| ring.add(ring.add(t.w[i], dv[i]), ring.add(ue[i], de[i])))
            .collect();
        self.transcript.ring_mults += (rows * inner * cols) as u64;
        Ok(z)
    }

    /// Shared inner product, carrying the doubled fractional precision of its inputs.
    pub fn inner_product(&mut self, w: &[W], x: &[W]) -> Result<W> {
        if w.len() != x.len() {
            return Err(Error::Dimension(format!(
                "inner product of lengths {} and {}",
                w.len(),
                x.len()
            )));
        }
        Ok(self.matmul_raw(w, x, 1, w.len(), 1)?[0])
    }

    /// Rescales shares by `2^-frac_bits`.
    pub fn truncate(&mut self, xs: &mut [W], frac_bits: u32) -> Result<()> {
        let ring = self.ring;
        match self.truncation {
            TruncationMode::Local => {
                let role = self.role;
                for x in xs.iter_mut() {
                    *x = truncate_share(*x, role, frac_bits, &ring);
                }
            }
            TruncationMode::RevealExact => {
                let mut buf = FrameBuf::new(MsgType::OpenRing, xs.len());
                for (i, &x) in xs.iter().enumerate() {
                    buf.set(i, x.to_word());
                }
                let theirs = self.exchange(buf)?;
                let alice = self.role.is_alice();
                for (x, t) in xs.iter_mut().zip(theirs) {
                    let exact = truncate_exact(ring.add(*x, ring.from_u64(t)), frac_bits, &ring);
                    *x = if alice { exact } else { W::zero() };
                }
            }
        }
        Ok(())
    }

    /// Elementwise AND of XOR-shared bit vectors with supplied triples.
    pub fn and_with(&mut self, x: &PackedBits, y: &PackedBits, t: &BitTriples) -> Result<PackedBits> {
        let n = x.len();
        if y.len() != n || t.len() != n {
            return Err(Error::Dimension(format!(
                "AND of lengths {n} and {} with {} triples",
                y.len(),
                t.len()
            )));
        }
        let opened = self.open_bits(&[&x.xor(&t.u), &y.xor(&t.v)])?;
        let (d, e) = (&opened[0], &opened[1]);
        let mut z = t.w.xor(&d.and(&t.v));
        z.xor_assign(&t.u.and(e));
        if self.role.is_alice() {
            z.xor_assign(&d.and(e));
        }
        self.transcript.bit_mults += n as u64;
        Ok(z)
    }

    /// Batched AND over `Z_2`; one round for any length.
    pub fn and_bits(&mut self, x: &PackedBits, y: &PackedBits) -> Result<PackedBits> {
        let n = x.len();
        let words = self.fetch(&Request::BitTriples { n })?;
        let t = parse_bit_triples(n, &words)?;
        self.and_with(x, y, &t)
    }

    /// Opens masked bit vectors in one round: each part is sent packed and XORed with the peer's.
    pub(crate) fn open_bits(&mut self, parts: &[&PackedBits]) -> Result<Vec<PackedBits>> {
        let total: usize = parts.iter().map(|p| word_count(p.len())).sum();
        let mut buf = FrameBuf::new(MsgType::OpenBits, total);
        let mut at = 0;
        for p in parts {
            for &w in p.words() {
                buf.set(at, w);
                at += 1;
            }
        }
        let theirs = self.exchange(buf)?;
        let mut at = 0;
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            let k = word_count(p.len());
            let peer = PackedBits::from_words(theirs[at..at + k].to_vec(), p.len());
            at += k;
            self.transcript.bits_opened += p.len() as u64;
            out.push(p.xor(&peer));
        }
        if self.trace.is_some() {
            for o in &out {
                self.record("open_bits", || TraceValue::Bits(o.clone()));
            }
        }
        Ok(out)
    }

    /// Sends ring values the peer keeps as shares; returns the peer's values.
    pub(crate) fn reshare(&mut self, send: &[W]) -> Result<Vec<W>> {
        let mut buf = FrameBuf::new(MsgType::Reshare, send.len());
        for (i, &v) in send.iter().enumerate() {
            buf.set(i, v.to_word());
        }
        let theirs = self.exchange(buf)?;
        Ok(theirs.into_iter().map(|w| self.ring.from_u64(w)).collect())
    }
}

/// Options for [`run_pair`].
#[derive(Clone, Debug, Default)]
pub struct PairOptions {
    pub truncation: TruncationMode,
    pub trace: bool,
    pub threads: Option<usize>,
}

/// Party-private seed for re-sharing masks.
pub fn local_seed(seed: &Seed, role: Role) -> Seed {
    use rand::RngCore;
    let mut out = [0u8; 32];
    labelled_rng(seed, &format!("local/{}", role.name())).fill_bytes(&mut out);
    out
}

/// Runs `f` as both parties over an in-memory channel with an in-process dealer.
pub fn run_pair<W, T, F>(ring: Ring<W>, seed: Seed, f: F) -> Result<(T, T)>
where
    W: RingWord,
    T: Send,
    F: Fn(&mut Session<W>) -> Result<T> + Sync,
{
    run_pair_with(ring, seed, &PairOptions::default(), f)
}

pub fn run_pair_with<W, T, F>(ring: Ring<W>, seed: Seed, opts: &PairOptions, f: F) -> Result<(T, T)>
where
    W: RingWord,
    T: Send,
    F: Fn(&mut Session<W>) -> Result<T> + Sync,
{
    let pool = match opts.threads {
        Some(n) => Some(Arc::new(
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::argument(e.to_string()))?,
        )),
        None => None,
    };
    let (ca, cb) = local_pair();
    let make = |role: Role, ch: Box<dyn Channel>| -> Result<Session<W>> {
        let dealer = Dealer::new(seed, ring.bits())?;
        let mut s = Session::new(
            role,
            ring,
            ch,
            Box::new(DealerSource::new(dealer, role)),
            local_seed(&seed, role),
        )
        .with_truncation(opts.truncation);
        if opts.trace {
            s = s.with_trace();
        }
        if let Some(p) = &pool {
            s = s.with_pool(p.clone());
        }
        Ok(s)
    };
    let mut sa = make(Role::A, Box::new(ca))?;
    let mut sb = make(Role::B, Box::new(cb))?;
    std::thread::scope(|scope| {
        let f = &f;
        let ha = scope.spawn(move || f(&mut sa));
        let hb = scope.spawn(move || f(&mut sb));
        let ra = ha.join().expect("alice panicked");
        let rb = hb.join().expect("bob panicked");
        Ok((ra?, rb?))
    })
}

/// A seed for tests and tools that do not care about secrecy.
pub fn test_seed(v: u64) -> Seed {
    randomness::seed_from_u64(v)
}

#[allow(dead_code)]
fn _assert_send<W: RingWord>() {
    fn is_send<T: Send>() {}
    is_send::<Session<W>>();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sharing::split_vec;
    use rand::Rng;

    #[test]
    fn scalar_product_hand_example() {
        // λ = 4: x = 3, y = 5, triple (2, 7, 14) -> D = 1, E = -2 = 14
        let ring = Ring::<u8>::new(4).unwrap();
        let (x, y) = (3u8, 5u8);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let (xa, xb) = split_vec(&[x], &ring, &mut rng);
        let (ya, yb) = split_vec(&[y], &ring, &mut rng);
        let ring64 = Ring::<u64>::new(4).unwrap();
        let [ta, tb] = RingTriples::deal_from(&[2], &[7], &ring64, &mut rng);
        let conv = |t: RingTriples<u64>| RingTriples::<u8> {
            u: t.u.iter().map(|&v| v as u8).collect(),
            v: t.v.iter().map(|&v| v as u8).collect(),
            w: t.w.iter().map(|&v| v as u8).collect(),
        };
        let (ta, tb) = (conv(ta), conv(tb));
        let (ra, rb) = run_pair_with(ring, test_seed(0), &PairOptions { trace: true, ..Default::default() }, |s| {
            let (x, y, t) = if s.role().is_alice() { (&xa, &ya, &ta) } else { (&xb, &yb, &tb) };
            let z = s.mul_with(x, y, t)?;
            Ok((z[0], s.take_trace()))
        })
        .unwrap();
        assert_eq!(ring.add(ra.0, rb.0), 15);
        assert_eq!(ra.1[0].value, TraceValue::Ring(vec![1, 14]));
    }

    #[test]
    fn rounds_and_bytes() {
        let ring = Ring::<u64>::word();
        let (a, _) = run_pair(ring, test_seed(2), |s| {
            let xs = vec![1u64; 512];
            s.batch_mul(&xs, &xs)?;
            let t = s.transcript().clone();
            s.batch_mul(&xs[..1], &xs[..1])?;
            Ok((t, s.transcript().clone()))
        })
        .unwrap();
        assert_eq!(a.0.rounds, 1);
        assert_eq!(a.0.bytes_sent, 8205);
        assert_eq!(a.1.rounds, 2);
    }

    #[test]
    fn transcripts_agree_across_parties() {
        let ring = Ring::<u64>::word();
        let (a, b) = run_pair(ring, test_seed(3), |s| {
            let mut rng = ChaCha20Rng::seed_from_u64(9);
            let x: Vec<u64> = (0..10).map(|_| rng.gen()).collect();
            s.batch_mul(&x, &x)?;
            let bits = PackedBits::random(100, &mut rng);
            s.and_bits(&bits, &bits)?;
            Ok(s.transcript().clone())
        })
        .unwrap();
        assert_eq!(a.digest(), b.digest());
        assert_eq!(a.rounds, b.rounds);
        assert_eq!(a.ring_mults, 10);
        assert_eq!(a.bit_mults, 100);
    }
}
