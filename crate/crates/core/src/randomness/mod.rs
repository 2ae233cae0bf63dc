//! Correlated randomness from the trusted initializer.
//!
//! The dealer derives every block from a 256-bit master seed, a consumer tag
//! and a per-tag counter, so both parties' material is reproducible and the
//! dealer can be replicated (one instance per party) without coordination.
//! Parties consume blocks strictly in FIFO order per tag.

mod composenet;
mod online;
mod stream;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::bits::{word_count, PackedBits};
use crate::error::{Error, Result};
use crate::ring::Ring;
use crate::scalar::RingWord;
use crate::sharing::Role;

pub use composenet::{mask_bits_formula, plan_composenet, Composition, CompositionSchedule, Span};
pub use online::{serve_party, RemoteSource};
pub use stream::{RandomnessStream, StreamHeader};

pub type Seed = [u8; 32];

/// Expands a short integer seed into a master seed.
pub fn seed_from_u64(v: u64) -> Seed {
    derive(&[b"securelr/seed", &v.to_le_bytes()])
}

fn derive(parts: &[&[u8]]) -> Seed {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

/// Independent generator for a labelled purpose.
pub fn labelled_rng(seed: &Seed, label: &str) -> ChaCha20Rng {
    ChaCha20Rng::from_seed(derive(&[seed, label.as_bytes()]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u32)]
pub enum Tag {
    RingTriple = 1,
    MatrixTriple = 2,
    BitTriple = 3,
    ComposeNet = 4,
    Conversion = 5,
}

impl Tag {
    pub const ALL: [Tag; 5] = [
        Tag::RingTriple,
        Tag::MatrixTriple,
        Tag::BitTriple,
        Tag::ComposeNet,
        Tag::Conversion,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Tag::RingTriple => "ring triples",
            Tag::MatrixTriple => "matrix triples",
            Tag::BitTriple => "bit triples",
            Tag::ComposeNet => "composition masks",
            Tag::Conversion => "conversion triples",
        }
    }

    pub fn index(self) -> usize {
        self as usize - 1
    }

    pub fn from_u32(v: u32) -> Result<Tag> {
        Tag::ALL
            .get((v as usize).wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::format(format!("unknown randomness tag {v}")))
    }
}

/// One unit of correlated randomness a protocol step consumes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Request {
    RingTriples { n: usize },
    MatrixTriple { rows: usize, inner: usize, cols: usize },
    BitTriples { n: usize },
    ComposeNet { bits: usize, batch: usize },
    Conversion { n: usize },
}

impl Request {
    pub fn tag(&self) -> Tag {
        match self {
            Request::RingTriples { .. } => Tag::RingTriple,
            Request::MatrixTriple { .. } => Tag::MatrixTriple,
            Request::BitTriples { .. } => Tag::BitTriple,
            Request::ComposeNet { .. } => Tag::ComposeNet,
            Request::Conversion { .. } => Tag::Conversion,
        }
    }

    pub fn dims(&self) -> [u64; 3] {
        match *self {
            Request::RingTriples { n } | Request::BitTriples { n } | Request::Conversion { n } => {
                [n as u64, 0, 0]
            }
            Request::MatrixTriple { rows, inner, cols } => [rows as u64, inner as u64, cols as u64],
            Request::ComposeNet { bits, batch } => [bits as u64, batch as u64, 0],
        }
    }

    pub fn from_parts(tag: Tag, d: [u64; 3]) -> Request {
        let [a, b, c] = d.map(|v| v as usize);
        match tag {
            Tag::RingTriple => Request::RingTriples { n: a },
            Tag::MatrixTriple => Request::MatrixTriple {
                rows: a,
                inner: b,
                cols: c,
            },
            Tag::BitTriple => Request::BitTriples { n: a },
            Tag::ComposeNet => Request::ComposeNet { bits: a, batch: b },
            Tag::Conversion => Request::Conversion { n: a },
        }
    }

    /// Length in words of one party's part.
    pub fn word_len(&self) -> Result<usize> {
        Ok(match *self {
            Request::RingTriples { n } | Request::Conversion { n } => 3 * n,
            Request::MatrixTriple { rows, inner, cols } => rows * inner + inner * cols + rows * cols,
            Request::BitTriples { n } => 3 * word_count(n),
            Request::ComposeNet { bits, batch } => {
                let s = plan_composenet(bits)?;
                ComposeNetMaterial::word_len(&s, batch)
            }
        })
    }

    fn describe(&self) -> String {
        format!("{} {:?}", self.tag().name(), self.dims())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RingTriples<W> {
    pub u: Vec<W>,
    pub v: Vec<W>,
    pub w: Vec<W>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixTriple<W> {
    pub rows: usize,
    pub inner: usize,
    pub cols: usize,
    /// `rows x inner`, row-major.
    pub u: Vec<W>,
    /// `inner x cols`, row-major.
    pub v: Vec<W>,
    /// `rows x cols`, row-major.
    pub w: Vec<W>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitTriples {
    pub u: PackedBits,
    pub v: PackedBits,
    pub w: PackedBits,
}

/// One party's material for a batch of decompositions through a composition network.
///
/// `setup` covers the `bits * batch` generate products, bit position major.
/// `masks` holds, per published node in publish order, a `batch`-bit mask for
/// the propagate signal followed by one for the generate signal. `products`
/// holds, per composition in layer order, the mask products `u_p(high) u_p(low)`
/// and `u_p(high) u_g(low)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComposeNetMaterial {
    pub setup: BitTriples,
    pub masks: PackedBits,
    pub products: PackedBits,
}

fn split_words<R: Rng + ?Sized>(secret: &[u64], ring: &Ring<u64>, rng: &mut R) -> [Vec<u64>; 2] {
    let a: Vec<u64> = secret.iter().map(|_| ring.random(rng)).collect();
    let b = secret.iter().zip(&a).map(|(&x, &r)| ring.sub(x, r)).collect();
    [a, b]
}

fn split_packed<R: Rng + ?Sized>(secret: &PackedBits, rng: &mut R) -> [PackedBits; 2] {
    let a = PackedBits::random(secret.len(), rng);
    let b = secret.xor(&a);
    [a, b]
}

fn to_ring<W: RingWord>(words: &[u64]) -> Vec<W> {
    words.iter().map(|&w| W::from_word(w)).collect()
}

fn take<'a>(words: &mut &'a [u64], n: usize) -> &'a [u64] {
    let (head, tail) = words.split_at(n);
    *words = tail;
    head
}

impl<W: RingWord> RingTriples<W> {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    fn from_words(n: usize, mut words: &[u64]) -> Self {
        RingTriples {
            u: to_ring(take(&mut words, n)),
            v: to_ring(take(&mut words, n)),
            w: to_ring(take(&mut words, n)),
        }
    }
}

impl RingTriples<u64> {
    /// Shares triples built on the given `u`, `v`.
    pub fn deal_from<R: Rng + ?Sized>(
        u: &[u64],
        v: &[u64],
        ring: &Ring<u64>,
        rng: &mut R,
    ) -> [RingTriples<u64>; 2] {
        assert_eq!(u.len(), v.len());
        let w: Vec<u64> = u.iter().zip(v).map(|(&x, &y)| ring.mul(x, y)).collect();
        let [ua, ub] = split_words(u, ring, rng);
        let [va, vb] = split_words(v, ring, rng);
        let [wa, wb] = split_words(&w, ring, rng);
        [
            RingTriples { u: ua, v: va, w: wa },
            RingTriples { u: ub, v: vb, w: wb },
        ]
    }

    pub fn deal<R: Rng + ?Sized>(n: usize, ring: &Ring<u64>, rng: &mut R) -> [RingTriples<u64>; 2] {
        let u: Vec<u64> = (0..n).map(|_| ring.random(rng)).collect();
        let v: Vec<u64> = (0..n).map(|_| ring.random(rng)).collect();
        RingTriples::deal_from(&u, &v, ring, rng)
    }

    fn into_words(self) -> Vec<u64> {
        let mut out = self.u;
        out.extend(self.v);
        out.extend(self.w);
        out
    }
}

/// Row-major `rows x inner` times `inner x cols` over the ring.
pub fn ring_matmul<W: RingWord>(
    x: &[W],
    y: &[W],
    rows: usize,
    inner: usize,
    cols: usize,
    ring: &Ring<W>,
) -> Vec<W> {
    let mut out = vec![W::zero(); rows * cols];
    for r in 0..rows {
        let xr = &x[r * inner..(r + 1) * inner];
        let orow = &mut out[r * cols..(r + 1) * cols];
        for (k, &xv) in xr.iter().enumerate() {
            let yr = &y[k * cols..(k + 1) * cols];
            for (o, &yv) in orow.iter_mut().zip(yr) {
                *o = o.wrapping_add(&xv.wrapping_mul(&yv));
            }
        }
    }
    out.iter().map(|&v| ring.reduce(v)).collect()
}

impl<W: RingWord> MatrixTriple<W> {
    fn from_words(rows: usize, inner: usize, cols: usize, mut words: &[u64]) -> Self {
        MatrixTriple {
            rows,
            inner,
            cols,
            u: to_ring(take(&mut words, rows * inner)),
            v: to_ring(take(&mut words, inner * cols)),
            w: to_ring(take(&mut words, rows * cols)),
        }
    }
}

impl MatrixTriple<u64> {
    #[allow(clippy::too_many_arguments)]
    pub fn deal_from<R: Rng + ?Sized>(
        u: &[u64],
        v: &[u64],
        rows: usize,
        inner: usize,
        cols: usize,
        ring: &Ring<u64>,
        rng: &mut R,
    ) -> [MatrixTriple<u64>; 2] {
        assert_eq!(u.len(), rows * inner);
        assert_eq!(v.len(), inner * cols);
        let w = ring_matmul(u, v, rows, inner, cols, ring);
        let [ua, ub] = split_words(u, ring, rng);
        let [va, vb] = split_words(v, ring, rng);
        let [wa, wb] = split_words(&w, ring, rng);
        let mk = |u, v, w| MatrixTriple {
            rows,
            inner,
            cols,
            u,
            v,
            w,
        };
        [mk(ua, va, wa), mk(ub, vb, wb)]
    }

    pub fn deal<R: Rng + ?Sized>(
        rows: usize,
        inner: usize,
        cols: usize,
        ring: &Ring<u64>,
        rng: &mut R,
    ) -> [MatrixTriple<u64>; 2] {
        let u: Vec<u64> = (0..rows * inner).map(|_| ring.random(rng)).collect();
        let v: Vec<u64> = (0..inner * cols).map(|_| ring.random(rng)).collect();
        MatrixTriple::deal_from(&u, &v, rows, inner, cols, ring, rng)
    }

    fn into_words(self) -> Vec<u64> {
        let mut out = self.u;
        out.extend(self.v);
        out.extend(self.w);
        out
    }
}

impl BitTriples {
    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn deal_from<R: Rng + ?Sized>(u: &PackedBits, v: &PackedBits, rng: &mut R) -> [BitTriples; 2] {
        let w = u.and(v);
        let [ua, ub] = split_packed(u, rng);
        let [va, vb] = split_packed(v, rng);
        let [wa, wb] = split_packed(&w, rng);
        [
            BitTriples { u: ua, v: va, w: wa },
            BitTriples { u: ub, v: vb, w: wb },
        ]
    }

    pub fn deal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> [BitTriples; 2] {
        let u = PackedBits::random(n, rng);
        let v = PackedBits::random(n, rng);
        BitTriples::deal_from(&u, &v, rng)
    }

    fn from_words(n: usize, mut words: &[u64]) -> Self {
        let k = word_count(n);
        BitTriples {
            u: PackedBits::from_words(take(&mut words, k).to_vec(), n),
            v: PackedBits::from_words(take(&mut words, k).to_vec(), n),
            w: PackedBits::from_words(take(&mut words, k).to_vec(), n),
        }
    }

    fn into_words(self) -> Vec<u64> {
        let mut out = self.u.into_words();
        out.extend(self.v.into_words());
        out.extend(self.w.into_words());
        out
    }
}

impl ComposeNetMaterial {
    pub fn word_len(s: &CompositionSchedule, batch: usize) -> usize {
        3 * word_count(s.bits() * batch)
            + word_count(2 * s.published_nodes() * batch)
            + word_count(2 * s.compositions() * batch)
    }

    pub fn deal<R: Rng + ?Sized>(
        s: &CompositionSchedule,
        batch: usize,
        rng: &mut R,
    ) -> [ComposeNetMaterial; 2] {
        let [setup_a, setup_b] = BitTriples::deal(s.bits() * batch, rng);

        let mut node_masks: HashMap<usize, (PackedBits, PackedBits)> = HashMap::new();
        let mut masks = PackedBits::zeros(0);
        for &id in s.publish().iter().flatten() {
            let mp = PackedBits::random(batch, rng);
            let mg = PackedBits::random(batch, rng);
            masks.extend(&mp);
            masks.extend(&mg);
            node_masks.insert(id, (mp, mg));
        }
        let mut products = PackedBits::zeros(0);
        for c in s.layers().iter().flatten() {
            let (hp, _) = &node_masks[&c.high];
            let (lp, lg) = &node_masks[&c.low];
            products.extend(&hp.and(lp));
            products.extend(&hp.and(lg));
        }
        let [ma, mb] = split_packed(&masks, rng);
        let [pa, pb] = split_packed(&products, rng);
        [
            ComposeNetMaterial {
                setup: setup_a,
                masks: ma,
                products: pa,
            },
            ComposeNetMaterial {
                setup: setup_b,
                masks: mb,
                products: pb,
            },
        ]
    }

    pub fn from_words(s: &CompositionSchedule, batch: usize, mut words: &[u64]) -> Self {
        let n = s.bits() * batch;
        let setup = BitTriples::from_words(n, take(&mut words, 3 * word_count(n)));
        let m = 2 * s.published_nodes() * batch;
        let masks = PackedBits::from_words(take(&mut words, word_count(m)).to_vec(), m);
        let c = 2 * s.compositions() * batch;
        let products = PackedBits::from_words(take(&mut words, word_count(c)).to_vec(), c);
        ComposeNetMaterial {
            setup,
            masks,
            products,
        }
    }

    fn into_words(self) -> Vec<u64> {
        let mut out = self.setup.into_words();
        out.extend(self.masks.into_words());
        out.extend(self.products.into_words());
        out
    }
}

/// Deterministic generator of both parties' correlated randomness.
#[derive(Clone, Debug)]
pub struct Dealer {
    seed: Seed,
    ring: Ring<u64>,
    counters: [u64; 5],
    schedules: HashMap<usize, Arc<CompositionSchedule>>,
}

impl Dealer {
    pub fn new(seed: Seed, ring_bits: u32) -> Result<Self> {
        Ok(Dealer {
            seed,
            ring: Ring::new(ring_bits)?,
            counters: [0; 5],
            schedules: HashMap::new(),
        })
    }

    pub fn ring_bits(&self) -> u32 {
        self.ring.bits()
    }

    /// Binding commitment to the master seed, exchanged in the handshake.
    pub fn commitment(&self) -> [u8; 32] {
        derive(&[b"securelr/commit", &self.seed])
    }

    pub fn session_id(&self) -> u64 {
        let d = derive(&[b"securelr/session", &self.seed]);
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
    }

    pub fn schedule(&mut self, bits: usize) -> Result<Arc<CompositionSchedule>> {
        if let Some(s) = self.schedules.get(&bits) {
            return Ok(s.clone());
        }
        let s = Arc::new(plan_composenet(bits)?);
        self.schedules.insert(bits, s.clone());
        Ok(s)
    }

    /// Generates the next block for `req`; returns Alice's and Bob's parts as words.
    pub fn generate(&mut self, req: &Request) -> Result<[Vec<u64>; 2]> {
        let tag = req.tag();
        let counter = self.counters[tag.index()];
        self.counters[tag.index()] += 1;
        let mut dims = Vec::with_capacity(24);
        for d in req.dims() {
            dims.extend_from_slice(&d.to_le_bytes());
        }
        let mut rng = ChaCha20Rng::from_seed(derive(&[
            b"securelr/dealer",
            &self.seed,
            &(tag as u32).to_le_bytes(),
            &counter.to_le_bytes(),
            &dims,
        ]));
        let ring = self.ring;
        Ok(match *req {
            Request::RingTriples { n } | Request::Conversion { n } => {
                RingTriples::deal(n, &ring, &mut rng).map(RingTriples::into_words)
            }
            Request::MatrixTriple { rows, inner, cols } => {
                MatrixTriple::deal(rows, inner, cols, &ring, &mut rng).map(MatrixTriple::into_words)
            }
            Request::BitTriples { n } => BitTriples::deal(n, &mut rng).map(BitTriples::into_words),
            Request::ComposeNet { bits, batch } => {
                let s = self.schedule(bits)?;
                ComposeNetMaterial::deal(&s, batch, &mut rng).map(ComposeNetMaterial::into_words)
            }
        })
    }
}

/// A party's supply of correlated randomness.
pub trait CorrelatedSource: Send {
    /// Returns this party's words for the next block matching `req`.
    fn fetch(&mut self, req: &Request) -> Result<Vec<u64>>;
}

impl<S: CorrelatedSource + ?Sized> CorrelatedSource for Box<S> {
    fn fetch(&mut self, req: &Request) -> Result<Vec<u64>> {
        (**self).fetch(req)
    }
}

/// Runs the dealer in-process and keeps this party's half.
#[derive(Clone, Debug)]
pub struct DealerSource {
    dealer: Dealer,
    role: Role,
}

impl DealerSource {
    pub fn new(dealer: Dealer, role: Role) -> Self {
        DealerSource { dealer, role }
    }
}

impl CorrelatedSource for DealerSource {
    fn fetch(&mut self, req: &Request) -> Result<Vec<u64>> {
        let [a, b] = self.dealer.generate(req)?;
        Ok(if self.role.is_alice() { a } else { b })
    }
}

/// Wraps a source and logs every request it serves.
#[derive(Debug)]
pub struct RecordingSource<S> {
    inner: S,
    log: Arc<Mutex<Vec<Request>>>,
}

impl<S> RecordingSource<S> {
    pub fn new(inner: S) -> (Self, Arc<Mutex<Vec<Request>>>) {
        let log = Arc::new(Mutex::new(Vec::new()));
        (
            RecordingSource {
                inner,
                log: log.clone(),
            },
            log,
        )
    }
}

impl<S: CorrelatedSource> CorrelatedSource for RecordingSource<S> {
    fn fetch(&mut self, req: &Request) -> Result<Vec<u64>> {
        self.log.lock().expect("log lock").push(*req);
        self.inner.fetch(req)
    }
}

fn check_len(req: &Request, words: &[u64]) -> Result<()> {
    let expected = req.word_len()?;
    if words.len() != expected {
        return Err(Error::RandomnessMismatch {
            expected: format!("{} ({expected} words)", req.describe()),
            found: format!("{} words", words.len()),
        });
    }
    Ok(())
}

/// Typed views over fetched words.
pub fn parse_ring_triples<W: RingWord>(n: usize, words: &[u64]) -> Result<RingTriples<W>> {
    check_len(&Request::RingTriples { n }, words)?;
    Ok(RingTriples::from_words(n, words))
}

pub fn parse_matrix_triple<W: RingWord>(
    rows: usize,
    inner: usize,
    cols: usize,
    words: &[u64],
) -> Result<MatrixTriple<W>> {
    check_len(&Request::MatrixTriple { rows, inner, cols }, words)?;
    Ok(MatrixTriple::from_words(rows, inner, cols, words))
}

pub fn parse_bit_triples(n: usize, words: &[u64]) -> Result<BitTriples> {
    check_len(&Request::BitTriples { n }, words)?;
    Ok(BitTriples::from_words(n, words))
}

pub fn parse_composenet(s: &CompositionSchedule, batch: usize, words: &[u64]) -> Result<ComposeNetMaterial> {
    let expected = ComposeNetMaterial::word_len(s, batch);
    if words.len() != expected {
        return Err(Error::RandomnessMismatch {
            expected: format!("composition masks for {} bits x {batch} ({expected} words)", s.bits()),
            found: format!("{} words", words.len()),
        });
    }
    Ok(ComposeNetMaterial::from_words(s, batch, words))
}
