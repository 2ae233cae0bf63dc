//! Additive secret sharing over `Z_{2^λ}` and XOR sharing over `Z_2`.

use std::fs;
use std::path::Path;

use rand::Rng;

use crate::bits::PackedBits;
use crate::error::{Error, Result};
use crate::ring::Ring;
use crate::scalar::RingWord;

/// The two computing parties. Alice adds public constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    A,
    B,
}

impl Role {
    pub fn index(self) -> usize {
        match self {
            Role::A => 0,
            Role::B => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Role> {
        match i {
            0 => Some(Role::A),
            1 => Some(Role::B),
            _ => None,
        }
    }

    pub fn peer(self) -> Role {
        match self {
            Role::A => Role::B,
            Role::B => Role::A,
        }
    }

    pub fn is_alice(self) -> bool {
        self == Role::A
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::A => "alice",
            Role::B => "bob",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RingShare<W> {
    pub value: W,
    pub role: Role,
}

impl<W> RingShare<W> {
    pub fn new(value: W, role: Role) -> Self {
        RingShare { value, role }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BitShare {
    pub bit: bool,
    pub role: Role,
}

/// One party's XOR shares of a sequence of bits, LSB first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitVectorShare {
    pub bits: PackedBits,
    pub role: Role,
}

impl BitVectorShare {
    pub fn bit(&self, i: usize) -> BitShare {
        BitShare {
            bit: self.bits.get(i),
            role: self.role,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareVector<W> {
    pub role: Role,
    pub values: Vec<W>,
}

impl<W: RingWord> ShareVector<W> {
    pub fn new(role: Role, values: Vec<W>) -> Self {
        ShareVector { role, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> RingShare<W> {
        RingShare::new(self.values[i], self.role)
    }
}

/// Row-major matrix of shares.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareMatrix<W> {
    pub role: Role,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<W>,
}

impl<W: RingWord> ShareMatrix<W> {
    pub fn new(role: Role, rows: usize, cols: usize, values: Vec<W>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        Ok(ShareMatrix {
            role,
            rows,
            cols,
            values,
        })
    }

    pub fn column(role: Role, values: Vec<W>) -> Self {
        let rows = values.len();
        ShareMatrix {
            role,
            rows,
            cols: 1,
            values,
        }
    }

    pub fn row(&self, r: usize) -> &[W] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }
}

/// Splits `x` into uniformly random shares.
pub fn split<W: RingWord, R: Rng + ?Sized>(
    x: W,
    ring: &Ring<W>,
    rng: &mut R,
) -> (RingShare<W>, RingShare<W>) {
    let r = ring.random(rng);
    split_with(x, r, ring)
}

/// Splits `x` using `r` as Alice's share.
pub fn split_with<W: RingWord>(x: W, r: W, ring: &Ring<W>) -> (RingShare<W>, RingShare<W>) {
    let r = ring.reduce(r);
    (
        RingShare::new(r, Role::A),
        RingShare::new(ring.sub(x, r), Role::B),
    )
}

pub fn split_vec<W: RingWord, R: Rng + ?Sized>(
    xs: &[W],
    ring: &Ring<W>,
    rng: &mut R,
) -> (Vec<W>, Vec<W>) {
    xs.iter()
        .map(|&x| {
            let (a, b) = split(x, ring, rng);
            (a.value, b.value)
        })
        .unzip()
}

pub fn open<W: RingWord>(a: RingShare<W>, b: RingShare<W>, ring: &Ring<W>) -> Result<W> {
    if a.role == b.role {
        return Err(Error::protocol(format!(
            "cannot open two shares held by {}",
            a.role.name()
        )));
    }
    Ok(ring.add(a.value, b.value))
}

pub fn open_vec<W: RingWord>(a: &[W], b: &[W], ring: &Ring<W>) -> Vec<W> {
    a.iter().zip(b).map(|(&x, &y)| ring.add(x, y)).collect()
}

/// `c0 + sum(c_i * x_i)` evaluated locally on `role`'s shares; only Alice adds `c0`.
pub fn affine_combine<W: RingWord>(
    role: Role,
    c0: W,
    terms: &[(W, RingShare<W>)],
    ring: &Ring<W>,
) -> Result<RingShare<W>> {
    let mut acc = if role.is_alice() { ring.reduce(c0) } else { W::zero() };
    for (c, s) in terms {
        if s.role != role {
            return Err(Error::protocol("affine combination over shares of both parties"));
        }
        acc = ring.add(acc, ring.mul(*c, s.value));
    }
    Ok(RingShare::new(acc, role))
}

pub fn split_bits<R: Rng + ?Sized>(x: &PackedBits, rng: &mut R) -> (PackedBits, PackedBits) {
    let r = PackedBits::random(x.len(), rng);
    let other = x.xor(&r);
    (r, other)
}

pub fn open_bits(a: &BitVectorShare, b: &BitVectorShare) -> Result<PackedBits> {
    if a.role == b.role {
        return Err(Error::protocol("cannot open two bit shares held by the same party"));
    }
    Ok(a.bits.xor(&b.bits))
}

const SHARE_MAGIC: &[u8; 4] = b"SHR1";
const SHARE_HEADER_LEN: usize = 32;

/// A matrix of one party's shares with its fixed-point parameters.
///
/// Layout: `"SHR1"`, then λ, a, b as `u32` and rows, cols as `u64`, all
/// little-endian, then `rows * cols` row-major `u64` share words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShareFile {
    pub ring_bits: u32,
    pub frac_bits: u32,
    pub int_bits: u32,
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<u64>,
}

impl ShareFile {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SHARE_HEADER_LEN + 8 * self.values.len());
        out.extend_from_slice(SHARE_MAGIC);
        out.extend_from_slice(&self.ring_bits.to_le_bytes());
        out.extend_from_slice(&self.frac_bits.to_le_bytes());
        out.extend_from_slice(&self.int_bits.to_le_bytes());
        out.extend_from_slice(&(self.rows as u64).to_le_bytes());
        out.extend_from_slice(&(self.cols as u64).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < SHARE_HEADER_LEN {
            return Err(Error::format("share file shorter than its header"));
        }
        if &bytes[..4] != SHARE_MAGIC {
            return Err(Error::format("bad share file magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let (ring_bits, frac_bits, int_bits) = (u32_at(4), u32_at(8), u32_at(12));
        let (rows, cols) = (u64_at(16), u64_at(24));
        let count = rows
            .checked_mul(cols)
            .filter(|c| c.checked_mul(8).is_some())
            .ok_or_else(|| Error::format("share file dimensions overflow"))?;
        let body = &bytes[SHARE_HEADER_LEN..];
        if body.len() as u64 != count * 8 {
            return Err(Error::format(format!(
                "share file holds {} bytes of data, header announces {rows}x{cols}",
                body.len()
            )));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ShareFile {
            ring_bits,
            frac_bits,
            int_bits,
            rows: rows as usize,
            cols: cols as usize,
            values,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    fn same_params(&self, other: &ShareFile) -> bool {
        (self.ring_bits, self.frac_bits, self.int_bits)
            == (other.ring_bits, other.frac_bits, other.int_bits)
    }

    /// Checks that two files can be combined element-wise (same parameters and shape).
    pub fn check_compatible(&self, other: &ShareFile) -> Result<()> {
        if !self.same_params(other) {
            return Err(Error::format(format!(
                "parameter headers differ: (λ={}, a={}, b={}) vs (λ={}, a={}, b={})",
                self.ring_bits,
                self.frac_bits,
                self.int_bits,
                other.ring_bits,
                other.frac_bits,
                other.int_bits
            )));
        }
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::format(format!(
                "shape {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    /// Stacks files vertically (horizontally partitioned owners).
    pub fn merge_rows(files: &[ShareFile]) -> Result<ShareFile> {
        let first = files
            .first()
            .ok_or_else(|| Error::argument("nothing to merge"))?;
        let mut out = ShareFile {
            rows: 0,
            values: Vec::new(),
            ..first.clone()
        };
        for f in files {
            if !f.same_params(first) || f.cols != first.cols {
                return Err(Error::format("row merge needs equal parameters and column counts"));
            }
            out.rows += f.rows;
            out.values.extend_from_slice(&f.values);
        }
        Ok(out)
    }

    /// Joins files side by side (vertically partitioned owners, rows already aligned).
    pub fn merge_cols(files: &[ShareFile]) -> Result<ShareFile> {
        let first = files
            .first()
            .ok_or_else(|| Error::argument("nothing to merge"))?;
        if files
            .iter()
            .any(|f| !f.same_params(first) || f.rows != first.rows)
        {
            return Err(Error::format("column merge needs equal parameters and row counts"));
        }
        let cols: usize = files.iter().map(|f| f.cols).sum();
        let mut values = Vec::with_capacity(first.rows * cols);
        for r in 0..first.rows {
            for f in files {
                values.extend_from_slice(&f.values[r * f.cols..(r + 1) * f.cols]);
            }
        }
        Ok(ShareFile {
            cols,
            values,
            ..first.clone()
        })
    }
}
