use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::RingWord;

/// The ring `Z_{2^bits}` realised on the word type `W`.
///
/// All arithmetic wraps on the word and is then masked to `bits`, so a ring
/// whose width equals the word width costs nothing beyond native wraparound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Ring<W> {
    bits: u32,
    mask: W,
}

impl<W: RingWord> Ring<W> {
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > W::BITS {
            return Err(Error::argument(format!(
                "ring width {bits} not supported by a {}-bit word",
                W::BITS
            )));
        }
        let mask = if bits == W::BITS {
            W::max_value()
        } else {
            (W::one() << bits as usize) - W::one()
        };
        Ok(Ring { bits, mask })
    }

    /// Full-width ring of the word type.
    pub fn word() -> Self {
        Ring {
            bits: W::BITS,
            mask: W::max_value(),
        }
    }

    #[inline]
    pub fn bits(&self) -> u32 {
        self.bits
    }

    #[inline]
    pub fn mask(&self) -> W {
        self.mask
    }

    #[inline]
    pub fn reduce(&self, v: W) -> W {
        v & self.mask
    }

    #[inline]
    pub fn add(&self, x: W, y: W) -> W {
        x.wrapping_add(&y) & self.mask
    }

    #[inline]
    pub fn sub(&self, x: W, y: W) -> W {
        x.wrapping_sub(&y) & self.mask
    }

    #[inline]
    pub fn mul(&self, x: W, y: W) -> W {
        x.wrapping_mul(&y) & self.mask
    }

    #[inline]
    pub fn neg(&self, x: W) -> W {
        x.wrapping_neg() & self.mask
    }

    #[inline]
    pub fn from_u64(&self, v: u64) -> W {
        W::from_word(v) & self.mask
    }

    /// Two's-complement embedding of a signed integer.
    #[inline]
    pub fn from_i64(&self, v: i64) -> W {
        W::from_word(v as u64) & self.mask
    }

    /// Interprets `v` as a two's-complement integer of `bits` bits.
    pub fn to_signed(&self, v: W) -> i64 {
        let raw = self.reduce(v).to_word();
        if self.bits == 64 {
            raw as i64
        } else if self.msb(v) {
            raw as i64 - (1i64 << self.bits)
        } else {
            raw as i64
        }
    }

    #[inline]
    pub fn msb(&self, v: W) -> bool {
        self.bit(v, self.bits - 1)
    }

    #[inline]
    pub fn bit(&self, v: W, i: u32) -> bool {
        (v >> i as usize) & W::one() == W::one()
    }

    /// `2^k` in the ring (zero when `k >= bits`).
    pub fn pow2(&self, k: u32) -> W {
        if k >= self.bits {
            W::zero()
        } else {
            W::one() << k as usize
        }
    }

    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> W {
        W::from_word(rng.gen::<u64>()) & self.mask
    }

    pub fn sum<I: IntoIterator<Item = W>>(&self, it: I) -> W {
        it.into_iter().fold(W::zero(), |acc, v| self.add(acc, v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn narrow_ring_wraps() {
        let r = Ring::<u8>::new(4).unwrap();
        assert_eq!(r.add(15, 1), 0);
        assert_eq!(r.sub(0, 1), 15);
        assert_eq!(r.mul(3, 7), 5);
        assert_eq!(r.neg(1), 15);
        assert_eq!(r.to_signed(15), -1);
        assert_eq!(r.to_signed(7), 7);
        assert_eq!(r.from_i64(-2), 14);
    }

    #[test]
    fn full_width_ring() {
        let r = Ring::<u64>::new(64).unwrap();
        assert_eq!(r.mask(), u64::MAX);
        assert_eq!(r.sub(0, 1), u64::MAX);
        assert_eq!(r.to_signed(u64::MAX), -1);
        assert_eq!(r.pow2(64), 0);
        assert_eq!(Ring::<u16>::word().bits(), 16);
    }

    #[test]
    fn rejects_oversized_width() {
        assert!(Ring::<u16>::new(17).is_err());
        assert!(Ring::<u64>::new(0).is_err());
    }
}
