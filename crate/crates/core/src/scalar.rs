//! Scalar traits the protocols are generic over.
//!
//! Ring arithmetic runs on an unsigned machine word (`u8`..`u64`) with
//! wraparound semantics; plaintext oracles run on `f32` or `f64`.

use std::fmt::{Debug, Display};
use std::hash::Hash;
use std::iter::Sum;

use num_traits::{
    Float, FromPrimitive, PrimInt, ToPrimitive, Unsigned, WrappingAdd, WrappingMul, WrappingNeg,
    WrappingSub,
};

/// Unsigned machine word backing a ring `Z_{2^k}` with `k <= BITS`.
pub trait RingWord:
    PrimInt
    + Unsigned
    + WrappingAdd
    + WrappingSub
    + WrappingMul
    + WrappingNeg
    + Default
    + Debug
    + Display
    + Hash
    + Send
    + Sync
    + 'static
{
    const BITS: u32;

    /// Keeps the low `BITS` bits of `v`.
    fn from_word(v: u64) -> Self;

    /// Zero-extends to 64 bits.
    fn to_word(self) -> u64;
}

macro_rules! ring_word {
    ($($t:ty),*) => {$(
        impl RingWord for $t {
            const BITS: u32 = <$t>::BITS;

            #[inline]
            fn from_word(v: u64) -> Self {
                v as $t
            }

            #[inline]
            fn to_word(self) -> u64 {
                self as u64
            }
        }
    )*};
}

ring_word!(u8, u16, u32, u64);

/// Real scalar used by plaintext training and fixed-point conversion.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}
