//! Two's-complement fixed-point encoding into `Z_{2^λ}` and local share truncation.
//!
//! A real `x` with `|x| < 2^b` is stored as `floor(2^a * x)` for `x >= 0` and
//! `2^λ - floor(2^a * |x|)` otherwise; the low `a` bits carry the fraction, the
//! next `b` bits the integer part and the bits above act as sign.

use crate::error::{Error, Result};
use crate::ring::Ring;
use crate::scalar::{Real, RingWord};
use crate::sharing::Role;

/// Precision and ring configuration: `a` fractional bits, `b` integer bits, ring `Z_{2^λ}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FixedPointParams {
    pub frac_bits: u32,
    pub int_bits: u32,
    pub ring_bits: u32,
}

impl Default for FixedPointParams {
    fn default() -> Self {
        FixedPointParams {
            frac_bits: 12,
            int_bits: 15,
            ring_bits: 64,
        }
    }
}

impl FixedPointParams {
    pub fn new(frac_bits: u32, int_bits: u32, ring_bits: u32) -> Result<Self> {
        let p = FixedPointParams {
            frac_bits,
            int_bits,
            ring_bits,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, l) = (self.frac_bits, self.int_bits, self.ring_bits);
        if !matches!(l, 8 | 16 | 32 | 64) {
            return Err(Error::argument(format!(
                "ring width {l} must be one of 8, 16, 32, 64"
            )));
        }
        if a == 0 || b == 0 {
            return Err(Error::argument("need at least one fractional and one integer bit"));
        }
        if a + b + 2 > l {
            return Err(Error::argument(format!(
                "a + b + 2 = {} exceeds the ring width {l}",
                a + b + 2
            )));
        }
        if l < 2 * (a + b) {
            return Err(Error::argument(format!(
                "ring width {l} is below 2(a + b) = {}",
                2 * (a + b)
            )));
        }
        Ok(())
    }

    pub fn ring<W: RingWord>(&self) -> Result<Ring<W>> {
        Ring::new(self.ring_bits)
    }

    /// Bits decomposed by the activation: the masked width `a + b + 2`.
    pub fn activation_bits(&self) -> u32 {
        self.frac_bits + self.int_bits + 2
    }

    /// One unit in the last place, `2^-a`.
    pub fn ulp(&self) -> f64 {
        (-(self.frac_bits as f64)).exp2()
    }
}

/// Encodes a real into the ring.
pub fn encode<W: RingWord, F: Real>(x: F, p: &FixedPointParams) -> Result<W> {
    let ring = p.ring::<W>()?;
    let bound = F::from_u32(p.int_bits).map(|b| b.exp2());
    let in_range = x.is_finite() && bound.is_some_and(|b| x.abs() < b);
    if !in_range {
        return Err(Error::Range {
            value: x.to_f64().unwrap_or(f64::NAN),
            int_bits: p.int_bits,
        });
    }
    let scale = F::from_u32(p.frac_bits).unwrap().exp2();
    let mag = (x.abs() * scale)
        .floor()
        .to_u64()
        .expect("magnitude below 2^(a+b) fits in u64");
    let mag = ring.from_u64(mag);
    Ok(if x < F::zero() { ring.neg(mag) } else { mag })
}

/// Decodes a ring element; values with the most significant bit set are negative.
///
/// Values whose integer part overflows `b` bits are still decoded arithmetically.
pub fn decode<W: RingWord, F: Real>(v: W, p: &FixedPointParams) -> F {
    let ring = Ring::<W>::new(p.ring_bits).expect("ring width fits the word type");
    decode_in(v, p.frac_bits, &ring)
}

pub(crate) fn decode_in<W: RingWord, F: Real>(v: W, frac_bits: u32, ring: &Ring<W>) -> F {
    let signed = ring.to_signed(v);
    F::from_i64(signed).unwrap() / F::from_u32(frac_bits).unwrap().exp2()
}

/// Local truncation of one party's share by `2^frac_bits`.
///
/// Alice floors her share; Bob floors the negation of his share and negates
/// back. The opened result is `floor(z / 2^a)` or one more, unless the share
/// randomness lands in the wrap region, which happens with probability
/// `|z| / 2^λ` for a secret `z` of signed magnitude `|z|`.
pub fn truncate_share<W: RingWord>(share: W, role: Role, frac_bits: u32, ring: &Ring<W>) -> W {
    let share = ring.reduce(share);
    match role {
        Role::A => share >> frac_bits as usize,
        Role::B => ring.neg(ring.neg(share) >> frac_bits as usize),
    }
}

/// Exact truncation of a plaintext value: signed floor division by `2^frac_bits`.
pub fn truncate_exact<W: RingWord>(value: W, frac_bits: u32, ring: &Ring<W>) -> W {
    ring.from_i64(ring.to_signed(value) >> frac_bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn p12() -> FixedPointParams {
        FixedPointParams::new(12, 15, 64).unwrap()
    }

    #[test]
    fn encode_examples() {
        let p = p12();
        assert_eq!(encode::<u64, f64>(0.0, &p).unwrap(), 0);
        assert_eq!(encode::<u64, f64>(1.0, &p).unwrap(), 4096);
        assert_eq!(encode::<u64, f64>(-0.5, &p).unwrap(), 0u64.wrapping_sub(2048));
    }

    #[test]
    fn decode_examples() {
        let p = p12();
        assert_eq!(decode::<u64, f64>(4096, &p), 1.0);
        assert_eq!(decode::<u64, f64>(0, &p), 0.0);
        assert_eq!(decode::<u64, f64>(0u64.wrapping_sub(2048), &p), -0.5);
        assert_eq!(decode::<u64, f32>(4096, &p), 1.0f32);
    }

    #[test]
    fn encode_rejects_out_of_range() {
        let p = p12();
        let err = encode::<u64, f64>(32768.0, &p).unwrap_err();
        assert!(matches!(err, Error::Range { int_bits: 15, .. }));
        assert!(encode::<u64, f64>(f64::NAN, &p).is_err());
        assert!(encode::<u64, f64>(-32767.9, &p).is_ok());
    }

    #[test]
    fn encode_floors_magnitude() {
        let p = p12();
        // 2^12 * 0.00030 = 1.2288 -> 1 ; negative branch floors |x| too.
        assert_eq!(encode::<u64, f64>(0.0003, &p).unwrap(), 1);
        assert_eq!(encode::<u64, f64>(-0.0003, &p).unwrap(), u64::MAX);
        // tiny negatives collapse to zero, not to 2^λ
        assert_eq!(encode::<u64, f64>(-1e-9, &p).unwrap(), 0);
    }

    #[test]
    fn param_validation() {
        assert!(FixedPointParams::new(12, 15, 64).is_ok());
        assert!(FixedPointParams::new(4, 3, 16).is_ok());
        assert!(FixedPointParams::new(2, 2, 8).is_ok());
        assert!(FixedPointParams::new(12, 15, 48).is_err());
        assert!(FixedPointParams::new(12, 15, 32).is_err());
        assert!(FixedPointParams::new(0, 3, 16).is_err());
        assert!(FixedPointParams::new(4, 0, 16).is_err());
        assert!(FixedPointParams::new(5, 2, 8).is_err());
    }

    #[test]
    fn truncation_non_wrapping_split() {
        // z = 48 shared with r = 1000: (48 + 1000, -1000)
        let ring = Ring::<u16>::new(16).unwrap();
        let (sa, sb) = (1048u16, 0u16.wrapping_sub(1000));
        let ta = truncate_share(sa, Role::A, 4, &ring);
        let tb = truncate_share(sb, Role::B, 4, &ring);
        assert_eq!(ta, 65);
        assert_eq!(tb, 0u16.wrapping_sub(62));
        assert_eq!(ring.add(ta, tb), 3);
    }

    #[test]
    fn truncation_one_zero_share() {
        // Alice holds the whole secret, Bob holds zero: no wrap, exact.
        let ring = Ring::<u16>::new(16).unwrap();
        let ta = truncate_share(48, Role::A, 4, &ring);
        let tb = truncate_share(0, Role::B, 4, &ring);
        assert_eq!((ta, tb), (3, 0));
    }

    #[test]
    fn truncation_small_shares_fall_in_wrap_region() {
        // (32, 16) and (0, 48) are splits whose randomness r = -s_B is within
        // |z| of zero, the region where the local rule fails.
        let ring = Ring::<u16>::new(16).unwrap();
        for (sa, sb) in [(32u16, 16u16), (0, 48)] {
            let out = ring.add(
                truncate_share(sa, Role::A, 4, &ring),
                truncate_share(sb, Role::B, 4, &ring),
            );
            assert_eq!(out, 61443);
        }
    }

    #[test]
    fn exact_truncation_is_signed_floor() {
        let ring = Ring::<u16>::new(16).unwrap();
        assert_eq!(truncate_exact(48, 4, &ring), 3);
        assert_eq!(truncate_exact(ring.from_i64(-48), 4, &ring), ring.from_i64(-3));
        assert_eq!(truncate_exact(ring.from_i64(-49), 4, &ring), ring.from_i64(-4));
    }

    /// Exhaustive over secrets |z| < 2^(a+2) at λ = 12, a = 4 with 100 splits each.
    #[test]
    fn truncation_closeness_exhaustive_small_ring() {
        let ring = Ring::<u16>::new(12).unwrap();
        let a = 4;
        let bound = 1i64 << (a + 2);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let (mut wraps, mut trials, mut expected) = (0u64, 0u64, 0f64);
        for z in -(bound - 1)..bound {
            let zr = ring.from_i64(z);
            let exact = z >> a;
            for _ in 0..100 {
                let r: u16 = ring.random(&mut rng);
                let (sa, sb) = (ring.add(zr, r), ring.neg(r));
                let out = ring.add(
                    truncate_share(sa, Role::A, a, &ring),
                    truncate_share(sb, Role::B, a, &ring),
                );
                let diff = ring.to_signed(ring.sub(out, ring.from_i64(exact)));
                // wrap predicate: the unsigned sum r + z leaves [0, 2^λ)
                let wrapped = (r as i64 + z) >= (1 << 12) || (r as i64 + z) < 0;
                if wrapped {
                    wraps += 1;
                } else {
                    assert!((0..=1).contains(&diff), "z={z} r={r} diff={diff}");
                }
                trials += 1;
            }
            expected += z.unsigned_abs() as f64 / 4096.0 * 100.0;
        }
        let rate = wraps as f64 / trials as f64;
        let target = (2f64).powi(a as i32 + 1 - 12);
        let sigma = (target * (1.0 - target) / trials as f64).sqrt();
        assert!((rate - target).abs() <= 3.0 * sigma, "rate {rate} target {target}");
        let exact_rate = expected / trials as f64;
        assert!((exact_rate - target).abs() < 1e-3);
    }

    proptest! {
        #[test]
        fn grid_round_trip(k in -(1i64 << 26)..(1i64 << 26)) {
            let p = p12();
            let x = k as f64 / 4096.0;
            let v: u64 = encode(x, &p).unwrap();
            prop_assert_eq!(decode::<u64, f64>(v, &p), x);
        }

        #[test]
        fn encode_is_additive_on_grid(i in -(1i64 << 25)..(1i64 << 25), j in -(1i64 << 25)..(1i64 << 25)) {
            let p = p12();
            let (x, y) = (i as f64 / 4096.0, j as f64 / 4096.0);
            let ex: u64 = encode(x, &p).unwrap();
            let ey: u64 = encode(y, &p).unwrap();
            let exy: u64 = encode(x + y, &p).unwrap();
            prop_assert_eq!(ex.wrapping_add(ey), exy);
        }

        #[test]
        fn truncated_shares_within_one_ulp(z in -(1i64 << 40)..(1i64 << 40), r in any::<u64>()) {
            let ring = Ring::<u64>::new(64).unwrap();
            let zr = ring.from_i64(z);
            let out = ring.add(
                truncate_share(ring.add(zr, r), Role::A, 12, &ring),
                truncate_share(ring.neg(r), Role::B, 12, &ring),
            );
            let wrapped = (r as i128 + z as i128) >= (1i128 << 64) || (r as i128 + z as i128) < 0;
            prop_assume!(!wrapped);
            let diff = ring.to_signed(ring.sub(out, ring.from_i64(z >> 12)));
            prop_assert!((0..=1).contains(&diff));
        }
    }

    #[test]
    fn f32_encode_matches_f64_on_coarse_grid() {
        let p = FixedPointParams::new(4, 3, 16).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let k: i32 = rng.gen_range(-127..128);
            let x = k as f64 / 16.0;
            assert_eq!(encode::<u16, f64>(x, &p).unwrap(), encode::<u16, f32>(x as f32, &p).unwrap());
        }
    }
}
