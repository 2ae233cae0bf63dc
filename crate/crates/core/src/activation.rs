//! The clipped-ReLU activation `ρ` evaluated on shares.
//!
//! `ρ(v)` is 0 below `-1/2`, `v + 1/2` up to `1/2`, and 1 above. With
//! `z' = z + 1/2` the protocol reads the sign of `z'` from bit `a + b` of a
//! partial decomposition and whether `z' >= 1` from an OR over the integer
//! bits `a..a+b`, converts both flags to the ring and selects
//! `pos * (geq1 ? 1 : z')` with two ring multiplications. No shared value is
//! ever opened.

use crate::bits::PackedBits;
use crate::bitops::{convert_2_to_ring, decompose_requests, decompose_sliced, not_share, or_requests, or_sliced};
use crate::engine::Session;
use crate::error::Result;
use crate::fixedpoint::FixedPointParams;
use crate::randomness::{plan_composenet, Request};
use crate::ring::Ring;
use crate::scalar::{Real, RingWord};

/// Shares of the protocol's intermediate values, kept for inspection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActivationTrace<W> {
    pub shifted: Vec<W>,
    pub pos_bits: PackedBits,
    pub geq1_bits: PackedBits,
    pub pos: Vec<W>,
    pub geq1: Vec<W>,
    pub r: Vec<W>,
}

/// `ρ` over the reals.
pub fn rho<F: Real>(v: F) -> F {
    let half = F::from_f64(0.5).expect("0.5 is representable");
    if v < -half {
        F::zero()
    } else if v < half {
        v + half
    } else {
        F::one()
    }
}

/// `ρ` on an encoded value, mirroring the protocol's bit tests (so values
/// outside the supported range behave as they would under the protocol).
pub fn rho_fixed<W: RingWord>(z: W, p: &FixedPointParams, ring: &Ring<W>) -> W {
    let (a, b) = (p.frac_bits, p.int_bits);
    let shifted = ring.add(z, ring.pow2(a - 1));
    let pos = !ring.bit(shifted, a + b);
    let geq1 = (a..a + b).any(|i| ring.bit(shifted, i));
    match (pos, geq1) {
        (false, _) => W::zero(),
        (true, true) => ring.pow2(a),
        (true, false) => shifted,
    }
}

pub fn batch_activate_traced<W: RingWord>(
    sess: &mut Session<W>,
    zs: &[W],
    p: &FixedPointParams,
) -> Result<(Vec<W>, ActivationTrace<W>)> {
    let ring = *sess.ring();
    let (a, b) = (p.frac_bits, p.int_bits);
    let n = zs.len();
    let alice = sess.role().is_alice();
    let half = ring.pow2(a - 1);
    let shifted: Vec<W> = zs
        .iter()
        .map(|&z| if alice { ring.add(z, half) } else { z })
        .collect();

    let slices = decompose_sliced(sess, &shifted, p.activation_bits() as usize)?;
    let pos_bits = not_share(sess, &slices[(a + b) as usize]);
    let geq1_bits = or_sliced(sess, &slices[a as usize..(a + b) as usize])?;

    let flags = convert_2_to_ring(sess, &PackedBits::concat([&pos_bits, &geq1_bits]))?;
    let (pos, geq1) = flags.split_at(n);

    // r = 2^a geq1 + (1 - geq1) z'
    let gz = sess.batch_mul(geq1, &shifted)?;
    let one = ring.pow2(a);
    let r: Vec<W> = (0..n)
        .map(|i| ring.sub(ring.add(ring.mul(one, geq1[i]), shifted[i]), gz[i]))
        .collect();
    let out = sess.batch_mul(pos, &r)?;

    let trace = ActivationTrace {
        shifted,
        pos_bits,
        geq1_bits,
        pos: pos.to_vec(),
        geq1: geq1.to_vec(),
        r,
    };
    Ok((out, trace))
}

/// Elementwise `ρ`; the round count does not depend on the batch size.
pub fn batch_activate<W: RingWord>(
    sess: &mut Session<W>,
    zs: &[W],
    p: &FixedPointParams,
) -> Result<Vec<W>> {
    Ok(batch_activate_traced(sess, zs, p)?.0)
}

pub fn activate<W: RingWord>(sess: &mut Session<W>, z: W, p: &FixedPointParams) -> Result<W> {
    Ok(batch_activate(sess, &[z], p)?[0])
}

/// Randomness consumed by activating a batch of `n`.
pub fn activation_requests(n: usize, p: &FixedPointParams) -> Vec<Request> {
    let mut out = decompose_requests(p.activation_bits() as usize, n);
    out.extend(or_requests(p.int_bits as usize, n));
    out.push(Request::Conversion { n: 2 * n });
    out.push(Request::RingTriples { n });
    out.push(Request::RingTriples { n });
    out
}

/// Rounds of one batched activation.
pub fn activation_rounds(p: &FixedPointParams) -> usize {
    let bits = p.activation_bits() as usize;
    let depth = plan_composenet(bits).map(|s| s.depth()).unwrap_or(0);
    let or_depth = (p.int_bits as usize).next_power_of_two().trailing_zeros() as usize;
    (depth + 1) + or_depth + 2 + 2
}

/// `Z_2` multiplications per activated element.
pub fn activation_bit_mults(p: &FixedPointParams) -> u64 {
    let bits = p.activation_bits() as usize;
    let comps = plan_composenet(bits).map(|s| s.compositions()).unwrap_or(0);
    (bits + 2 * comps + p.int_bits as usize - 1) as u64
}

/// `Z_{2^λ}` multiplications per activated element: two conversions and two selections.
pub const ACTIVATION_RING_MULTS: u64 = 4;
