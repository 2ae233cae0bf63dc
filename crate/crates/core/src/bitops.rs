//! Boolean sub-protocols: bit decomposition, OR, and conversion back to the ring.
//!
//! Shares of a batch of bit positions are kept bit-sliced: slice `j` is a
//! [`PackedBits`] holding this party's XOR share of bit `j` of every
//! element. Bit order is LSB first throughout.
//!
//! Decomposition rests on the fact that the XOR of the parties' share bits
//! differs from the bits of their sum exactly by the carries. With
//! propagate `p_j = a_j ^ b_j` and generate `g_j = a_j b_j`, bit `j` of the
//! sum is `p_j ^ c_{j-1}`. The carries come either from a ripple chain
//! (linear depth) or from a composition network over the carry matrices
//! (logarithmic depth).

use std::collections::HashMap;

use crate::bits::{transpose_from_slices, transpose_to_slices, PackedBits};
use crate::engine::{Session, TraceValue};
use crate::error::{Error, Result};
use crate::randomness::{parse_composenet, plan_composenet, Request};
use crate::scalar::RingWord;

/// Shared propagate and generate signals of a carry matrix, one bit per element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CarryPair {
    pub p: PackedBits,
    pub g: PackedBits,
}

/// Shares of the constant `NOT x`: Alice flips her share.
pub fn not_share<W: RingWord>(sess: &Session<W>, x: &PackedBits) -> PackedBits {
    if sess.role().is_alice() {
        x.not()
    } else {
        x.clone()
    }
}

fn check_bits<W: RingWord>(sess: &Session<W>, bits: usize) -> Result<()> {
    let lambda = sess.ring().bits() as usize;
    if bits == 0 || bits > lambda {
        return Err(Error::argument(format!(
            "cannot decompose {bits} bits of a {lambda}-bit ring"
        )));
    }
    Ok(())
}

/// Operands of the generate products: Alice multiplies her bits by Bob's.
fn generate_operands<W: RingWord>(sess: &Session<W>, own: &PackedBits) -> (PackedBits, PackedBits) {
    let zero = PackedBits::zeros(own.len());
    if sess.role().is_alice() {
        (own.clone(), zero)
    } else {
        (zero, own.clone())
    }
}

/// `(high ∘ low)` for one batch of carry matrices, in one round.
pub fn compose_carry<W: RingWord>(
    sess: &mut Session<W>,
    high: &CarryPair,
    low: &CarryPair,
) -> Result<CarryPair> {
    let n = high.p.len();
    let x = PackedBits::concat([&high.p, &high.p]);
    let y = PackedBits::concat([&low.p, &low.g]);
    let prod = sess.and_bits(&x, &y)?;
    Ok(CarryPair {
        p: prod.extract(0, n),
        g: prod.extract(n, n).xor(&high.g),
    })
}

/// Ripple-carry decomposition of the low `bits` bits: one round for all
/// generate products, then two rounds per bit position.
pub fn decompose_ripple<W: RingWord>(
    sess: &mut Session<W>,
    xs: &[W],
    bits: usize,
) -> Result<Vec<PackedBits>> {
    check_bits(sess, bits)?;
    let n = xs.len();
    let own = transpose_to_slices(xs, bits as u32);
    let (x, y) = generate_operands(sess, &PackedBits::concat(&own));
    let g = sess.and_bits(&x, &y)?;

    let mut out = Vec::with_capacity(bits);
    out.push(own[0].clone());
    let mut carry = g.extract(0, n);
    for i in 1..bits {
        let d = not_share(sess, &g.extract(i * n, n));
        let ec = sess.and_bits(&own[i], &carry)?;
        let e = not_share(sess, &ec);
        out.push(own[i].xor(&carry));
        let c = sess.and_bits(&e, &d)?;
        carry = not_share(sess, &c);
    }
    Ok(out)
}

/// Decomposition of the low `bits` bits through the composition network,
/// bit-sliced over the batch. Returns `bits` slices of `xs.len()` bits.
///
/// Rounds: one for the generate products plus one per network layer,
/// independent of the batch size.
pub fn decompose_sliced<W: RingWord>(
    sess: &mut Session<W>,
    xs: &[W],
    bits: usize,
) -> Result<Vec<PackedBits>> {
    check_bits(sess, bits)?;
    let n = xs.len();
    let own = transpose_to_slices(xs, bits as u32);
    if bits == 1 {
        return Ok(own);
    }
    let schedule = plan_composenet(bits)?;
    let words = sess.fetch(&Request::ComposeNet { bits, batch: n })?;
    let mat = parse_composenet(&schedule, n, &words)?;

    let (x, y) = generate_operands(sess, &PackedBits::concat(&own));
    let g = sess.and_with(&x, &y, &mat.setup)?;

    let mut nodes: Vec<Option<CarryPair>> = vec![None; schedule.nodes().len()];
    for j in 0..schedule.base_matrices() {
        nodes[j] = Some(CarryPair {
            p: own[j].clone(),
            g: g.extract(j * n, n),
        });
    }
    if sess.tracing() {
        for node in nodes.iter().flatten() {
            sess.record("carry_p", || TraceValue::Bits(node.p.clone()));
            sess.record("carry_g", || TraceValue::Bits(node.g.clone()));
        }
    }

    let mut mask_at: HashMap<usize, usize> = HashMap::new();
    for (k, &id) in schedule.publish().iter().flatten().enumerate() {
        mask_at.insert(id, 2 * k * n);
    }
    // Opened (masked) signals and this party's mask shares, per published node.
    let mut opened: HashMap<usize, CarryPair> = HashMap::new();
    let mut masks: HashMap<usize, CarryPair> = HashMap::new();
    let alice = sess.role().is_alice();
    let mut composition = 0usize;

    for (layer, comps) in schedule.layers().iter().enumerate() {
        let publish = &schedule.publish()[layer];
        let mut parts = Vec::with_capacity(2 * publish.len());
        for &id in publish {
            let at = mask_at[&id];
            let m = CarryPair {
                p: mat.masks.extract(at, n),
                g: mat.masks.extract(at + n, n),
            };
            let node = nodes[id].as_ref().expect("published nodes exist");
            parts.push(node.p.xor(&m.p));
            parts.push(node.g.xor(&m.g));
            masks.insert(id, m);
        }
        let refs: Vec<&PackedBits> = parts.iter().collect();
        let mut values = sess.open_bits(&refs)?.into_iter();
        for &id in publish {
            let p = values.next().expect("two parts per node");
            let g = values.next().expect("two parts per node");
            opened.insert(id, CarryPair { p, g });
        }

        for c in comps {
            let (oh, ol) = (&opened[&c.high], &opened[&c.low]);
            let (mh, ml) = (&masks[&c.high], &masks[&c.low]);
            let w_pp = mat.products.extract(2 * composition * n, n);
            let w_pg = mat.products.extract((2 * composition + 1) * n, n);
            composition += 1;

            // [xy] = w ^ X[u_y] ^ Y[u_x] ^ XY (the last term on Alice only)
            let mut p = w_pp.xor(&oh.p.and(&ml.p));
            p.xor_assign(&ol.p.and(&mh.p));
            let mut pg = w_pg.xor(&oh.p.and(&ml.g));
            pg.xor_assign(&ol.g.and(&mh.p));
            if alice {
                p.xor_assign(&oh.p.and(&ol.p));
                pg.xor_assign(&oh.p.and(&ol.g));
            }
            let high_g = &nodes[c.high].as_ref().expect("inputs exist").g;
            let g = pg.xor(high_g);
            sess.record("carry_p", || TraceValue::Bits(p.clone()));
            sess.record("carry_g", || TraceValue::Bits(g.clone()));
            nodes[c.out] = Some(CarryPair { p, g });
        }
        sess.count_bit_mults(2 * n * comps.len());
    }

    let mut out = Vec::with_capacity(bits);
    out.push(own[0].clone());
    for j in 2..=bits {
        let carry = &nodes[schedule.prefix_node(j - 1)]
            .as_ref()
            .expect("prefix nodes are computed")
            .g;
        out.push(own[j - 1].xor(carry));
    }
    Ok(out)
}

/// Decomposes every element; returns one `bits`-long vector per element.
pub fn batch_decompose<W: RingWord>(
    sess: &mut Session<W>,
    xs: &[W],
    bits: usize,
) -> Result<Vec<PackedBits>> {
    let slices = decompose_sliced(sess, xs, bits)?;
    Ok(transpose_from_slices(&slices)
        .into_iter()
        .map(|v| PackedBits::from_words(vec![v], bits))
        .collect())
}

/// Low `bits` bits of a single shared value.
pub fn decompose_opt<W: RingWord>(sess: &mut Session<W>, x: W, bits: usize) -> Result<PackedBits> {
    Ok(batch_decompose(sess, &[x], bits)?.remove(0))
}

/// Elementwise OR across `slices` as NOT of a balanced AND tree over the negations.
pub fn or_sliced<W: RingWord>(sess: &mut Session<W>, slices: &[PackedBits]) -> Result<PackedBits> {
    if slices.is_empty() {
        return Err(Error::argument("OR of zero bits"));
    }
    let n = slices[0].len();
    let mut level: Vec<PackedBits> = slices.iter().map(|s| not_share(sess, s)).collect();
    while level.len() > 1 {
        let pairs = level.len() / 2;
        let left = PackedBits::concat(level.iter().step_by(2).take(pairs));
        let right = PackedBits::concat(level.iter().skip(1).step_by(2).take(pairs));
        let prod = sess.and_bits(&left, &right)?;
        let mut next: Vec<PackedBits> = (0..pairs).map(|i| prod.extract(i * n, n)).collect();
        if level.len() % 2 == 1 {
            next.push(level.pop().expect("odd level has a last element"));
        }
        level = next;
    }
    Ok(not_share(sess, &level[0]))
}

/// Shared OR of the `k` bits of one shared vector.
pub fn or_tree<W: RingWord>(sess: &mut Session<W>, bits: &PackedBits) -> Result<bool> {
    let slices: Vec<PackedBits> = bits.iter().map(|b| PackedBits::from_bools([b])).collect();
    Ok(or_sliced(sess, &slices)?.get(0))
}

/// Converts XOR-shared bits into additive ring shares in two rounds:
/// each party re-shares its bit, then `z = x_A + x_B - 2 x_A x_B`.
pub fn convert_2_to_ring<W: RingWord>(sess: &mut Session<W>, bits: &PackedBits) -> Result<Vec<W>> {
    let ring = *sess.ring();
    let n = bits.len();
    let keep: Vec<W> = (0..n).map(|_| ring.random(sess.rng())).collect();
    let send: Vec<W> = (0..n)
        .map(|i| ring.sub(if bits.get(i) { W::one() } else { W::zero() }, keep[i]))
        .collect();
    let received = sess.reshare(&send)?;
    let (xa, xb) = if sess.role().is_alice() {
        (keep, received)
    } else {
        (received, keep)
    };
    let y = sess.conversion_mul(&xa, &xb)?;
    let two = ring.from_u64(2);
    Ok((0..n)
        .map(|i| ring.sub(ring.add(xa[i], xb[i]), ring.mul(two, y[i])))
        .collect())
}

/// Randomness the decomposition of a `batch` of values consumes.
pub fn decompose_requests(bits: usize, batch: usize) -> Vec<Request> {
    if bits <= 1 {
        Vec::new()
    } else {
        vec![Request::ComposeNet { bits, batch }]
    }
}

/// Randomness `or_sliced` over `k` slices of `batch` bits consumes.
pub fn or_requests(k: usize, batch: usize) -> Vec<Request> {
    let mut out = Vec::new();
    let mut len = k;
    while len > 1 {
        out.push(Request::BitTriples { n: (len / 2) * batch });
        len = len.div_ceil(2);
    }
    out
}
