//! Logarithmic-depth network composing carry matrices.
//!
//! Matrix `M_j = [[p_j, g_j], [0, 1]]` advances the carry past bit `j`; the
//! carry out of bit `j` is the upper-right entry of `M_{1.j} = M_j ... M_1`.
//! A span `M_{s.e}` of length `L > 1` is built as `M_{s+h.e} ∘ M_{s.s+h-1}`
//! with `h` the largest power of two below `L`, and sits at layer
//! `ceil(log2 L)`. Every prefix needed for the low `p` bits is reachable in
//! `ceil(log2(p - 1))` layers.
//!
//! The network spans all `p` matrices when that does not deepen it (the
//! extra prefix `M_{1.p}` yields the carry-out for free), and `p - 1`
//! matrices otherwise.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// The composition of matrices `low..=high` (1-based bit positions).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Span {
    pub low: usize,
    pub high: usize,
}

impl Span {
    pub fn len(&self) -> usize {
        self.high - self.low + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Layer at which the span is produced; base matrices are layer 0.
    pub fn layer(&self) -> usize {
        ceil_log2(self.len())
    }
}

/// One node-pair composition: `out = high ∘ low`, `high` covering the more significant bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Composition {
    pub out: usize,
    pub high: usize,
    pub low: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompositionSchedule {
    bits: usize,
    nodes: Vec<Span>,
    layers: Vec<Vec<Composition>>,
    publish: Vec<Vec<usize>>,
    prefix: Vec<usize>,
}

pub(crate) fn ceil_log2(n: usize) -> usize {
    assert!(n > 0);
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

/// Plans the network for a decomposition of the low `bits` bits.
pub fn plan_composenet(bits: usize) -> Result<CompositionSchedule> {
    if bits < 2 {
        return Err(Error::argument(format!(
            "a composition network needs at least 2 bits, got {bits}"
        )));
    }
    let top = if (bits - 1).is_power_of_two() {
        bits - 1
    } else {
        bits
    };

    let mut b = Builder {
        ids: HashMap::new(),
        nodes: (1..=top).map(|j| Span { low: j, high: j }).collect(),
        comps: Vec::new(),
    };
    for (i, span) in b.nodes.clone().into_iter().enumerate() {
        b.ids.insert(span, i);
    }
    let prefix: Vec<usize> = (1..=top).map(|j| b.build(Span { low: 1, high: j })).collect();

    let depth = b.comps.iter().map(|c| b.nodes[c.out].layer()).max().unwrap_or(0);
    let mut layers = vec![Vec::new(); depth];
    for c in &b.comps {
        layers[b.nodes[c.out].layer() - 1].push(*c);
    }
    for layer in &mut layers {
        layer.sort_by_key(|c| b.nodes[c.out]);
    }

    // A node is opened (masked) once, in the round right after it is created,
    // if any later composition reads it.
    let mut used = vec![false; b.nodes.len()];
    for c in &b.comps {
        used[c.high] = true;
        used[c.low] = true;
    }
    let mut publish = vec![Vec::new(); depth];
    for (id, span) in b.nodes.iter().enumerate() {
        if used[id] {
            publish[span.layer()].push(id);
        }
    }
    for list in &mut publish {
        list.sort_by_key(|&id| b.nodes[id]);
    }

    Ok(CompositionSchedule {
        bits,
        nodes: b.nodes,
        layers,
        publish,
        prefix,
    })
}

struct Builder {
    ids: HashMap<Span, usize>,
    nodes: Vec<Span>,
    comps: Vec<Composition>,
}

impl Builder {
    fn build(&mut self, span: Span) -> usize {
        if let Some(&id) = self.ids.get(&span) {
            return id;
        }
        let half = 1usize << (ceil_log2(span.len()) - 1);
        let low = self.build(Span {
            low: span.low,
            high: span.low + half - 1,
        });
        let high = self.build(Span {
            low: span.low + half,
            high: span.high,
        });
        let out = self.nodes.len();
        self.nodes.push(span);
        self.ids.insert(span, out);
        self.comps.push(Composition { out, high, low });
        out
    }
}

impl CompositionSchedule {
    /// Number of low-order bits the network decomposes.
    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Number of base matrices the network spans (`bits` or `bits - 1`).
    pub fn base_matrices(&self) -> usize {
        self.prefix.len()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn nodes(&self) -> &[Span] {
        &self.nodes
    }

    pub fn span(&self, id: usize) -> Span {
        self.nodes[id]
    }

    pub fn layers(&self) -> &[Vec<Composition>] {
        &self.layers
    }

    /// `publish()[l]` lists the nodes whose masked values travel in the round of layer `l + 1`.
    pub fn publish(&self) -> &[Vec<usize>] {
        &self.publish
    }

    /// Node id of the prefix `M_{1.j}`, `1 <= j <= base_matrices()`.
    pub fn prefix_node(&self, j: usize) -> usize {
        self.prefix[j - 1]
    }

    pub fn solution_nodes(&self) -> &[usize] {
        &self.prefix
    }

    pub fn compositions(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn published_nodes(&self) -> usize {
        self.publish.iter().map(Vec::len).sum()
    }

    /// Fresh two-bit masks per round, index 0 being the base matrices.
    pub fn fresh_masks(&self) -> Vec<usize> {
        self.publish.iter().map(Vec::len).collect()
    }

    /// Opened bits per decomposed value: the setup multiplication (`2p`)
    /// plus two bits per published node.
    pub fn mask_bits(&self) -> usize {
        2 * self.bits + 2 * self.published_nodes()
    }
}

/// Closed-form transfer `4p + 2 * sum_{i=1}^{ceil(log(p-1)) - 1} (p/2 + 1 - 2^(i-1))` in bits.
pub fn mask_bits_formula(bits: usize) -> f64 {
    let p = bits as f64;
    let depth = if bits >= 2 { ceil_log2(bits - 1) } else { 0 };
    let layered: f64 = (1..depth)
        .map(|i| p / 2.0 + 1.0 - (1u64 << (i - 1)) as f64)
        .sum();
    4.0 * p + 2.0 * layered
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn check_structure(s: &CompositionSchedule) {
        let mut available: HashSet<usize> = (0..s.base_matrices()).collect();
        for (l, layer) in s.layers().iter().enumerate() {
            for c in layer {
                let (o, h, lo) = (s.span(c.out), s.span(c.high), s.span(c.low));
                assert_eq!(lo.low, o.low);
                assert_eq!(h.high, o.high);
                assert_eq!(lo.high + 1, h.low);
                assert!(available.contains(&c.high) && available.contains(&c.low));
                assert_eq!(o.layer(), l + 1);
            }
            for c in layer {
                available.insert(c.out);
            }
        }
        for j in 1..s.bits() {
            let span = s.span(s.prefix_node(j));
            assert_eq!(span, Span { low: 1, high: j });
        }
        // every solution node appears exactly once
        let sol: HashSet<_> = s.solution_nodes().iter().collect();
        assert_eq!(sol.len(), s.solution_nodes().len());
    }

    #[test]
    fn seventeen_bits() {
        let s = plan_composenet(17).unwrap();
        assert_eq!(s.depth(), 4);
        assert_eq!(s.base_matrices(), 16);
        let sol: Vec<Span> = s.solution_nodes().iter().map(|&i| s.span(i)).collect();
        assert_eq!(sol, (1..=16).map(|j| Span { low: 1, high: j }).collect::<Vec<_>>());
        check_structure(&s);
    }

    #[test]
    fn two_bits_needs_no_composition() {
        let s = plan_composenet(2).unwrap();
        assert_eq!(s.depth(), 0);
        assert_eq!(s.compositions(), 0);
        assert_eq!(s.span(s.prefix_node(1)), Span { low: 1, high: 1 });
        assert_eq!(s.mask_bits(), 4);
    }

    #[test]
    fn depth_is_ceil_log_of_bits_minus_one() {
        for p in 2..=64 {
            let s = plan_composenet(p).unwrap();
            let expect = (p as f64 - 1.0).log2().ceil() as usize;
            assert_eq!(s.depth(), expect, "p = {p}");
            check_structure(&s);
        }
        assert_eq!(plan_composenet(64).unwrap().depth(), 6);
        assert!(plan_composenet(1).is_err());
    }

    #[test]
    fn sixty_four_bits_transfer_matches_closed_form() {
        let s = plan_composenet(64).unwrap();
        assert_eq!(s.fresh_masks(), vec![64, 32, 31, 29, 25, 17]);
        assert_eq!(s.mask_bits(), 524);
        assert_eq!(mask_bits_formula(64), 524.0);
    }

    /// Brute-force count of fresh masks: nodes first read at a later layer,
    /// bucketed by the layer that created them.
    #[test]
    fn fresh_masks_match_per_layer_formula() {
        for p in [8usize, 16, 32, 64] {
            let s = plan_composenet(p).unwrap();
            let mut created_and_used = vec![0usize; s.depth()];
            let mut seen = HashSet::new();
            for layer in s.layers() {
                for c in layer {
                    for n in [c.high, c.low] {
                        if seen.insert(n) {
                            created_and_used[s.span(n).layer()] += 1;
                        }
                    }
                }
            }
            assert_eq!(created_and_used, s.fresh_masks());
            assert_eq!(created_and_used[0], p);
            for (i, &c) in created_and_used.iter().enumerate().skip(1) {
                assert_eq!(c, p / 2 + 1 - (1 << (i - 1)), "p = {p}, layer {i}");
            }
            assert_eq!(s.mask_bits() as f64, mask_bits_formula(p));
        }
    }

    #[test]
    fn non_power_of_two_counts_within_rounding() {
        for p in [17usize, 29] {
            let s = plan_composenet(p).unwrap();
            let fresh = s.fresh_masks();
            for (i, &c) in fresh.iter().enumerate().skip(1) {
                let formula = p as f64 / 2.0 + 1.0 - (1u64 << (i - 1)) as f64;
                assert!(c as f64 <= formula + 0.5, "p={p} layer {i}: {c} vs {formula}");
            }
            assert!(s.mask_bits() as f64 <= mask_bits_formula(p));
        }
    }

    #[test]
    fn compositions_per_layer_at_most_half() {
        for p in [8usize, 16, 17, 29, 64] {
            let s = plan_composenet(p).unwrap();
            for layer in s.layers() {
                assert!(layer.len() <= p / 2);
            }
        }
    }
}
