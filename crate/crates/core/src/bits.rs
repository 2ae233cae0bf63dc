//! Bit vectors packed LSB-first into 64-bit words.

use rand::Rng;

use crate::scalar::RingWord;

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct PackedBits {
    len: usize,
    words: Vec<u64>,
}

#[inline]
pub fn word_count(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl PackedBits {
    pub fn zeros(len: usize) -> Self {
        PackedBits {
            len,
            words: vec![0; word_count(len)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut b = PackedBits {
            len,
            words: vec![u64::MAX; word_count(len)],
        };
        b.clear_tail();
        b
    }

    /// Takes ownership of `words`; bits past `len` are cleared.
    pub fn from_words(mut words: Vec<u64>, len: usize) -> Self {
        words.resize(word_count(len), 0);
        let mut b = PackedBits { len, words };
        b.clear_tail();
        b
    }

    pub fn from_bools<I: IntoIterator<Item = bool>>(it: I) -> Self {
        let mut b = PackedBits::zeros(0);
        for bit in it {
            b.push(bit);
        }
        b
    }

    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let words = (0..word_count(len)).map(|_| rng.gen()).collect();
        PackedBits::from_words(words, len)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn into_words(self) -> Vec<u64> {
        self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.len);
        let m = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, bit);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn clear_tail(&mut self) {
        let r = self.len % 64;
        if r != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << r) - 1;
            }
        }
    }

    pub fn xor(&self, other: &PackedBits) -> PackedBits {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    pub fn xor_assign(&mut self, other: &PackedBits) {
        assert_eq!(self.len, other.len, "bit vector length mismatch");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn and(&self, other: &PackedBits) -> PackedBits {
        assert_eq!(self.len, other.len, "bit vector length mismatch");
        let words = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| a & b)
            .collect();
        PackedBits {
            len: self.len,
            words,
        }
    }

    pub fn not(&self) -> PackedBits {
        let mut out = PackedBits {
            len: self.len,
            words: self.words.iter().map(|w| !w).collect(),
        };
        out.clear_tail();
        out
    }

    /// Appends `other` at bit offset `self.len()`.
    pub fn extend(&mut self, other: &PackedBits) {
        let shift = self.len % 64;
        if shift == 0 {
            self.words.extend_from_slice(&other.words);
            self.len += other.len;
            self.words.truncate(word_count(self.len));
            return;
        }
        for &w in &other.words {
            *self.words.last_mut().expect("non-aligned length has a word") |= w << shift;
            self.words.push(w >> (64 - shift));
        }
        self.len += other.len;
        self.words.truncate(word_count(self.len));
        self.clear_tail();
    }

    /// Copies `len` bits starting at bit `start`.
    pub fn extract(&self, start: usize, len: usize) -> PackedBits {
        assert!(start + len <= self.len, "extract out of range");
        let shift = start % 64;
        let base = start / 64;
        let n = word_count(len);
        let mut words = Vec::with_capacity(n);
        for k in 0..n {
            let lo = self.words[base + k] >> shift;
            let hi = if shift == 0 {
                0
            } else {
                self.words.get(base + k + 1).map_or(0, |w| w << (64 - shift))
            };
            words.push(lo | hi);
        }
        PackedBits::from_words(words, len)
    }

    pub fn concat<'a, I: IntoIterator<Item = &'a PackedBits>>(parts: I) -> PackedBits {
        let mut out = PackedBits::zeros(0);
        for p in parts {
            out.extend(p);
        }
        out
    }
}

/// Bit-slices `values`: slice `j` holds bit `j` of every value, element `e` at position `e`.
pub fn transpose_to_slices<W: RingWord>(values: &[W], nbits: u32) -> Vec<PackedBits> {
    let n = values.len();
    let mut slices: Vec<Vec<u64>> = vec![vec![0u64; word_count(n)]; nbits as usize];
    for (e, v) in values.iter().enumerate() {
        let v = v.to_word();
        let (wi, bi) = (e / 64, e % 64);
        for (j, slice) in slices.iter_mut().enumerate() {
            slice[wi] |= ((v >> j) & 1) << bi;
        }
    }
    slices
        .into_iter()
        .map(|w| PackedBits::from_words(w, n))
        .collect()
}

/// Inverse of [`transpose_to_slices`]: gathers slice bits back into per-element words.
pub fn transpose_from_slices(slices: &[PackedBits]) -> Vec<u64> {
    let n = slices.first().map_or(0, |s| s.len());
    let mut out = vec![0u64; n];
    for (j, s) in slices.iter().enumerate() {
        for (e, v) in out.iter_mut().enumerate() {
            *v |= (s.get(e) as u64) << j;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ones_clears_tail() {
        let b = PackedBits::ones(70);
        assert_eq!(b.words()[1], 0b11_1111);
        assert_eq!(b.count_ones(), 70);
        assert_eq!(b.not().count_ones(), 0);
    }

    #[test]
    fn transpose_small() {
        let vals: Vec<u8> = vec![0b1010, 0b0110, 0b0001];
        let s = transpose_to_slices(&vals, 4);
        assert_eq!(s[0].iter().collect::<Vec<_>>(), vec![false, false, true]);
        assert_eq!(s[1].iter().collect::<Vec<_>>(), vec![true, true, false]);
        assert_eq!(s[3].iter().collect::<Vec<_>>(), vec![true, false, false]);
        assert_eq!(transpose_from_slices(&s), vec![0b1010, 0b0110, 0b0001]);
    }

    proptest! {
        #[test]
        fn extend_then_extract(a in proptest::collection::vec(any::<bool>(), 0..200),
                               b in proptest::collection::vec(any::<bool>(), 0..200)) {
            let pa = PackedBits::from_bools(a.iter().copied());
            let pb = PackedBits::from_bools(b.iter().copied());
            let mut cat = pa.clone();
            cat.extend(&pb);
            prop_assert_eq!(cat.len(), a.len() + b.len());
            prop_assert_eq!(cat.extract(0, a.len()), pa);
            prop_assert_eq!(cat.extract(a.len(), b.len()), pb);
        }
    }
}
