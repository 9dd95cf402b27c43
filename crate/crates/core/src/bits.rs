//! Packed page-sized bit vectors and the host-side bitwise reference ops.

use std::fmt::Write as _;

use rand::Rng;

/// A logical page as a packed bit vector. Bit `i` lives in word `i / 64`,
/// position `i % 64`. Padding bits past `len` are always zero.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitPage {
    words: Vec<u64>,
    len: usize,
}

impl std::fmt::Debug for BitPage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.len <= 64 {
            let s: String = (0..self.len).map(|i| if self.get(i) { '1' } else { '0' }).collect();
            write!(f, "BitPage({s})")
        } else {
            write!(f, "BitPage(len={}, ones={})", self.len, self.count_ones())
        }
    }
}

impl BitPage {
    pub fn zeros(len: usize) -> Self {
        Self { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn ones(len: usize) -> Self {
        let mut p = Self { words: vec![u64::MAX; len.div_ceil(64)], len };
        p.clear_padding();
        p
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        Self::from_fn(bits.len(), |i| bits[i])
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut p = Self::zeros(len);
        for i in 0..len {
            if f(i) {
                p.words[i / 64] |= 1 << (i % 64);
            }
        }
        p
    }

    /// Uniformly random page.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut p = Self { words: (0..len.div_ceil(64)).map(|_| rng.random()).collect(), len };
        p.clear_padding();
        p
    }

    pub(crate) fn from_words(words: Vec<u64>, len: usize) -> Self {
        debug_assert_eq!(words.len(), len.div_ceil(64));
        let mut p = Self { words, len };
        p.clear_padding();
        p
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        let m = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn all_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn all_ones(&self) -> bool {
        self.count_ones() == self.len as u64
    }

    fn zip(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Self {
        assert_eq!(self.len, other.len, "page length mismatch");
        let words = self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect();
        Self::from_words(words, self.len)
    }

    pub fn and(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a | b)
    }

    pub fn xor(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a ^ b)
    }

    pub fn xnor(&self, other: &Self) -> Self {
        self.zip(other, |a, b| !(a ^ b))
    }

    pub fn nand(&self, other: &Self) -> Self {
        self.zip(other, |a, b| !(a & b))
    }

    pub fn nor(&self, other: &Self) -> Self {
        self.zip(other, |a, b| !(a | b))
    }

    pub fn not(&self) -> Self {
        Self::from_words(self.words.iter().map(|w| !w).collect(), self.len)
    }

    /// Number of positions where the two pages differ.
    pub fn hamming(&self, other: &Self) -> u64 {
        assert_eq!(self.len, other.len, "page length mismatch");
        self.words.iter().zip(&other.words).map(|(a, b)| (a ^ b).count_ones() as u64).sum()
    }

    /// Indices of set bits, ascending.
    pub fn ones_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let tz = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + tz)
            })
        })
    }

    /// Raw little-endian byte image; bit `i` is bit `i % 8` of byte `i / 8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        out.truncate(self.len.div_ceil(8));
        out
    }

    pub fn from_bytes(bytes: &[u8], len: usize) -> Self {
        assert!(bytes.len() * 8 >= len, "byte image shorter than {len} bits");
        Self::from_fn(len, |i| bytes[i / 8] >> (i % 8) & 1 == 1)
    }

    /// Hex dump, 32 bytes per line, each line prefixed with its byte offset.
    pub fn to_hex(&self) -> String {
        let mut s = String::new();
        for (row, chunk) in self.to_bytes().chunks(32).enumerate() {
            let _ = write!(s, "{:08x}:", row * 32);
            for b in chunk {
                let _ = write!(s, " {b:02x}");
            }
            s.push('\n');
        }
        s
    }

    fn clear_padding(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ones_has_clean_padding() {
        let p = BitPage::ones(70);
        assert_eq!(p.count_ones(), 70);
        assert_eq!(p.not().count_ones(), 0);
        assert!(p.all_ones());
    }

    #[test]
    fn hex_dump_layout() {
        let p = BitPage::from_bits(&[true, false, false, false, false, false, false, false, true]);
        assert_eq!(p.to_hex(), "00000000: 01 01\n");
    }

    proptest! {
        #[test]
        fn ops_agree_with_per_bit_logic(a in proptest::collection::vec(any::<bool>(), 1..300),
                                        seed in any::<u64>()) {
            let b: Vec<bool> = a.iter().enumerate().map(|(i, _)| (seed >> (i % 64)) & 1 == 1).collect();
            let pa = BitPage::from_bits(&a);
            let pb = BitPage::from_bits(&b);
            for i in 0..a.len() {
                prop_assert_eq!(pa.and(&pb).get(i), a[i] & b[i]);
                prop_assert_eq!(pa.or(&pb).get(i), a[i] | b[i]);
                prop_assert_eq!(pa.xnor(&pb).get(i), a[i] == b[i]);
                prop_assert_eq!(pa.nor(&pb).get(i), !(a[i] | b[i]));
            }
            prop_assert_eq!(BitPage::from_bytes(&pa.to_bytes(), a.len()), pa.clone());
            let ones: Vec<usize> = pa.ones_positions().collect();
            let expect: Vec<usize> = (0..a.len()).filter(|&i| a[i]).collect();
            prop_assert_eq!(ones, expect);
        }
    }
}
