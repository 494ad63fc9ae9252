//! Packed bit strings used for sifted keys, final keys and OTP material.

use serde::{Deserialize, Serialize};

/// A growable bit string packed into 64-bit words, LSB-first within each word.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            words: Vec::with_capacity(bits.div_ceil(64)),
            len: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, bit: bool) {
        let word = self.len / 64;
        if word == self.words.len() {
            self.words.push(0);
        }
        if bit {
            self.words[word] |= 1u64 << (self.len % 64);
        }
        self.len += 1;
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Backing words; bits past `len` in the last word are zero.
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Number of positions at which `self` and `other` differ (over the shorter length).
    pub fn hamming_distance(&self, other: &BitString) -> usize {
        let n = self.len.min(other.len);
        let full = n / 64;
        let mut d: usize = 0;
        for i in 0..full {
            d += (self.words[i] ^ other.words[i]).count_ones() as usize;
        }
        for i in full * 64..n {
            if self.get(i) != other.get(i) {
                d += 1;
            }
        }
        d
    }

    pub fn xor_in_place(&mut self, other: &BitString) {
        assert_eq!(self.len, other.len, "xor of unequal-length bit strings");
        for (a, b) in self.words.iter_mut().zip(other.words.iter()) {
            *a ^= *b;
        }
    }

    /// Extract `count` bits starting at `start` into a new string.
    pub fn slice(&self, start: usize, count: usize) -> BitString {
        assert!(start + count <= self.len);
        let mut out = BitString::with_capacity(count);
        for i in start..start + count {
            out.push(self.get(i));
        }
        out
    }

    pub fn extend_from(&mut self, other: &BitString) {
        for b in other.iter() {
            self.push(b);
        }
    }

    /// Pack into bytes, LSB-first; the final partial byte is zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for (i, byte) in out.iter_mut().enumerate() {
            let word = self.words[i / 8];
            *byte = (word >> (8 * (i % 8))) as u8;
        }
        if self.len % 8 != 0 {
            let last = out.len() - 1;
            out[last] &= (1u8 << (self.len % 8)) - 1;
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], len: usize) -> BitString {
        assert!(len <= bytes.len() * 8);
        let mut words = vec![0u64; len.div_ceil(64)];
        for (i, &b) in bytes.iter().enumerate().take(len.div_ceil(8)) {
            words[i / 8] |= (b as u64) << (8 * (i % 8));
        }
        let mut s = BitString { words, len };
        s.mask_tail();
        s
    }

    fn mask_tail(&mut self) {
        if self.len % 64 != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (self.len % 64)) - 1;
            }
        }
    }
}

impl FromIterator<bool> for BitString {
    fn from_iter<T: IntoIterator<Item = bool>>(iter: T) -> Self {
        let mut s = BitString::new();
        for b in iter {
            s.push(b);
        }
        s
    }
}
