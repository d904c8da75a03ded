//! Fixed-length bit vectors used for categorical masks and advanced-cut bits.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitMask {
    len: usize,
    words: Vec<u64>,
}

impl BitMask {
    pub fn zeros(len: usize) -> Self {
        BitMask {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut m = Self::zeros(len);
        for w in m.words.iter_mut() {
            *w = u64::MAX;
        }
        m.clear_tail();
        m
    }

    pub fn from_indices(len: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut m = Self::zeros(len);
        for i in idx {
            m.set(i, true);
        }
        m
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        i < self.len && (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        let w = &mut self.words[i / 64];
        if v {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn none(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn all(&self) -> bool {
        self.count_ones() == self.len
    }

    pub fn and(&self, other: &BitMask) -> BitMask {
        debug_assert_eq!(self.len, other.len);
        BitMask {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
        }
    }

    pub fn and_not(&self, other: &BitMask) -> BitMask {
        debug_assert_eq!(self.len, other.len);
        BitMask {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & !b).collect(),
        }
    }

    pub fn or(&self, other: &BitMask) -> BitMask {
        debug_assert_eq!(self.len, other.len);
        BitMask {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a | b).collect(),
        }
    }

    pub fn intersects(&self, other: &BitMask) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    /// True if every bit set in `self` is also set in `other`.
    pub fn is_subset(&self, other: &BitMask) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.get(i))
    }

    /// Hex encoding, little-endian by bit index: byte `j` holds bits `8j..8j+8`.
    pub fn to_hex(&self) -> String {
        let nbytes = self.len.div_ceil(8);
        let mut s = String::with_capacity(nbytes * 2);
        for j in 0..nbytes {
            let byte = (self.words[j / 8] >> ((j % 8) * 8)) as u8;
            s.push_str(&format!("{byte:02x}"));
        }
        s
    }

    pub fn from_hex(len: usize, hex: &str) -> Result<Self> {
        let nbytes = len.div_ceil(8);
        if hex.len() != nbytes * 2 {
            return Err(Error::parse(
                "bit mask",
                format!("expected {} hex digits for {len} bits, got {}", nbytes * 2, hex.len()),
            ));
        }
        let mut m = Self::zeros(len);
        for j in 0..nbytes {
            let byte = u8::from_str_radix(&hex[2 * j..2 * j + 2], 16).map_err(|e| Error::parse("bit mask", e))?;
            m.words[j / 8] |= (byte as u64) << ((j % 8) * 8);
        }
        let before = m.count_ones();
        m.clear_tail();
        if m.count_ones() != before {
            return Err(Error::parse("bit mask", "bits set beyond mask length"));
        }
        Ok(m)
    }
}

impl fmt::Debug for BitMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for i in 0..self.len {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        f.write_str("]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_is_little_endian_by_bit() {
        let m = BitMask::from_indices(3, [0, 2]);
        assert_eq!(m.to_hex(), "05");
        let m = BitMask::from_indices(12, [8, 11]);
        assert_eq!(m.to_hex(), "0009");
        assert_eq!(BitMask::from_hex(12, "0009").unwrap(), m);
    }

    #[test]
    fn hex_rejects_overflow_bits() {
        assert!(BitMask::from_hex(3, "08").is_err());
        assert!(BitMask::from_hex(3, "0").is_err());
    }

    #[test]
    fn ones_respects_length() {
        let m = BitMask::ones(70);
        assert_eq!(m.count_ones(), 70);
        assert!(m.all());
        assert!(BitMask::zeros(0).all());
    }
}
