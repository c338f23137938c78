//! Fixed-length bit sequence used for SN/UN streams and segments.

use std::fmt;

/// A packed, fixed-length bit vector. Position 0 is the first bit in stream
/// order and is printed leftmost.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitSeq {
    words: Vec<u64>,
    len: usize,
}

impl BitSeq {
    pub fn zeros(len: usize) -> Self {
        BitSeq { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn from_fn(len: usize, mut f: impl FnMut(usize) -> bool) -> Self {
        let mut s = Self::zeros(len);
        for i in 0..len {
            if f(i) {
                s.set(i, true);
            }
        }
        s
    }

    /// Parses a string of '0'/'1' characters.
    pub fn parse(text: &str) -> Option<Self> {
        let chars: Vec<char> = text.trim().chars().collect();
        let mut s = Self::zeros(chars.len());
        for (i, c) in chars.iter().enumerate() {
            match c {
                '0' => {}
                '1' => s.set(i, true),
                _ => return None,
            }
        }
        Some(s)
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
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Ones among the first `n` positions.
    pub fn count_ones_prefix(&self, n: usize) -> u64 {
        let n = n.min(self.len);
        let full = n / 64;
        let mut c: u64 = self.words[..full].iter().map(|w| w.count_ones() as u64).sum();
        let rem = n % 64;
        if rem > 0 {
            c += (self.words[full] & ((1u64 << rem) - 1)).count_ones() as u64;
        }
        c
    }

    pub fn and(&self, other: &BitSeq) -> BitSeq {
        assert_eq!(self.len, other.len);
        BitSeq {
            words: self.words.iter().zip(&other.words).map(|(a, b)| a & b).collect(),
            len: self.len,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Copy of positions `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> BitSeq {
        assert!(start + len <= self.len);
        BitSeq::from_fn(len, |i| self.get(start + i))
    }

    pub fn concat(&self, other: &BitSeq) -> BitSeq {
        BitSeq::from_fn(self.len + other.len, |i| {
            if i < self.len {
                self.get(i)
            } else {
                other.get(i - self.len)
            }
        })
    }

    pub fn push(&mut self, v: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, v);
    }
}

impl fmt::Display for BitSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitSeq({self})")
    }
}
