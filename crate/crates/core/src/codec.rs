//! Low-discrepancy stochastic (SN) and unary (UN) encodings of binary operands.
//!
//! Bit `B_0` of an operand is its most significant bit. The SN layout places
//! `B_k` at every position `j` with `j + 1 = 2^k * (2i + 1)`, so `B_0` fills the
//! even positions, `B_1` every fourth position starting at 1, and so on. The
//! final position `2^n - 1` is never covered and always holds 0.

use crate::bits::BitSeq;
use crate::error::{Error, Result};

pub const MAX_WIDTH: u32 = 16;

pub(crate) fn check_width(width: u32) -> Result<()> {
    if (1..=MAX_WIDTH).contains(&width) {
        Ok(())
    } else {
        Err(Error::WidthOutOfRange(width))
    }
}

/// An `n`-bit unsigned operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BinaryOperand {
    value: u32,
    width: u32,
}

impl BinaryOperand {
    pub fn new(value: u32, width: u32) -> Result<Self> {
        check_width(width)?;
        if (value as u64) >> width != 0 {
            return Err(Error::ValueOutOfRange { value: value as u64, width });
        }
        Ok(BinaryOperand { value, width })
    }

    #[inline]
    pub fn value(&self) -> u32 {
        self.value
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    /// Sequence length `2^n`.
    #[inline]
    pub fn seq_len(&self) -> usize {
        1usize << self.width
    }

    /// Bit `B_k`, counted from the most significant end.
    #[inline]
    pub fn bit(&self, k: u32) -> bool {
        debug_assert!(k < self.width);
        self.value >> (self.width - 1 - k) & 1 == 1
    }

    /// The top `s` bits as an `s`-bit operand.
    pub fn high(&self, s: u32) -> Result<BinaryOperand> {
        BinaryOperand::new(self.value >> (self.width - s), s)
    }

    /// The low `w - s` bits as a `(w - s)`-bit operand.
    pub fn low(&self, s: u32) -> Result<BinaryOperand> {
        let w = self.width - s;
        BinaryOperand::new(self.value & ((1u32 << w) - 1), w)
    }
}

/// An SN: `2^n` bits with exactly `value` ones spread by the LD layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StochasticSeq {
    pub bits: BitSeq,
    pub width: u32,
}

/// A UN: `value` ones followed by zeros, `2^n` bits total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnarySeq {
    pub bits: BitSeq,
    pub width: u32,
}

/// Bit `j` of the SN of `b`, without building the sequence.
///
/// `k` is the trailing-zero count of `j + 1`: that is the unique exponent with
/// `j + 1 = 2^k (2i + 1)`. Positions with `k >= n` (only `2^n - 1`) are 0.
pub fn sn_bit(b: BinaryOperand, j: usize) -> Result<bool> {
    let len = b.seq_len();
    if j >= len {
        return Err(Error::IndexOutOfRange { index: j, len });
    }
    Ok(sn_bit_unchecked(b, j))
}

#[inline]
pub(crate) fn sn_bit_unchecked(b: BinaryOperand, j: usize) -> bool {
    let k = (j + 1).trailing_zeros();
    k < b.width && b.bit(k)
}

pub fn encode_sn(b: BinaryOperand) -> StochasticSeq {
    StochasticSeq {
        bits: BitSeq::from_fn(b.seq_len(), |j| sn_bit_unchecked(b, j)),
        width: b.width,
    }
}

pub fn encode_un(b: BinaryOperand) -> UnarySeq {
    let v = b.value as usize;
    UnarySeq { bits: BitSeq::from_fn(b.seq_len(), |j| j < v), width: b.width }
}

/// Ground-truth product count: ones in `SN(a) AND UN(b)`.
///
/// Since the UN is a ones-prefix, this is the number of ones among the
/// first `b` positions of `SN(a)`.
pub fn mul_reference(a: BinaryOperand, b: BinaryOperand) -> Result<u64> {
    if a.width != b.width {
        return Err(Error::WidthMismatch(a.width, b.width));
    }
    let sn = encode_sn(a);
    let un = encode_un(b);
    Ok(sn.bits.and(&un.bits).count_ones())
}

/// Witness that the SN index map partitions `0..2^n - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPartition {
    pub width: u32,
    /// `classes[k]` holds every position fed by `B_k`, in increasing order.
    pub classes: Vec<Vec<usize>>,
    /// Positions produced more than once.
    pub duplicates: Vec<usize>,
    /// Positions in `0..2^n - 1` never produced.
    pub missing: Vec<usize>,
    /// Produced positions outside `0..2^n - 1`.
    pub stray: Vec<usize>,
}

impl IndexPartition {
    pub fn is_partition(&self) -> bool {
        self.duplicates.is_empty() && self.missing.is_empty() && self.stray.is_empty()
    }
}

/// Enumerates `2^(k+1) i + 2^k - 1` for every `k < n` and `i < 2^n / 2^(k+1)`
/// and checks coverage of `0..=2^n - 2`.
pub fn index_map(width: u32) -> Result<IndexPartition> {
    check_width(width)?;
    let len = 1usize << width;
    let mut seen = vec![0u8; len];
    let mut classes = Vec::with_capacity(width as usize);
    let mut stray = Vec::new();
    for k in 0..width {
        let step = 1usize << (k + 1);
        let class: Vec<usize> = (0..len / step).map(|i| step * i + (1 << k) - 1).collect();
        for &j in &class {
            if j + 1 >= len {
                stray.push(j);
            } else {
                seen[j] = seen[j].saturating_add(1);
            }
        }
        classes.push(class);
    }
    let duplicates = (0..len - 1).filter(|&j| seen[j] > 1).collect();
    let missing = (0..len - 1).filter(|&j| seen[j] == 0).collect();
    Ok(IndexPartition { width, classes, duplicates, missing, stray })
}

/// Bits of information per stored bit when an `n`-bit value is kept as a
/// `2^n`-bit SN.
pub fn representation_efficiency(width: u32) -> f64 {
    width as f64 / (1u64 << width) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn op(v: u32, n: u32) -> BinaryOperand {
        BinaryOperand::new(v, n).unwrap()
    }

    #[test]
    fn operand_validation() {
        assert_eq!(BinaryOperand::new(8, 3), Err(Error::ValueOutOfRange { value: 8, width: 3 }));
        assert_eq!(BinaryOperand::new(0, 0), Err(Error::WidthOutOfRange(0)));
        assert_eq!(BinaryOperand::new(0, 17), Err(Error::WidthOutOfRange(17)));
        assert!(BinaryOperand::new(65535, 16).is_ok());
        let b = op(0b101, 3);
        assert!(b.bit(0) && !b.bit(1) && b.bit(2));
    }

    #[test]
    fn sn_examples() {
        assert_eq!(encode_sn(op(5, 3)).bits.to_string(), "10111010");
        assert_eq!(encode_sn(op(0, 4)).bits.to_string(), "0".repeat(16));
        let s = encode_sn(op(45, 6));
        assert_eq!(s.bits.len(), 64);
        assert_eq!(s.bits.count_ones(), 45);
        assert!(!s.bits.get(63));
    }

    #[test]
    fn un_examples() {
        assert_eq!(encode_un(op(5, 3)).bits.to_string(), "11111000");
        assert_eq!(encode_un(op(0, 3)).bits.to_string(), "00000000");
        let u = encode_un(op(255, 8)).bits;
        assert_eq!(u.count_ones(), 255);
        assert!(!u.get(255));
    }

    #[test]
    fn sn_bit_examples() {
        assert!(sn_bit(op(5, 3), 3).unwrap());
        assert!(!sn_bit(op(5, 3), 1).unwrap());
        for v in 0..8 {
            assert!(!sn_bit(op(v, 3), 7).unwrap());
        }
        assert_eq!(sn_bit(op(5, 3), 8), Err(Error::IndexOutOfRange { index: 8, len: 8 }));
    }

    #[test]
    fn mul_reference_examples() {
        assert_eq!(mul_reference(op(5, 3), op(5, 3)).unwrap(), 4);
        for a in [0, 1, 77, 255] {
            assert_eq!(mul_reference(op(a, 8), op(0, 8)).unwrap(), 0);
        }
        // SN(255) is 1 everywhere except the last position, which the
        // 255-long UN prefix never reaches.
        assert_eq!(mul_reference(op(255, 8), op(255, 8)).unwrap(), 255);
        assert_eq!(mul_reference(op(1, 3), op(1, 4)), Err(Error::WidthMismatch(3, 4)));
    }

    #[test]
    fn index_map_small() {
        let p = index_map(3).unwrap();
        assert!(p.is_partition());
        assert_eq!(p.classes, vec![vec![0, 2, 4, 6], vec![1, 5], vec![3]]);
        let p1 = index_map(1).unwrap();
        assert_eq!(p1.classes, vec![vec![0]]);
        assert!(p1.is_partition());
        assert!(index_map(0).is_err());
    }

    #[test]
    fn efficiency_decreases() {
        for n in 1..MAX_WIDTH {
            assert!(representation_efficiency(n + 1) < representation_efficiency(n) || n == 1);
        }
        // n = 1 and n = 2 both give 1/2.
        assert_eq!(representation_efficiency(1), representation_efficiency(2));
    }
}
