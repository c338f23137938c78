//! Pseudo-fractal compression of SNs.
//!
//! Cutting an `n`-bit SN into segments of `P = 2^s` bits, every segment has
//! the same first `P - 1` bits (the seed, which is the width-`s` SN of the top
//! `s` operand bits without its constant-0 tail). The last bit of segment `m`
//! is bit `m` of the width-`(n - s)` SN of the low operand bits. A code
//! therefore stores `P - 1` seed bits plus `n - s` binary low bits.

use crate::bits::BitSeq;
use crate::codec::{encode_sn, sn_bit_unchecked, BinaryOperand, StochasticSeq};
use crate::error::{Error, Result};

/// Seed plus binary segment-LSB field.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PfcCode {
    pub seed: BitSeq,
    pub low_bits: u32,
    pub width: u32,
    pub seg_exp: u32,
}

impl PfcCode {
    pub fn segment_len(&self) -> usize {
        1 << self.seg_exp
    }

    pub fn segment_count(&self) -> usize {
        1 << (self.width - self.seg_exp)
    }

    /// Stored bits: `(2^s - 1) + (n - s)`.
    pub fn stored_len(&self) -> usize {
        self.seed.len() + (self.width - self.seg_exp) as usize
    }

    fn low_operand(&self) -> BinaryOperand {
        BinaryOperand::new(self.low_bits, self.width - self.seg_exp)
            .expect("low field fits its width by construction")
    }

    /// Reconstructs the source value: `2^(n-s) * popcount(seed) + low`.
    pub fn value(&self) -> u32 {
        ((self.seed.count_ones() as u32) << (self.width - self.seg_exp)) + self.low_bits
    }

    /// Segment `m` of the SN: seed followed by that segment's LSB.
    pub fn segment(&self, m: usize) -> Result<BitSeq> {
        let lsb = lsb_bit(self, m)?;
        let mut seg = self.seed.clone();
        seg.push(lsb);
        Ok(seg)
    }

    /// Streaming segment generator.
    pub fn stream(&self) -> SegmentStream<'_> {
        SegmentStream { code: self, next: 0, ones: 0 }
    }
}

pub(crate) fn check_seg_exp(width: u32, seg_exp: u32) -> Result<()> {
    crate::codec::check_width(width)?;
    if seg_exp >= 1 && seg_exp < width {
        Ok(())
    } else {
        Err(Error::SegExpOutOfRange { seg_exp, width })
    }
}

pub fn compress(b: BinaryOperand, seg_exp: u32) -> Result<PfcCode> {
    check_seg_exp(b.width(), seg_exp)?;
    let high = b.high(seg_exp)?;
    let sn = encode_sn(high);
    let seed = sn.bits.slice(0, sn.bits.len() - 1);
    Ok(PfcCode { seed, low_bits: b.low(seg_exp)?.value(), width: b.width(), seg_exp })
}

pub fn decompress(code: &PfcCode) -> StochasticSeq {
    let p = code.segment_len();
    let low = code.low_operand();
    let total = p * code.segment_count();
    let bits = BitSeq::from_fn(total, |j| {
        let r = j % p;
        if r + 1 < p {
            code.seed.get(r)
        } else {
            sn_bit_unchecked(low, j / p)
        }
    });
    StochasticSeq { bits, width: code.width }
}

/// LSB of segment `m`, i.e. what the SN 1-bit generator emits at step `m`.
pub fn lsb_bit(code: &PfcCode, m: usize) -> Result<bool> {
    let len = code.segment_count();
    if m >= len {
        return Err(Error::IndexOutOfRange { index: m, len });
    }
    Ok(sn_bit_unchecked(code.low_operand(), m))
}

/// Emits segments in order and tracks the generator's accumulator (segments
/// emitted so far) plus the ones emitted, so the caller can stop at `counter`.
#[derive(Debug, Clone)]
pub struct SegmentStream<'a> {
    code: &'a PfcCode,
    next: usize,
    ones: u64,
}

impl SegmentStream<'_> {
    /// Segments emitted so far.
    pub fn accumulator(&self) -> usize {
        self.next
    }

    pub fn ones_emitted(&self) -> u64 {
        self.ones
    }

    /// True once the accumulator has reached `counter`.
    pub fn reached(&self, counter: u32) -> bool {
        self.next >= counter as usize
    }
}

impl Iterator for SegmentStream<'_> {
    type Item = BitSeq;

    fn next(&mut self) -> Option<BitSeq> {
        if self.next >= self.code.segment_count() {
            return None;
        }
        let seg = self.code.segment(self.next).ok()?;
        self.ones += seg.count_ones();
        self.next += 1;
        Some(seg)
    }
}

/// Per-multiplication control tuple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Quadruple {
    pub seed: BitSeq,
    pub slsb: u32,
    /// Full-1 UN segments: `b / P`.
    pub counter: u32,
    /// Ones in the mixed UN segment: `b mod P`.
    pub bedge: u32,
    pub width: u32,
    pub seg_exp: u32,
}

impl Quadruple {
    /// Segments the output logic emits: `counter`, plus one mixed segment
    /// when `bedge > 0`.
    pub fn segments(&self) -> u32 {
        self.counter + u32::from(self.bedge > 0)
    }

    /// `seed AND first-bedge-ones`, followed by a 0 LSB.
    pub fn mixed_segment(&self) -> BitSeq {
        let p = 1usize << self.seg_exp;
        BitSeq::from_fn(p, |r| r + 1 < p && r < self.bedge as usize && self.seed.get(r))
    }

    pub fn code(&self) -> PfcCode {
        PfcCode {
            seed: self.seed.clone(),
            low_bits: self.slsb,
            width: self.width,
            seg_exp: self.seg_exp,
        }
    }

    /// All segments in emission order.
    pub fn emit(&self) -> Vec<BitSeq> {
        let code = self.code();
        let mut out: Vec<BitSeq> = code.stream().take(self.counter as usize).collect();
        if self.bedge > 0 {
            out.push(self.mixed_segment());
        }
        out
    }
}

pub fn make_quadruple(a_code: &PfcCode, b: BinaryOperand) -> Result<Quadruple> {
    if a_code.width != b.width() {
        return Err(Error::WidthMismatch(a_code.width, b.width()));
    }
    check_seg_exp(b.width(), a_code.seg_exp)?;
    let s = a_code.seg_exp;
    Ok(Quadruple {
        seed: a_code.seed.clone(),
        slsb: a_code.low_bits,
        counter: b.value() >> s,
        bedge: b.value() & ((1 << s) - 1),
        width: b.width(),
        seg_exp: s,
    })
}

/// `2^n / ((2^s - 1) + (n - s))`.
pub fn compression_ratio(width: u32, seg_exp: u32) -> Result<f64> {
    check_seg_exp(width, seg_exp)?;
    let stored = ((1u64 << seg_exp) - 1) + (width - seg_exp) as u64;
    Ok((1u64 << width) as f64 / stored as f64)
}
