//! Stochastic number formats: unipolar, bipolar, signed magnitude (SM) and
//! two-line bipolar (TLB).
//!
//! Positions are 0-based in this API. Trace files use 1-based positions.

use std::fmt;

use crate::error::{check_len, domain, Result};
use crate::rng::RandomSource;

/// Packed sequence of binary symbols with a fixed length.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitStream {
    words: Vec<u64>,
    len: usize,
}

impl BitStream {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut s = Self::zeros(len);
        for i in 0..len {
            s.set(i, true);
        }
        s
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut s = Self::zeros(bits.len());
        for (i, b) in bits.into_iter().enumerate() {
            s.set(i, b);
        }
        s
    }

    /// Parses a slice of 0/1 integers; any other value is rejected.
    pub fn from_u8s(bits: &[u8]) -> Result<Self> {
        let mut s = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => s.set(i, true),
                other => return Err(domain(format!("bit value {other} at position {i}"))),
            }
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Bit at `i`. Panics when `i >= len`.
    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_all_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }
}

impl fmt::Debug for BitStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitStream(")?;
        for b in self.iter() {
            write!(f, "{}", b as u8)?;
        }
        write!(f, ")")
    }
}

/// Decoded per-position symbol of a two-line stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Ternary {
    Neg,
    Zero,
    Pos,
}

impl Ternary {
    pub const ALL: [Ternary; 3] = [Ternary::Neg, Ternary::Zero, Ternary::Pos];

    pub fn value(self) -> i32 {
        match self {
            Ternary::Neg => -1,
            Ternary::Zero => 0,
            Ternary::Pos => 1,
        }
    }

    pub fn from_value(v: i32) -> Result<Self> {
        match v {
            -1 => Ok(Ternary::Neg),
            0 => Ok(Ternary::Zero),
            1 => Ok(Ternary::Pos),
            _ => Err(domain(format!("{v} is not a ternary value"))),
        }
    }

    /// Difference of a TLB bit pair.
    pub fn from_tlb(p: bool, n: bool) -> Self {
        match (p, n) {
            (true, false) => Ternary::Pos,
            (false, true) => Ternary::Neg,
            _ => Ternary::Zero,
        }
    }

    /// `(1 - 2s) * m` for an SM bit pair.
    pub fn from_sm(s: bool, m: bool) -> Self {
        match (s, m) {
            (_, false) => Ternary::Zero,
            (false, true) => Ternary::Pos,
            (true, true) => Ternary::Neg,
        }
    }

    /// Canonical TLB pair: +1 → (1,0), −1 → (0,1), 0 → (0,0).
    pub fn to_tlb(self) -> (bool, bool) {
        match self {
            Ternary::Pos => (true, false),
            Ternary::Neg => (false, true),
            Ternary::Zero => (false, false),
        }
    }
}

/// Two-line bipolar stream: value = mean(pos − neg).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TlbStream {
    pos: BitStream,
    neg: BitStream,
}

impl TlbStream {
    pub fn new(pos: BitStream, neg: BitStream) -> Result<Self> {
        check_len(pos.len(), neg.len())?;
        Ok(Self { pos, neg })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            pos: BitStream::zeros(len),
            neg: BitStream::zeros(len),
        }
    }

    /// Canonical encoding of a ternary sequence.
    pub fn from_ternary(symbols: &[Ternary]) -> Self {
        let mut s = Self::zeros(symbols.len());
        for (i, t) in symbols.iter().enumerate() {
            s.set(i, *t);
        }
        s
    }

    pub fn pos(&self) -> &BitStream {
        &self.pos
    }

    pub fn neg(&self) -> &BitStream {
        &self.neg
    }

    pub fn len(&self) -> usize {
        self.pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pos.is_empty()
    }

    #[inline]
    pub fn bits(&self, i: usize) -> (bool, bool) {
        (self.pos.get(i), self.neg.get(i))
    }

    #[inline]
    pub fn symbol(&self, i: usize) -> Ternary {
        Ternary::from_tlb(self.pos.get(i), self.neg.get(i))
    }

    /// Writes the canonical bit pair of `t` at position `i`.
    pub fn set(&mut self, i: usize, t: Ternary) {
        let (p, n) = t.to_tlb();
        self.pos.set(i, p);
        self.neg.set(i, n);
    }

    pub fn set_bits(&mut self, i: usize, p: bool, n: bool) {
        self.pos.set(i, p);
        self.neg.set(i, n);
    }

    pub fn ternary_at(&self, i: usize) -> Result<Ternary> {
        if i >= self.len() {
            return Err(domain(format!("position {i} out of range for length {}", self.len())));
        }
        Ok(self.symbol(i))
    }

    pub fn symbols(&self) -> Vec<Ternary> {
        (0..self.len()).map(|i| self.symbol(i)).collect()
    }

    /// Sum of the ternary symbols.
    pub fn signed_sum(&self) -> i64 {
        self.pos.count_ones() as i64 - self.neg.count_ones() as i64
    }

    pub fn decode(&self) -> Result<f64> {
        decode_tlb(self)
    }
}

/// Signed-magnitude stream: value = mean((1 − 2·sign)·magnitude).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmStream {
    sign: BitStream,
    magnitude: BitStream,
}

impl SmStream {
    pub fn new(sign: BitStream, magnitude: BitStream) -> Result<Self> {
        check_len(sign.len(), magnitude.len())?;
        Ok(Self { sign, magnitude })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            sign: BitStream::zeros(len),
            magnitude: BitStream::zeros(len),
        }
    }

    pub fn sign(&self) -> &BitStream {
        &self.sign
    }

    pub fn magnitude(&self) -> &BitStream {
        &self.magnitude
    }

    pub fn len(&self) -> usize {
        self.sign.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sign.is_empty()
    }

    #[inline]
    pub fn bits(&self, i: usize) -> (bool, bool) {
        (self.sign.get(i), self.magnitude.get(i))
    }

    #[inline]
    pub fn symbol(&self, i: usize) -> Ternary {
        Ternary::from_sm(self.sign.get(i), self.magnitude.get(i))
    }

    pub fn set_bits(&mut self, i: usize, s: bool, m: bool) {
        self.sign.set(i, s);
        self.magnitude.set(i, m);
    }

    pub fn ternary_at(&self, i: usize) -> Result<Ternary> {
        if i >= self.len() {
            return Err(domain(format!("position {i} out of range for length {}", self.len())));
        }
        Ok(self.symbol(i))
    }

    pub fn symbols(&self) -> Vec<Ternary> {
        (0..self.len()).map(|i| self.symbol(i)).collect()
    }

    pub fn signed_sum(&self) -> i64 {
        (0..self.len()).map(|i| self.symbol(i).value() as i64).sum()
    }

    pub fn decode(&self) -> Result<f64> {
        decode_sm(self)
    }
}

fn check_range(x: f64, lo: f64, hi: f64) -> Result<()> {
    if x.is_nan() || x < lo || x > hi {
        return Err(domain(format!("value {x} outside [{lo}, {hi}]")));
    }
    Ok(())
}

fn check_nonzero_len(len: usize) -> Result<()> {
    if len == 0 {
        return Err(domain("stream length must be at least 1"));
    }
    Ok(())
}

/// Comparator-based generator: bit is 1 iff the next uniform sample is below `x`.
pub fn encode_unipolar(x: f64, len: usize, rng: &mut RandomSource) -> Result<BitStream> {
    check_range(x, 0.0, 1.0)?;
    check_nonzero_len(len)?;
    let mut s = BitStream::zeros(len);
    for i in 0..len {
        if rng.bernoulli(x) {
            s.set(i, true);
        }
    }
    Ok(s)
}

pub fn decode_unipolar(s: &BitStream) -> Result<f64> {
    check_nonzero_len(s.len())?;
    Ok(s.count_ones() as f64 / s.len() as f64)
}

pub fn encode_bipolar(x: f64, len: usize, rng: &mut RandomSource) -> Result<BitStream> {
    check_range(x, -1.0, 1.0)?;
    encode_unipolar((x + 1.0) / 2.0, len, rng)
}

pub fn decode_bipolar(s: &BitStream) -> Result<f64> {
    check_nonzero_len(s.len())?;
    let ones = s.count_ones() as f64;
    Ok((2.0 * ones - s.len() as f64) / s.len() as f64)
}

/// Only one line carries ones: `pos` for x ≥ 0, `neg` for x < 0.
pub fn encode_tlb(x: f64, len: usize, rng: &mut RandomSource) -> Result<TlbStream> {
    check_range(x, -1.0, 1.0)?;
    check_nonzero_len(len)?;
    let active = encode_unipolar(x.abs(), len, rng)?;
    let idle = BitStream::zeros(len);
    if x >= 0.0 {
        TlbStream::new(active, idle)
    } else {
        TlbStream::new(idle, active)
    }
}

pub fn decode_tlb(s: &TlbStream) -> Result<f64> {
    check_nonzero_len(s.len())?;
    Ok(s.signed_sum() as f64 / s.len() as f64)
}

/// Constant sign line, magnitude drawn from |x|.
pub fn encode_sm(x: f64, len: usize, rng: &mut RandomSource) -> Result<SmStream> {
    check_range(x, -1.0, 1.0)?;
    check_nonzero_len(len)?;
    let magnitude = encode_unipolar(x.abs(), len, rng)?;
    let sign = if x < 0.0 {
        BitStream::ones(len)
    } else {
        BitStream::zeros(len)
    };
    SmStream::new(sign, magnitude)
}

pub fn decode_sm(s: &SmStream) -> Result<f64> {
    check_nonzero_len(s.len())?;
    Ok(s.signed_sum() as f64 / s.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(v: &[u8]) -> BitStream {
        BitStream::from_u8s(v).unwrap()
    }

    #[test]
    fn unipolar_extremes() {
        let mut rng = RandomSource::new(1);
        assert!(encode_unipolar(0.0, 8, &mut rng).unwrap().is_all_zero());
        assert_eq!(encode_unipolar(1.0, 8, &mut rng).unwrap().count_ones(), 8);
    }

    #[test]
    fn unipolar_half_within_three_sigma() {
        let mut rng = RandomSource::new(42);
        let s = encode_unipolar(0.5, 10_000, &mut rng).unwrap();
        let v = decode_unipolar(&s).unwrap();
        assert!((v - 0.5).abs() <= 3.0 * 0.005, "{v}");
    }

    #[test]
    fn unipolar_rejects_bad_input() {
        let mut rng = RandomSource::new(1);
        assert!(encode_unipolar(1.5, 8, &mut rng).is_err());
        assert!(encode_unipolar(-0.1, 8, &mut rng).is_err());
        assert!(encode_unipolar(f64::NAN, 8, &mut rng).is_err());
        assert!(encode_unipolar(0.5, 0, &mut rng).is_err());
        assert!(decode_unipolar(&BitStream::zeros(0)).is_err());
    }

    #[test]
    fn unipolar_decode_examples() {
        assert_eq!(decode_unipolar(&bits(&[0, 0, 0, 0])).unwrap(), 0.0);
        assert_eq!(decode_unipolar(&bits(&[1, 1, 1, 1])).unwrap(), 1.0);
        assert_eq!(decode_unipolar(&bits(&[1, 0, 1, 0])).unwrap(), 0.5);
    }

    #[test]
    fn bipolar_decode_examples() {
        assert_eq!(decode_bipolar(&bits(&[0, 0, 0, 0])).unwrap(), -1.0);
        assert_eq!(decode_bipolar(&bits(&[1, 1, 1, 1])).unwrap(), 1.0);
        assert_eq!(decode_bipolar(&bits(&[1, 1, 0, 0])).unwrap(), 0.0);
        let mut rng = RandomSource::new(1);
        assert!(encode_bipolar(-1.01, 4, &mut rng).is_err());
    }

    #[test]
    fn tlb_encode_examples() {
        let mut rng = RandomSource::new(3);
        let z = encode_tlb(0.0, 16, &mut rng).unwrap();
        assert!(z.pos().is_all_zero() && z.neg().is_all_zero());
        let m = encode_tlb(-1.0, 16, &mut rng).unwrap();
        assert!(m.pos().is_all_zero());
        assert_eq!(m.neg().count_ones(), 16);
        let q = encode_tlb(0.25, 10_000, &mut rng).unwrap();
        let bound = 3.0 * (0.25f64 * 0.75 / 1e4).sqrt();
        assert!((q.decode().unwrap() - 0.25).abs() <= bound);
        assert!(encode_tlb(1.2, 4, &mut rng).is_err());
    }

    #[test]
    fn tlb_decode_examples() {
        let s = TlbStream::new(bits(&[1, 1, 0, 0]), bits(&[0, 0, 0, 0])).unwrap();
        assert_eq!(decode_tlb(&s).unwrap(), 0.5);
        let s = TlbStream::new(bits(&[1, 0, 1, 1]), bits(&[1, 0, 1, 1])).unwrap();
        assert_eq!(decode_tlb(&s).unwrap(), 0.0);
        let s = TlbStream::new(bits(&[1, 1, 1]), bits(&[0, 0, 0])).unwrap();
        assert_eq!(decode_tlb(&s).unwrap(), 1.0);
        assert!(TlbStream::new(bits(&[1]), bits(&[0, 0])).is_err());
    }

    #[test]
    fn sm_decode_examples() {
        let s = SmStream::new(bits(&[0, 0]), bits(&[1, 1])).unwrap();
        assert_eq!(decode_sm(&s).unwrap(), 1.0);
        let s = SmStream::new(bits(&[1, 1]), bits(&[1, 1])).unwrap();
        assert_eq!(decode_sm(&s).unwrap(), -1.0);
        let s = SmStream::new(bits(&[1, 0, 1, 0]), bits(&[1, 1, 0, 0])).unwrap();
        assert_eq!(decode_sm(&s).unwrap(), 0.0);
    }

    #[test]
    fn sm_encode_uses_constant_sign() {
        let mut rng = RandomSource::new(9);
        let s = encode_sm(-0.3, 64, &mut rng).unwrap();
        assert_eq!(s.sign().count_ones(), 64);
        let s = encode_sm(0.3, 64, &mut rng).unwrap();
        assert!(s.sign().is_all_zero());
    }

    #[test]
    fn ternary_lookup() {
        let s = TlbStream::new(bits(&[0, 1]), bits(&[1, 0])).unwrap();
        assert_eq!(s.ternary_at(0).unwrap(), Ternary::Neg);
        assert_eq!(s.ternary_at(1).unwrap(), Ternary::Pos);
        assert!(s.ternary_at(2).is_err());
        let s = SmStream::new(bits(&[0, 1]), bits(&[0, 0])).unwrap();
        assert_eq!(s.ternary_at(0).unwrap(), Ternary::Zero);
        assert_eq!(s.ternary_at(1).unwrap(), Ternary::Zero);
    }

    #[test]
    fn packed_storage_crosses_word_boundary() {
        let mut s = BitStream::zeros(130);
        s.set(63, true);
        s.set(64, true);
        s.set(129, true);
        assert_eq!(s.count_ones(), 3);
        assert!(s.get(64) && !s.get(65));
    }
}
