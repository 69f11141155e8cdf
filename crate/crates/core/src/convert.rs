//! Bit-wise conversion between the TLB and SM line pairs.

use crate::formats::{SmStream, TlbStream};

/// TLB `(p, n)` to SM `(s, m)`. The magnitude is `p XOR n`; the sign line
/// follows `n`, which fixes the don't-care rows to (0,0)→(0,0), (1,1)→(1,0).
#[inline]
pub fn tlb_to_sm_bit(p: bool, n: bool) -> (bool, bool) {
    (n, p ^ n)
}

/// SM `(s, m)` to canonical TLB `(p, n)`; never produces (1,1).
#[inline]
pub fn sm_to_tlb_bit(s: bool, m: bool) -> (bool, bool) {
    (m && !s, m && s)
}

pub fn tlb_to_sm(stream: &TlbStream) -> SmStream {
    let mut out = SmStream::zeros(stream.len());
    for i in 0..stream.len() {
        let (p, n) = stream.bits(i);
        let (s, m) = tlb_to_sm_bit(p, n);
        out.set_bits(i, s, m);
    }
    out
}

pub fn sm_to_tlb(stream: &SmStream) -> TlbStream {
    let mut out = TlbStream::zeros(stream.len());
    for i in 0..stream.len() {
        let (s, m) = stream.bits(i);
        let (p, n) = sm_to_tlb_bit(s, m);
        out.set_bits(i, p, n);
    }
    out
}
