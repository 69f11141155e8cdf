//! Reference design: a binary tree of counter-based non-scaled adders working
//! on signed-magnitude streams.
//!
//! This is a reconstruction. Each node keeps a signed pending-carry counter,
//! emits the clamped sum of its inputs and the counter, and keeps the rest
//! (saturating at the counter range). It obeys the same conservation law as
//! the shift-register adder so that accuracy comparisons are like for like.

use serde::Serialize;

use crate::convert::tlb_to_sm_bit;
use crate::engine::check_vector;
use crate::error::{check_len, domain, Error, Result};
use crate::formats::{encode_sm, SmStream, Ternary};
use crate::rng::RandomSource;

/// SM multiplier: sign XOR, magnitude AND.
#[inline]
pub fn sm_multiply_bit(xs: bool, xm: bool, ys: bool, ym: bool) -> (bool, bool) {
    (xs ^ ys, xm && ym)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CounterAdderNode {
    counter: i32,
    bits: u32,
    saturations: u64,
    lost: i64,
}

impl CounterAdderNode {
    pub fn new(bits: u32) -> Result<Self> {
        if !(1..=31).contains(&bits) {
            return Err(domain(format!("counter width {bits} outside 1..=31")));
        }
        Ok(Self {
            counter: 0,
            bits,
            saturations: 0,
            lost: 0,
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Largest magnitude the clamp keeps: 2^(B−1) − 1.
    pub fn max_count(&self) -> i32 {
        (1 << (self.bits - 1)) - 1
    }

    pub fn counter(&self) -> i32 {
        self.counter
    }

    pub fn set_counter(&mut self, value: i32) -> Result<()> {
        let lo = -(1 << (self.bits - 1));
        if value < lo || value > self.max_count() {
            return Err(domain(format!("counter value {value} not representable in {} bits", self.bits)));
        }
        self.counter = value;
        Ok(())
    }

    pub fn saturations(&self) -> u64 {
        self.saturations
    }

    /// Net carry value dropped by saturation.
    pub fn lost(&self) -> i64 {
        self.lost
    }

    pub fn step(&mut self, x: Ternary, y: Ternary) -> Ternary {
        let total = x.value() + y.value() + self.counter;
        let z = total.clamp(-1, 1);
        let rest = total - z;
        let max = self.max_count();
        let kept = rest.clamp(-max, max);
        if kept != rest {
            self.saturations += 1;
            self.lost += (rest - kept) as i64;
        }
        self.counter = kept;
        Ternary::from_value(z).expect("clamped to ternary")
    }

    /// Flips one bit of the B-bit two's-complement counter.
    pub fn flip_bit(&mut self, bit: u32) -> Result<()> {
        if bit >= self.bits {
            return Err(domain(format!("bit {bit} out of range for width {}", self.bits)));
        }
        let mask = (1u32 << self.bits) - 1;
        let raw = (self.counter as u32 & mask) ^ (1 << bit);
        let shift = 32 - self.bits;
        self.counter = ((raw << shift) as i32) >> shift;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TreeDiagnostics {
    pub saturation_events: u64,
    /// Net carry dropped by saturating counters.
    pub lost: i64,
    /// Sum of all counters at the end of the stream.
    pub residual: i64,
    pub faults_injected: u64,
}

/// Complete binary tree of counter adders over a power-of-two number of
/// leaves. Narrower inputs are padded with zero lanes.
#[derive(Clone, Debug)]
pub struct AdderTree {
    lanes: usize,
    leaves: usize,
    /// Level by level from the leaves; level `i` has `leaves >> (i + 1)` nodes.
    levels: Vec<Vec<CounterAdderNode>>,
    faults: u64,
    scratch: Vec<Ternary>,
}

impl AdderTree {
    pub fn new(lanes: usize, bits: u32) -> Result<Self> {
        if lanes == 0 {
            return Err(domain("lane count must be at least 1"));
        }
        let leaves = lanes.next_power_of_two();
        let mut levels = Vec::new();
        let mut width = leaves / 2;
        while width >= 1 {
            levels.push(
                (0..width)
                    .map(|_| CounterAdderNode::new(bits))
                    .collect::<Result<Vec<_>>>()?,
            );
            width /= 2;
        }
        if levels.is_empty() {
            CounterAdderNode::new(bits)?;
        }
        Ok(Self {
            lanes,
            leaves,
            levels,
            faults: 0,
            scratch: Vec::with_capacity(leaves),
        })
    }

    pub fn lanes(&self) -> usize {
        self.lanes
    }

    pub fn leaves(&self) -> usize {
        self.leaves
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &CounterAdderNode> {
        self.levels.iter().flatten()
    }

    pub fn node_mut(&mut self, index: usize) -> Option<&mut CounterAdderNode> {
        self.levels.iter_mut().flatten().nth(index)
    }

    /// Sum of all counters.
    pub fn stored(&self) -> i64 {
        self.nodes().map(|n| n.counter() as i64).sum()
    }

    pub fn lost(&self) -> i64 {
        self.nodes().map(CounterAdderNode::lost).sum()
    }

    /// Propagates one main cycle of lane products to the root.
    pub fn step(&mut self, products: &[Ternary]) -> Result<Ternary> {
        check_len(products.len(), self.lanes)?;
        self.scratch.clear();
        self.scratch.extend_from_slice(products);
        self.scratch.resize(self.leaves, Ternary::Zero);
        for level in &mut self.levels {
            for (k, node) in level.iter_mut().enumerate() {
                let z = node.step(self.scratch[2 * k], self.scratch[2 * k + 1]);
                self.scratch[k] = z;
            }
            self.scratch.truncate(level.len());
        }
        Ok(self.scratch[0])
    }

    /// Flips a uniformly chosen counter bit with probability `p_flip`.
    pub fn maybe_inject_fault(&mut self, p_flip: f64, rng: &mut RandomSource) -> Result<bool> {
        if !rng.bernoulli(p_flip) || self.node_count() == 0 {
            return Ok(false);
        }
        let index = rng.index(self.node_count());
        let node = self.node_mut(index).expect("index below node count");
        let bit = rng.index(node.bits() as usize) as u32;
        node.flip_bit(bit)?;
        self.faults += 1;
        Ok(true)
    }

    pub fn diagnostics(&self) -> TreeDiagnostics {
        TreeDiagnostics {
            saturation_events: self.nodes().map(CounterAdderNode::saturations).sum(),
            lost: self.lost(),
            residual: self.stored(),
            faults_injected: self.faults,
        }
    }
}

/// SM streams for both vectors, drawn from the same sub-streams the
/// sequential engine uses (`2k` for x, `2k + 1` for y).
pub fn encode_sm_lanes(
    x: &[f64],
    y: &[f64],
    len: usize,
    rng: &RandomSource,
) -> Result<(Vec<SmStream>, Vec<SmStream>)> {
    check_len(x.len(), y.len())?;
    check_vector(x, "x")?;
    check_vector(y, "y")?;
    let xs = x
        .iter()
        .enumerate()
        .map(|(k, &v)| encode_sm(v, len, &mut rng.derive(2 * k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let ys = y
        .iter()
        .enumerate()
        .map(|(k, &v)| encode_sm(v, len, &mut rng.derive(2 * k as u64 + 1)))
        .collect::<Result<Vec<_>>>()?;
    Ok((xs, ys))
}

pub fn run_tree_on_streams(
    xs: &[SmStream],
    ys: &[SmStream],
    bits: u32,
    len: usize,
    mut faults: Option<(f64, &mut RandomSource)>,
) -> Result<(SmStream, TreeDiagnostics)> {
    check_len(xs.len(), ys.len())?;
    if len == 0 {
        return Err(domain("stream length must be at least 1"));
    }
    for s in xs.iter().chain(ys) {
        if s.len() < len {
            return Err(Error::EndOfStream(s.len()));
        }
    }
    let mut tree = AdderTree::new(xs.len(), bits)?;
    let mut out = SmStream::zeros(len);
    let mut products = vec![Ternary::Zero; xs.len()];
    for l in 0..len {
        if let Some((p_flip, rng)) = faults.as_mut() {
            tree.maybe_inject_fault(*p_flip, rng)?;
        }
        for (k, slot) in products.iter_mut().enumerate() {
            let (xs_, xm) = xs[k].bits(l);
            let (ys_, ym) = ys[k].bits(l);
            let (s, m) = sm_multiply_bit(xs_, xm, ys_, ym);
            *slot = Ternary::from_sm(s, m);
        }
        let z = tree.step(&products)?;
        let (p, n) = z.to_tlb();
        let (s, m) = tlb_to_sm_bit(p, n);
        out.set_bits(l, s, m);
    }
    Ok((out, tree.diagnostics()))
}

/// Estimates ⟨x, y⟩ with the counter adder tree.
pub fn run_tree_inner_product(
    x: &[f64],
    y: &[f64],
    bits: u32,
    len: usize,
    rng: &RandomSource,
) -> Result<(SmStream, TreeDiagnostics)> {
    let (xs, ys) = encode_sm_lanes(x, y, len, rng)?;
    run_tree_on_streams(&xs, &ys, bits, len, None)
}
