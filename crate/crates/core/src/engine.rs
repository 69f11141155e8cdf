//! Sequential inner-product engine.
//!
//! Each main-clock cycle the multiplier stage latches K product bit pairs
//! into the hold registers, the hold registers are copied into the input
//! shift registers, and K higher-clock steps feed the shift-register fronts
//! into the accumulation stage. The carry-register fronts then go to the
//! output flip-flops.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::arith::{tlb_multiply_bit, CarryShiftRegister};
use crate::error::{check_len, domain, Error, Result};
use crate::formats::{encode_tlb, Ternary, TlbStream};
use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftDirection {
    /// The negative line is loaded reversed and cancels along the diagonal.
    #[default]
    Opposite,
    /// Both lines are loaded identically and cancel position-wise.
    Same,
}

impl FromStr for ShiftDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "opposite" => Ok(ShiftDirection::Opposite),
            "same" => Ok(ShiftDirection::Same),
            other => Err(domain(format!("unknown shift direction `{other}`"))),
        }
    }
}

impl ShiftDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            ShiftDirection::Opposite => "opposite",
            ShiftDirection::Same => "same",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EngineConfig {
    /// Vector length K.
    pub lanes: usize,
    /// Carry shift register capacity M.
    pub carry_len: usize,
    /// Stream length L.
    pub len: usize,
    pub cc_enabled: bool,
    pub direction: ShiftDirection,
}

impl EngineConfig {
    pub fn new(lanes: usize, carry_len: usize, len: usize) -> Self {
        Self {
            lanes,
            carry_len,
            len,
            cc_enabled: true,
            direction: ShiftDirection::Opposite,
        }
    }

    pub fn with_cc(mut self, enabled: bool) -> Self {
        self.cc_enabled = enabled;
        self
    }

    pub fn with_direction(mut self, direction: ShiftDirection) -> Self {
        self.direction = direction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_LANES).contains(&self.lanes) {
            return Err(domain(format!("lane count {} outside 1..={MAX_LANES}", self.lanes)));
        }
        if self.carry_len == 0 {
            return Err(domain("carry register length must be at least 1"));
        }
        if self.len == 0 {
            return Err(domain("stream length must be at least 1"));
        }
        Ok(())
    }
}

/// Zeroes a simultaneous (1,1) pair.
#[inline]
pub fn carry_cancel(a: bool, b: bool) -> (bool, bool) {
    (a && !b, b && !a)
}

/// Largest supported vector length.
pub const MAX_LANES: usize = 128;

/// The pair of K-bit input shift registers with carry cancelers between them.
/// Bit `j` of each mask is cell `j`; cell 0 is the front.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InputShiftRegisters {
    p: u128,
    n: u128,
    width: usize,
    direction: ShiftDirection,
    cc_enabled: bool,
}

impl InputShiftRegisters {
    pub fn new(width: usize, direction: ShiftDirection, cc_enabled: bool) -> Self {
        assert!((1..=MAX_LANES).contains(&width), "width {width} outside 1..={MAX_LANES}");
        Self {
            p: 0,
            n: 0,
            width,
            direction,
            cc_enabled,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn positive(&self) -> Vec<bool> {
        (0..self.width).map(|j| (self.p >> j) & 1 == 1).collect()
    }

    pub fn negative(&self) -> Vec<bool> {
        (0..self.width).map(|j| (self.n >> j) & 1 == 1).collect()
    }

    fn reverse(&self, mask: u128) -> u128 {
        mask.reverse_bits() >> (128 - self.width)
    }

    /// Copies hold registers in. In opposite mode `hold_n[k]` lands at
    /// `n[K-1-k]`; in same mode the mapping is the identity.
    pub fn load(&mut self, hold_p: &[bool], hold_n: &[bool]) -> Result<()> {
        check_len(hold_p.len(), self.width)?;
        check_len(hold_n.len(), self.width)?;
        let p = pack(hold_p);
        let n = pack(hold_n);
        self.load_masks(p, n);
        Ok(())
    }

    /// Mask form of [`load`](Self::load); bits at or above the width are ignored.
    pub fn load_masks(&mut self, hold_p: u128, hold_n: u128) {
        let keep = width_mask(self.width);
        self.p = hold_p & keep;
        self.n = match self.direction {
            ShiftDirection::Opposite => self.reverse(hold_n & keep),
            ShiftDirection::Same => hold_n & keep,
        };
    }

    /// Sets the register cells directly, front first.
    pub fn set_cells(&mut self, p: &[bool], n: &[bool]) -> Result<()> {
        check_len(p.len(), self.width)?;
        check_len(n.len(), self.width)?;
        self.p = pack(p);
        self.n = pack(n);
        Ok(())
    }

    pub fn fronts(&self) -> (bool, bool) {
        (self.p & 1 == 1, self.n & 1 == 1)
    }

    /// Signed content Σp − Σn still waiting to be accumulated.
    pub fn signed_content(&self) -> i64 {
        self.p.count_ones() as i64 - self.n.count_ones() as i64
    }

    /// One synchronous shift toward index 0 with zero fill at the back.
    /// Returns the number of (+1, −1) pairs annihilated.
    ///
    /// Opposite mode: `p[j] <- p[j+1] & !n[K-1-j]`, `n[j] <- n[j+1] & !p[K-1-j]`.
    /// Same mode: `p[j] <- p[j+1] & !n[j+1]`, `n[j] <- n[j+1] & !p[j+1]`.
    pub fn shift(&mut self) -> u64 {
        let (p_next, n_next) = (self.p >> 1, self.n >> 1);
        if !self.cc_enabled {
            self.p = p_next;
            self.n = n_next;
            return 0;
        }
        let (p_mask, n_mask) = match self.direction {
            ShiftDirection::Opposite => (self.reverse(self.n), self.reverse(self.p)),
            ShiftDirection::Same => (n_next, p_next),
        };
        let cancels = (p_next & p_mask).count_ones() as u64;
        self.p = p_next & !p_mask;
        self.n = n_next & !n_mask;
        cancels
    }
}

fn width_mask(width: usize) -> u128 {
    if width >= 128 {
        u128::MAX
    } else {
        (1u128 << width) - 1
    }
}

fn pack(bits: &[bool]) -> u128 {
    bits.iter()
        .enumerate()
        .fold(0u128, |acc, (j, &b)| acc | ((b as u128) << j))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EngineDiagnostics {
    pub overflow_events: u64,
    pub lost_pos: u64,
    pub lost_neg: u64,
    pub cc_cancellations: u64,
    pub residual_pos: usize,
    pub residual_neg: usize,
    pub faults_injected: u64,
}

/// Which carry register a fault or query refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CarryLine {
    Positive,
    Negative,
}

/// One row of the per-substep engine trace. `substep` runs 1..=K for the
/// higher-clock steps and K+1 for the output emission.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EngineTraceRow {
    pub l: usize,
    pub substep: usize,
    pub ps_front: bool,
    pub ns_front: bool,
    pub pc_count: usize,
    pub nc_count: usize,
    pub zp: bool,
    pub zn: bool,
    pub cc_cancellations: u64,
}

#[derive(Clone, Debug)]
pub struct Engine {
    cfg: EngineConfig,
    hold_p: Vec<bool>,
    hold_n: Vec<bool>,
    shift: InputShiftRegisters,
    pc: CarryShiftRegister,
    nc: CarryShiftRegister,
    out: (bool, bool),
    /// High-clock steps done since the last load; `None` when idle.
    steps_done: Option<usize>,
    main_cycles: usize,
    high_cycles: u64,
    lost_pos: u64,
    lost_neg: u64,
    cancellations: u64,
    faults: u64,
}

impl Engine {
    pub fn new(cfg: EngineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            hold_p: vec![false; cfg.lanes],
            hold_n: vec![false; cfg.lanes],
            shift: InputShiftRegisters::new(cfg.lanes, cfg.direction, cfg.cc_enabled),
            pc: CarryShiftRegister::new(cfg.carry_len)?,
            nc: CarryShiftRegister::new(cfg.carry_len)?,
            out: (false, false),
            steps_done: None,
            main_cycles: 0,
            high_cycles: 0,
            lost_pos: 0,
            lost_neg: 0,
            cancellations: 0,
            faults: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn shift_registers(&self) -> &InputShiftRegisters {
        &self.shift
    }

    pub fn hold_registers(&self) -> (&[bool], &[bool]) {
        (&self.hold_p, &self.hold_n)
    }

    pub fn carry(&self, line: CarryLine) -> &CarryShiftRegister {
        match line {
            CarryLine::Positive => &self.pc,
            CarryLine::Negative => &self.nc,
        }
    }

    pub fn output(&self) -> (bool, bool) {
        self.out
    }

    pub fn main_cycles(&self) -> usize {
        self.main_cycles
    }

    pub fn high_cycles(&self) -> u64 {
        self.high_cycles
    }

    /// Net carry value held in the carry registers.
    pub fn stored_carry(&self) -> i64 {
        self.pc.count() as i64 - self.nc.count() as i64
    }

    /// Net carry value dropped by overflowing carry registers.
    pub fn lost_carry(&self) -> i64 {
        self.lost_pos as i64 - self.lost_neg as i64
    }

    /// Latches K product bit pairs from the multiplier stage.
    pub fn latch_products(&mut self, products: &[(bool, bool)]) -> Result<()> {
        check_len(products.len(), self.cfg.lanes)?;
        for (k, &(p, n)) in products.iter().enumerate() {
            self.hold_p[k] = p;
            self.hold_n[k] = n;
        }
        Ok(())
    }

    /// Copies the hold registers into the input shift registers.
    pub fn load_inputs(&mut self) -> Result<()> {
        if let Some(done) = self.steps_done {
            return Err(Error::State(format!(
                "load after {done} of {} higher-clock steps",
                self.cfg.lanes
            )));
        }
        self.shift.load(&self.hold_p, &self.hold_n)?;
        self.steps_done = Some(0);
        Ok(())
    }

    /// One higher-clock edge: accumulate the current fronts, then shift the
    /// input registers through the carry cancelers.
    pub fn high_clock_step(&mut self) -> Result<u64> {
        match self.steps_done {
            Some(done) if done < self.cfg.lanes => {}
            Some(_) => {
                return Err(Error::State(
                    "all higher-clock steps already done; reload required".into(),
                ))
            }
            None => return Err(Error::State("higher-clock step without loaded inputs".into())),
        }
        let (ps, ns) = self.shift.fronts();
        self.accumulate(Ternary::from_tlb(ps, ns));
        let cancels = self.shift.shift();
        self.cancellations += cancels;
        self.high_cycles += 1;
        self.steps_done = self.steps_done.map(|d| d + 1);
        Ok(cancels)
    }

    fn push_pos(&mut self) {
        if self.pc.shift_in() {
            self.lost_pos += 1;
        }
    }

    fn push_neg(&mut self) {
        if self.nc.shift_in() {
            self.lost_neg += 1;
        }
    }

    fn accumulate(&mut self, x: Ternary) {
        let (pf, nf) = (self.pc.front(), self.nc.front());
        let c = pf as i32 - nf as i32;
        match (x, c) {
            (Ternary::Zero, 0) => {
                self.pc.shift_out();
                self.nc.shift_out();
            }
            (Ternary::Zero, _) => {}
            (Ternary::Pos, 0) => {
                if !pf && !nf {
                    self.push_pos();
                } else {
                    self.nc.shift_out();
                }
            }
            (Ternary::Pos, -1) => {
                self.nc.shift_out();
            }
            (Ternary::Pos, _) => self.push_pos(),
            (Ternary::Neg, 0) => {
                if !pf && !nf {
                    self.push_neg();
                } else {
                    self.pc.shift_out();
                }
            }
            (Ternary::Neg, 1) => {
                self.pc.shift_out();
            }
            (Ternary::Neg, _) => self.push_neg(),
        }
    }

    /// Moves the carry fronts to the output flip-flops and consumes them.
    pub fn emit(&mut self) -> Result<(bool, bool)> {
        if self.steps_done != Some(self.cfg.lanes) {
            return Err(Error::State(format!(
                "emission before all {} higher-clock steps",
                self.cfg.lanes
            )));
        }
        let (zp, zn) = (self.pc.front(), self.nc.front());
        if zp {
            self.pc.shift_out();
        }
        if zn {
            self.nc.shift_out();
        }
        self.out = (zp, zn);
        self.steps_done = None;
        self.main_cycles += 1;
        Ok(self.out)
    }

    /// Full main-clock cycle on one position of every lane's input streams.
    pub fn main_clock_cycle(&mut self, x_bits: &[(bool, bool)], y_bits: &[(bool, bool)]) -> Result<(bool, bool)> {
        self.main_clock_cycle_traced(x_bits, y_bits, None)
    }

    fn main_clock_cycle_traced(
        &mut self,
        x_bits: &[(bool, bool)],
        y_bits: &[(bool, bool)],
        mut trace: Option<&mut Vec<EngineTraceRow>>,
    ) -> Result<(bool, bool)> {
        check_len(x_bits.len(), self.cfg.lanes)?;
        check_len(y_bits.len(), self.cfg.lanes)?;
        let products: Vec<(bool, bool)> = x_bits
            .iter()
            .zip(y_bits)
            .map(|(&(xp, xn), &(yp, yn))| tlb_multiply_bit(xp, xn, yp, yn))
            .collect();
        self.latch_products(&products)?;
        self.load_inputs()?;
        let l = self.main_cycles + 1;
        for substep in 1..=self.cfg.lanes {
            let (ps, ns) = self.shift.fronts();
            self.high_clock_step()?;
            if let Some(rows) = trace.as_deref_mut() {
                rows.push(self.trace_row(l, substep, ps, ns));
            }
        }
        let out = self.emit()?;
        if let Some(rows) = trace {
            rows.push(self.trace_row(l, self.cfg.lanes + 1, false, false));
        }
        Ok(out)
    }

    fn trace_row(&self, l: usize, substep: usize, ps: bool, ns: bool) -> EngineTraceRow {
        EngineTraceRow {
            l,
            substep,
            ps_front: ps,
            ns_front: ns,
            pc_count: self.pc.count(),
            nc_count: self.nc.count(),
            zp: self.out.0,
            zn: self.out.1,
            cc_cancellations: self.cancellations,
        }
    }

    /// Inverts one carry register cell.
    pub fn flip_carry_cell(&mut self, line: CarryLine, cell: usize) -> Result<()> {
        match line {
            CarryLine::Positive => self.pc.flip(cell)?,
            CarryLine::Negative => self.nc.flip(cell)?,
        }
        self.faults += 1;
        Ok(())
    }

    /// Flips a uniformly chosen carry cell with probability `p_flip`.
    pub fn maybe_inject_fault(&mut self, p_flip: f64, rng: &mut RandomSource) -> Result<bool> {
        if !rng.bernoulli(p_flip) {
            return Ok(false);
        }
        let line = if rng.index(2) == 0 {
            CarryLine::Positive
        } else {
            CarryLine::Negative
        };
        let cell = rng.index(self.cfg.carry_len);
        self.flip_carry_cell(line, cell)?;
        Ok(true)
    }

    pub fn diagnostics(&self) -> EngineDiagnostics {
        EngineDiagnostics {
            overflow_events: self.pc.overflows() + self.nc.overflows(),
            lost_pos: self.lost_pos,
            lost_neg: self.lost_neg,
            cc_cancellations: self.cancellations,
            residual_pos: self.pc.count(),
            residual_neg: self.nc.count(),
            faults_injected: self.faults,
        }
    }
}

pub(crate) fn check_vector(v: &[f64], name: &str) -> Result<()> {
    for (k, &x) in v.iter().enumerate() {
        if x.is_nan() || !(-1.0..=1.0).contains(&x) {
            return Err(domain(format!("{name}[{k}] = {x} outside [-1, 1]")));
        }
    }
    Ok(())
}

/// TLB streams for every lane of both input vectors. Lane `k` of `x` draws
/// from sub-stream `2k`, lane `k` of `y` from `2k + 1`.
pub fn encode_lanes(
    x: &[f64],
    y: &[f64],
    len: usize,
    rng: &RandomSource,
) -> Result<(Vec<TlbStream>, Vec<TlbStream>)> {
    check_len(x.len(), y.len())?;
    check_vector(x, "x")?;
    check_vector(y, "y")?;
    let xs = x
        .iter()
        .enumerate()
        .map(|(k, &v)| encode_tlb(v, len, &mut rng.derive(2 * k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let ys = y
        .iter()
        .enumerate()
        .map(|(k, &v)| encode_tlb(v, len, &mut rng.derive(2 * k as u64 + 1)))
        .collect::<Result<Vec<_>>>()?;
    Ok((xs, ys))
}

/// Optional per-cycle fault injection into the carry registers.
#[derive(Debug)]
pub struct FaultPlan<'a> {
    pub p_flip: f64,
    pub rng: &'a mut RandomSource,
}

/// Runs the engine over pre-encoded lane streams.
pub fn run_engine_on_streams(
    xs: &[TlbStream],
    ys: &[TlbStream],
    cfg: EngineConfig,
    mut faults: Option<FaultPlan<'_>>,
    mut trace: Option<&mut Vec<EngineTraceRow>>,
) -> Result<(TlbStream, EngineDiagnostics)> {
    check_len(xs.len(), cfg.lanes)?;
    check_len(ys.len(), cfg.lanes)?;
    for s in xs.iter().chain(ys) {
        if s.len() < cfg.len {
            return Err(Error::EndOfStream(s.len()));
        }
    }
    let mut engine = Engine::new(cfg)?;
    let mut z = TlbStream::zeros(cfg.len);
    let mut xb = vec![(false, false); cfg.lanes];
    let mut yb = vec![(false, false); cfg.lanes];
    for l in 0..cfg.len {
        if let Some(plan) = faults.as_mut() {
            engine.maybe_inject_fault(plan.p_flip, plan.rng)?;
        }
        for k in 0..cfg.lanes {
            xb[k] = xs[k].bits(l);
            yb[k] = ys[k].bits(l);
        }
        let (zp, zn) = engine.main_clock_cycle_traced(&xb, &yb, trace.as_deref_mut())?;
        z.set_bits(l, zp, zn);
    }
    Ok((z, engine.diagnostics()))
}

/// Estimates ⟨x, y⟩ with the sequential engine.
pub fn run_inner_product(
    x: &[f64],
    y: &[f64],
    cfg: EngineConfig,
    rng: &RandomSource,
) -> Result<(TlbStream, EngineDiagnostics)> {
    cfg.validate()?;
    check_len(x.len(), cfg.lanes)?;
    let (xs, ys) = encode_lanes(x, y, cfg.len, rng)?;
    run_engine_on_streams(&xs, &ys, cfg, None, None)
}
