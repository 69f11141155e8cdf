//! TLB multiplier and the shift-register-based non-scaled adder.

use std::fmt;

use crate::convert::{sm_to_tlb_bit, tlb_to_sm_bit};
use crate::error::{check_len, domain, Result};
use crate::formats::{Ternary, TlbStream};

/// Fixed-length register of pending carries.
///
/// Cell 0 is the front (output) end. Shifting in pushes a one at the front
/// and moves every cell one step back; shifting out moves every cell one
/// step forward and fills the back with zero. Without faults the ones stay
/// packed at the front (thermometer code).
#[derive(Clone, PartialEq, Eq)]
pub struct CarryShiftRegister {
    cells: Vec<bool>,
    overflows: u64,
}

impl CarryShiftRegister {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(domain("carry shift register capacity must be at least 1"));
        }
        Ok(Self {
            cells: vec![false; capacity],
            overflows: 0,
        })
    }

    /// Register with explicit cell contents, front first.
    pub fn from_cells(cells: &[bool]) -> Result<Self> {
        let mut r = Self::new(cells.len())?;
        r.cells.copy_from_slice(cells);
        Ok(r)
    }

    pub fn capacity(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    /// Number of stored carries.
    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.cells.iter().any(|&c| c)
    }

    pub fn is_full(&self) -> bool {
        self.cells.iter().all(|&c| c)
    }

    #[inline]
    pub fn front(&self) -> bool {
        self.cells[0]
    }

    /// Shift-in attempts that pushed a stored one off the back.
    pub fn overflows(&self) -> u64 {
        self.overflows
    }

    pub fn is_thermometer(&self) -> bool {
        self.cells.windows(2).all(|w| w[0] || !w[1])
    }

    /// Returns true when a stored carry was lost off the back end.
    pub fn shift_in(&mut self) -> bool {
        let dropped = self.cells[self.cells.len() - 1];
        self.cells.rotate_right(1);
        self.cells[0] = true;
        if dropped {
            self.overflows += 1;
        }
        dropped
    }

    /// Returns the bit that left through the front.
    pub fn shift_out(&mut self) -> bool {
        let front = self.cells[0];
        self.cells.rotate_left(1);
        let last = self.cells.len() - 1;
        self.cells[last] = false;
        front
    }

    /// Inverts one cell; used for fault injection.
    pub fn flip(&mut self, cell: usize) -> Result<()> {
        match self.cells.get_mut(cell) {
            Some(c) => {
                *c = !*c;
                Ok(())
            }
            None => Err(domain(format!(
                "cell {cell} out of range for capacity {}",
                self.cells.len()
            ))),
        }
    }

    pub fn clear(&mut self) {
        self.cells.iter_mut().for_each(|c| *c = false);
    }
}

impl fmt::Debug for CarryShiftRegister {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CarryShiftRegister(")?;
        for &c in &self.cells {
            write!(f, "{}", c as u8)?;
        }
        write!(f, ", overflows={})", self.overflows)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AdderDiagnostics {
    pub overflow_events: u64,
    /// Positive and negative carries lost to overflow.
    pub lost_pos: u64,
    pub lost_neg: u64,
    pub residual_pos: usize,
    pub residual_neg: usize,
}

/// TLB multiplier: TLB→SM on both inputs, SM core (sign XOR, magnitude AND),
/// SM→TLB on the product.
#[inline]
pub fn tlb_multiply_bit(xp: bool, xn: bool, yp: bool, yn: bool) -> (bool, bool) {
    let (xs, xm) = tlb_to_sm_bit(xp, xn);
    let (ys, ym) = tlb_to_sm_bit(yp, yn);
    sm_to_tlb_bit(xs ^ ys, xm && ym)
}

pub fn tlb_multiply(x: &TlbStream, y: &TlbStream) -> Result<TlbStream> {
    check_len(x.len(), y.len())?;
    let mut out = TlbStream::zeros(x.len());
    for i in 0..x.len() {
        let (xp, xn) = x.bits(i);
        let (yp, yn) = y.bits(i);
        let (vp, vn) = tlb_multiply_bit(xp, xn, yp, yn);
        out.set_bits(i, vp, vn);
    }
    Ok(out)
}

/// One row of the per-position adder trace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AdderTraceRow {
    pub x: Ternary,
    pub y: Ternary,
    pub z: Ternary,
    pub pc_count: usize,
    pub nc_count: usize,
    pub overflows: u64,
}

/// Two-input non-scaled adder with positive and negative carry registers.
#[derive(Clone, Debug)]
pub struct NonScaledAdder {
    pc: CarryShiftRegister,
    nc: CarryShiftRegister,
    lost_pos: u64,
    lost_neg: u64,
}

impl NonScaledAdder {
    pub fn new(capacity: usize) -> Result<Self> {
        Ok(Self {
            pc: CarryShiftRegister::new(capacity)?,
            nc: CarryShiftRegister::new(capacity)?,
            lost_pos: 0,
            lost_neg: 0,
        })
    }

    pub fn positive_carries(&self) -> &CarryShiftRegister {
        &self.pc
    }

    pub fn negative_carries(&self) -> &CarryShiftRegister {
        &self.nc
    }

    pub fn positive_carries_mut(&mut self) -> &mut CarryShiftRegister {
        &mut self.pc
    }

    pub fn negative_carries_mut(&mut self) -> &mut CarryShiftRegister {
        &mut self.nc
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

    /// One position of the update logic.
    pub fn step(&mut self, x: Ternary, y: Ternary) -> Ternary {
        let p = self.pc.front() as i32;
        let n = self.nc.front() as i32;
        let z = match x.value() + y.value() {
            0 => {
                self.pc.shift_out();
                self.nc.shift_out();
                p - n
            }
            1 => {
                self.nc.shift_out();
                1 - n
            }
            -1 => {
                self.pc.shift_out();
                p - 1
            }
            2 => {
                if n == 1 {
                    self.nc.shift_out();
                } else {
                    self.push_pos();
                }
                1
            }
            -2 => {
                if p == 1 {
                    self.pc.shift_out();
                } else {
                    self.push_neg();
                }
                -1
            }
            _ => unreachable!("sum of two ternary values"),
        };
        // p - n can only be outside {-1,0,1} if both fronts differ by 2, which is impossible.
        Ternary::from_value(z).expect("adder output is ternary")
    }

    pub fn diagnostics(&self) -> AdderDiagnostics {
        AdderDiagnostics {
            overflow_events: self.pc.overflows() + self.nc.overflows(),
            lost_pos: self.lost_pos,
            lost_neg: self.lost_neg,
            residual_pos: self.pc.count(),
            residual_neg: self.nc.count(),
        }
    }
}

/// Adds two TLB streams without scaling, buffering excess in `capacity`-cell
/// carry registers.
pub fn nonscaled_add(
    x: &TlbStream,
    y: &TlbStream,
    capacity: usize,
) -> Result<(TlbStream, AdderDiagnostics)> {
    let (z, diag, _) = run_adder(x, y, capacity, false)?;
    Ok((z, diag))
}

/// Same as [`nonscaled_add`] and also returns one trace row per position.
pub fn nonscaled_add_traced(
    x: &TlbStream,
    y: &TlbStream,
    capacity: usize,
) -> Result<(TlbStream, AdderDiagnostics, Vec<AdderTraceRow>)> {
    run_adder(x, y, capacity, true)
}

fn run_adder(
    x: &TlbStream,
    y: &TlbStream,
    capacity: usize,
    trace: bool,
) -> Result<(TlbStream, AdderDiagnostics, Vec<AdderTraceRow>)> {
    check_len(x.len(), y.len())?;
    let mut adder = NonScaledAdder::new(capacity)?;
    let mut z = TlbStream::zeros(x.len());
    let mut rows = Vec::new();
    for i in 0..x.len() {
        let (xi, yi) = (x.symbol(i), y.symbol(i));
        let zi = adder.step(xi, yi);
        z.set(i, zi);
        if trace {
            rows.push(AdderTraceRow {
                x: xi,
                y: yi,
                z: zi,
                pc_count: adder.pc.count(),
                nc_count: adder.nc.count(),
                overflows: adder.pc.overflows() + adder.nc.overflows(),
            });
        }
    }
    Ok((z, adder.diagnostics(), rows))
}
