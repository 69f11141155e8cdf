//! Bit-true simulation of stochastic-computing arithmetic.
//!
//! Values in [-1, 1] are carried by pairs of random bit streams. The crate
//! models the two-line bipolar (TLB) and signed-magnitude (SM) formats, a
//! shift-register-based non-scaled adder, a sequential inner-product engine
//! with carry canceling, a counter-based adder-tree reference design, and the
//! Monte Carlo harness used to compare them.

pub mod arith;
pub mod baseline;
pub mod convert;
pub mod engine;
pub mod error;
pub mod eval;
pub mod formats;
pub mod rng;
pub mod trace;

pub use error::{Error, Result};
pub use formats::{BitStream, SmStream, Ternary, TlbStream};
pub use rng::RandomSource;
