//! SR-LDPC codes: a sparse regression inner code concatenated with a
//! non-binary LDPC outer code, decoded non-coherently with AMP or OAMP on a
//! quasi-static Rayleigh SIMO channel, plus the state-evolution engine and
//! the Monte-Carlo harness used to characterize it.

pub mod channel;
pub mod decoder;
pub mod error;
pub mod gf;
pub mod harness;
pub mod nbldpc;
pub mod se;
pub mod sparc;
pub mod stats;

pub use error::{Error, Result};
