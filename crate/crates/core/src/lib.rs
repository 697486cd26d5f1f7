//! Secrecy sum-rate bounds and beam-domain power allocation for massive MIMO
//! downlink with a passive multi-antenna eavesdropper.
//!
//! The crate is `no_std` (it needs `alloc`) and purely computational:
//!
//! * [`channel`] – system dimensions, coupling matrices, DFT beam basis and
//!   seeded beam-domain channel sampling.
//! * [`rates`] – closed-form covariance terms and Monte-Carlo estimators of the
//!   ergodic secrecy sum-rate and its Jensen lower bound.
//! * [`de`] – the deterministic-equivalent fixed point and the closed-form
//!   secrecy lower bound built on it.
//! * [`optimizer`] – the CCCP outer loop with the iterative water-filling inner
//!   solver.
//! * [`theory`] – executable checks of the structural results (beam-domain
//!   optimality, beam exclusion for single-antenna users, the ratio
//!   inequality) and an independent projected-gradient oracle.
//!
//! IO, configuration files, parallel drivers and the CLI live in the `beamsec`
//! crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod channel;
pub mod de;
mod error;
pub mod linalg;
pub mod optimizer;
pub mod rates;
pub mod rng;
pub mod theory;
pub mod trace;

pub use error::{Error, Result};

/// `log2(e)`, converts nats to bits.
pub const BITS_PER_NAT: f64 = core::f64::consts::LOG2_E;
