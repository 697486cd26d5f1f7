//! Counter-addressed random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream keyed by the
//! master seed and a [`Domain`], with the stream id packing a terminal index
//! and a sample counter. Any sample can be regenerated on its own, so serial and
//! chunked-parallel estimators see exactly the same realizations.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// What a stream is used for. Distinct domains never share key material.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    UserChannel = 1,
    EveChannel = 2,
    Synthesis = 3,
    Rotation = 4,
    Lemma = 5,
    Instance = 6,
}

const TERMINAL_BITS: u32 = 24;
const INDEX_BITS: u32 = 64 - TERMINAL_BITS;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Master seed from which all substreams are derived.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpace {
    pub seed: u64,
}

impl SeedSpace {
    pub const fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// Stream for `(domain, terminal, index)`.
    ///
    /// `terminal` must fit in 24 bits and `index` in 40 bits.
    pub fn stream(&self, domain: Domain, terminal: usize, index: u64) -> ChaCha8Rng {
        debug_assert!((terminal as u64) < (1 << TERMINAL_BITS));
        debug_assert!(index < (1 << INDEX_BITS));
        let mut state = self.seed ^ (domain as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(((terminal as u64) << INDEX_BITS) | index);
        rng
    }

    /// Derived seed space, e.g. one per scenario instance.
    pub fn child(&self, salt: u64) -> SeedSpace {
        let mut state = self.seed ^ salt.wrapping_mul(0xA24B_AED4_963E_E407);
        SeedSpace::new(splitmix64(&mut state))
    }
}

/// One draw of `CN(0, variance)`.
#[inline]
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    let scale = num_traits::Float::sqrt(variance * 0.5);
    Complex64::new(re * scale, im * scale)
}
