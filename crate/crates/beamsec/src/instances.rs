//! Random problem instances shared by the verification suites.

use beamsec_core::channel::{synth_coupling, CouplingMatrix, ProfileParams, ProfileSpec, SystemDims};
use beamsec_core::rng::{Domain, SeedSpace};
use beamsec_core::Result;
use rand::Rng;

/// Exponential-cluster coupling with default parameters.
pub fn cluster_instance(m: usize, k: usize, n_r: usize, n_e: usize, seed: u64) -> Result<(Vec<CouplingMatrix>, CouplingMatrix)> {
    let dims = SystemDims::new(m, k, n_r, n_e, 1.0)?;
    synth_coupling(&dims, &ProfileSpec::new("exponential-cluster", ProfileParams::default(), seed))
}

/// Single-antenna users and a single-antenna eavesdropper whose beam gain
/// exceeds every user's on a random third of the beams and stays below 20%
/// of the strongest user elsewhere.
pub fn overlap_instance(m: usize, k: usize, seed: u64) -> Result<(Vec<CouplingMatrix>, CouplingMatrix)> {
    let (omegas, _) = cluster_instance(m, k, 1, 1, seed)?;
    let mut rng = SeedSpace::new(seed).stream(Domain::Instance, 0, 0);
    let eve: Vec<f64> = (0..m)
        .map(|b| {
            let top = omegas.iter().map(|o| o.get(0, b)).fold(0.0, f64::max);
            let forced = rng.random::<f64>() < 1.0 / 3.0;
            let u: f64 = rng.random();
            if forced {
                top * (1.0 + u)
            } else {
                0.2 * top * u
            }
        })
        .collect();
    Ok((omegas, CouplingMatrix::new(1, m, eve)?))
}

/// Shapes `(K, M)` with `K M <= 8` visited by the oracle suite, in order.
pub const SMALL_SHAPES: [(usize, usize); 8] = [(1, 2), (1, 4), (1, 8), (2, 2), (2, 4), (4, 2), (2, 3), (3, 2)];
