//! Chunk-parallel Monte-Carlo over the counter-addressed sample streams.
//!
//! Samples are cut into fixed chunks whose boundaries do not depend on the
//! worker count, and partial accumulators are merged in chunk order, so the
//! estimates are bit-identical for any number of workers.

use beamsec_core::channel::CouplingMatrix;
use beamsec_core::rates::{check_instance, eve_rate_mc_range, eve_rate_upper_bound, user_rate_mc_range, McAccumulator, PowerAllocation, RateReport};
use beamsec_core::rng::SeedSpace;
use rayon::prelude::*;

pub const CHUNK: u64 = 256;

fn chunks(samples: u64) -> Vec<std::ops::Range<u64>> {
    (0..samples.div_ceil(CHUNK))
        .map(|c| c * CHUNK..((c + 1) * CHUNK).min(samples))
        .collect()
}

fn merged(parts: &[McAccumulator]) -> McAccumulator {
    let mut acc = McAccumulator::default();
    for p in parts {
        acc.merge(p);
    }
    acc
}

/// Parallel counterpart of `beamsec_core::rates::secrecy_rates`; runs on the
/// current rayon pool.
pub fn secrecy_rates_par(
    alloc: &PowerAllocation,
    omegas: &[CouplingMatrix],
    omega_eve: &CouplingMatrix,
    samples: u64,
    seeds: &SeedSpace,
    eve_mc: bool,
) -> beamsec_core::Result<RateReport> {
    if samples == 0 {
        return Err(beamsec_core::Error::Config("Monte-Carlo needs at least one sample".into()));
    }
    check_instance(alloc, omegas, omega_eve)?;
    let k_users = alloc.users();
    let ranges = chunks(samples);
    let jobs: Vec<(usize, usize)> = (0..k_users).flat_map(|k| (0..ranges.len()).map(move |c| (k, c))).collect();

    let user_parts = jobs
        .par_iter()
        .map(|&(k, c)| user_rate_mc_range(alloc, k, &omegas[k], seeds, ranges[c].clone()))
        .collect::<beamsec_core::Result<Vec<_>>>()?;
    let rates = user_parts.chunks(ranges.len()).map(|p| merged(p).estimate()).collect();

    let eve = if eve_mc {
        let parts: Vec<McAccumulator> = jobs
            .par_iter()
            .map(|&(k, c)| eve_rate_mc_range(alloc.user(k), k, omega_eve, seeds, ranges[c].clone()))
            .collect();
        Some(parts.chunks(ranges.len()).map(|p| merged(p).estimate()).collect())
    } else {
        None
    };
    let bounds = (0..k_users).map(|k| eve_rate_upper_bound(alloc.user(k), omega_eve)).collect();
    Ok(RateReport::assemble(rates, bounds, eve))
}
