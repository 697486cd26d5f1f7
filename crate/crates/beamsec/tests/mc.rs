use beamsec::mc::{secrecy_rates_par, CHUNK};
use beamsec::with_workers;
use beamsec_core::channel::{synth_coupling, CouplingMatrix, ProfileParams, ProfileSpec, SystemDims};
use beamsec_core::rates::{secrecy_rates, PowerAllocation};
use beamsec_core::rng::SeedSpace;
use proptest::prelude::*;

fn instance(seed: u64) -> (Vec<CouplingMatrix>, CouplingMatrix, PowerAllocation) {
    let dims = SystemDims::new(8, 3, 2, 2, 1.0).unwrap();
    let (omegas, eve) = synth_coupling(&dims, &ProfileSpec::new("exponential-cluster", ProfileParams::default(), seed)).unwrap();
    let alloc = PowerAllocation::new(3, 8, (0..24).map(|i| 0.05 + 0.01 * (i % 5) as f64).collect()).unwrap();
    (omegas, eve, alloc)
}

#[test]
fn matches_the_sequential_estimator() {
    let (omegas, eve, alloc) = instance(3);
    let seeds = SeedSpace::new(17);
    for samples in [1, CHUNK - 1, CHUNK, CHUNK + 1, 3 * CHUNK + 17] {
        let par = with_workers(3, || secrecy_rates_par(&alloc, &omegas, &eve, samples, &seeds, true)).unwrap().unwrap();
        let seq = secrecy_rates(&alloc, &omegas, &eve, samples, &seeds, true).unwrap();
        let tol = 1e-12 * (1.0 + seq.secrecy_sum_rate_lb.mean.abs());
        assert!((par.secrecy_sum_rate_lb.mean - seq.secrecy_sum_rate_lb.mean).abs() <= tol, "{samples}");
        for (a, b) in par.per_user_rate.iter().zip(&seq.per_user_rate) {
            assert!((a.mean - b.mean).abs() <= 1e-12 * (1.0 + b.mean.abs()));
        }
    }
}

#[test]
fn bit_identical_across_worker_counts() {
    let (omegas, eve, alloc) = instance(5);
    let seeds = SeedSpace::new(1);
    let runs: Vec<_> = [1, 2, 5, 8]
        .iter()
        .map(|&w| with_workers(w, || secrecy_rates_par(&alloc, &omegas, &eve, 1000, &seeds, true)).unwrap().unwrap())
        .collect();
    for r in &runs[1..] {
        assert_eq!(r, &runs[0]);
    }
}

#[test]
fn rejects_bad_inputs() {
    let (omegas, eve, alloc) = instance(1);
    let seeds = SeedSpace::new(0);
    assert!(secrecy_rates_par(&alloc, &omegas, &eve, 0, &seeds, false).is_err());
    assert!(secrecy_rates_par(&alloc, &omegas[..2], &eve, 10, &seeds, false).is_err());
    let narrow = CouplingMatrix::filled(2, 4, 1.0).unwrap();
    assert!(secrecy_rates_par(&alloc, &omegas, &narrow, 10, &seeds, false).is_err());
}

#[test]
fn zero_power_gives_zero_rates() {
    let (omegas, eve, _) = instance(2);
    let alloc = PowerAllocation::new(3, 8, vec![0.0; 24]).unwrap();
    let r = secrecy_rates_par(&alloc, &omegas, &eve, 300, &SeedSpace::new(4), true).unwrap();
    assert_eq!(r.secrecy_sum_rate_lb.mean, 0.0);
    assert!(r.per_user_rate.iter().all(|e| e.mean == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lower_bound_never_exceeds_exact_secrecy_rate_by_much(seed in 0u64..1000, samples in 200u64..600) {
        let (omegas, eve, alloc) = instance(seed);
        let r = secrecy_rates_par(&alloc, &omegas, &eve, samples, &SeedSpace::new(seed), true).unwrap();
        let mc = r.secrecy_sum_rate_mc.unwrap();
        let lb = r.secrecy_sum_rate_lb;
        prop_assert!(lb.mean <= mc.mean + 3.0 * (lb.std_error + mc.std_error) + 1e-12);
        // the closed-form eavesdropper bound dominates its ergodic rate
        let eve_mc = r.per_user_eve_mc.unwrap();
        for (bound, e) in r.per_user_eve_bound.iter().zip(&eve_mc) {
            prop_assert!(*bound >= e.mean - 3.0 * e.std_error);
        }
    }
}
