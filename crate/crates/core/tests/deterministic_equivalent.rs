use beamsec_core::channel::{beam_gains, synth_coupling, CouplingMatrix, ProfileParams, ProfileSpec, SystemDims};
use beamsec_core::de::*;
use beamsec_core::rates::{interference_cov, secrecy_rates, user_rate_mc, DiagonalCovariance, PowerAllocation};
use beamsec_core::rng::{Domain, SeedSpace};
use beamsec_core::Error;
use proptest::prelude::*;
use rand::Rng;

fn cm(rows: &[&[f64]]) -> CouplingMatrix {
    CouplingMatrix::from_rows(rows).unwrap()
}

fn diag(v: Vec<f64>) -> DiagonalCovariance {
    DiagonalCovariance { diag: v }
}

fn instance(m: usize, k: usize, n_r: usize, n_e: usize, seed: u64) -> (Vec<CouplingMatrix>, CouplingMatrix) {
    let dims = SystemDims::new(m, k, n_r, n_e, 1.0).unwrap();
    synth_coupling(&dims, &ProfileSpec::new("exponential-cluster", ProfileParams::default(), seed)).unwrap()
}

fn random_alloc(k: usize, m: usize, p: f64, seed: u64) -> PowerAllocation {
    let mut rng = SeedSpace::new(seed).stream(Domain::Instance, 0, 0);
    let raw: Vec<f64> = (0..k * m).map(|_| rng.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    PowerAllocation::new(k, m, raw.into_iter().map(|v| v * p / s).collect()).unwrap()
}

#[test]
fn eta_examples() {
    let o = cm(&[&[1.0, 2.0], &[3.0, 4.0]]);
    assert_eq!(eta(&o, &[1.0, 1.0]).unwrap(), beam_gains(&o).gains);
    assert_eq!(eta(&o, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    assert_eq!(eta(&o, &[1.0, 2.0]).unwrap(), vec![7.0, 10.0]);
    assert_eq!(eta_tilde(&o, &[1.0, 1.0]).unwrap(), vec![3.0, 7.0]);
    assert_eq!(eta_tilde(&o, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    assert_eq!(eta_tilde(&o, &[2.0, 1.0]).unwrap(), vec![4.0, 10.0]);
    assert!(matches!(eta(&o, &[1.0]), Err(Error::Dimension(_))));
    assert!(matches!(eta_tilde(&o, &[1.0, 2.0, 3.0]), Err(Error::Dimension(_))));
}

#[test]
fn zero_power_collapses_in_one_iteration() {
    let o = cm(&[&[1.0, 2.0, 0.5], &[3.0, 0.0, 1.0]]);
    let kbar = diag(vec![2.0, 4.0]);
    let s = de_fixed_point(&o, &[0.0; 3], &kbar, 1e-10, 100).unwrap();
    assert_eq!(s.iterations, 1);
    assert_eq!(s.phi_de, vec![1.0; 3]);
    assert_eq!(s.phi_tilde_de, vec![1.0; 2]);
    assert_eq!(s.gamma_tilde, vec![0.0; 2]);
    assert_eq!(s.gamma, eta(&o, &[0.5, 0.25]).unwrap());
    let r = de_user_rate(&s, &[0.0; 3], &kbar);
    assert!((r - kbar.logdet_bits()).abs() <= 1e-15);
}

#[test]
fn scalar_system_matches_closed_form() {
    // one beam, one antenna: Phi~ solves c a^2 - c a - w p = 0
    for (w, p, c) in [(1.0, 10.0, 1.0), (0.3, 2.0, 1.5), (4.0, 0.01, 3.0), (2.0, 1e4, 1.0)] {
        let s = de_fixed_point(&cm(&[&[w]]), &[p], &diag(vec![c]), 1e-12, 10_000).unwrap();
        let a = 0.5 * (1.0 + (1.0 + 4.0 * w * p / c).sqrt());
        assert!((s.phi_tilde_de[0] - a).abs() <= 1e-9 * a, "w={w} p={p} c={c}");
        assert!((s.gamma[0] - w / (a * c)).abs() <= 1e-9 * s.gamma[0]);
        let res = de_self_consistency(&s, &cm(&[&[w]]), &[p], &diag(vec![c])).unwrap();
        assert!(res <= 1e-10, "residual {res}");
    }
}

#[test]
fn reports_non_convergence_with_last_residual() {
    let (omegas, _) = instance(16, 1, 4, 1, 3);
    let err = de_fixed_point(&omegas[0], &[5.0; 16], &diag(vec![1.0; 4]), 1e-14, 2).unwrap_err();
    match err {
        Error::FixedPointNonConvergence { iterations, residual } => {
            assert_eq!(iterations, 2);
            assert!(residual > 1e-14);
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(de_fixed_point(&omegas[0], &[-1.0; 16], &diag(vec![1.0; 4]), 1e-10, 10).is_err());
    assert!(de_fixed_point(&omegas[0], &[1.0; 16], &diag(vec![0.5; 4]), 1e-10, 10).is_err());
}

#[test]
fn residual_decays_after_burn_in() {
    // logged rather than asserted: the iteration has no proven rate
    let mut decreasing = 0;
    let mut total = 0;
    for seed in 0..10 {
        let (omegas, _) = instance(32, 1, 4, 1, seed);
        let alloc = random_alloc(1, 32, 10f64.powf(seed as f64 / 3.0 - 1.0), seed);
        let mut residuals = Vec::new();
        de_fixed_point_traced(&omegas[0], alloc.user(0), &diag(vec![1.0; 4]), 1e-10, 10_000, &mut |_, r| {
            residuals.push(r)
        })
        .unwrap();
        for u in 5..residuals.len().saturating_sub(5) {
            total += 1;
            if residuals[u + 5] < residuals[u] {
                decreasing += 1;
            }
        }
    }
    eprintln!("residual(u+5) < residual(u) in {decreasing}/{total} windows");
}

#[test]
fn zero_power_bound_is_exactly_zero() {
    let (omegas, eve) = instance(16, 3, 2, 2, 6);
    let b = de_secrecy_lower_bound(&PowerAllocation::zeros(3, 16), &omegas, &eve, &DeConfig::default()).unwrap();
    assert_eq!(b.value, 0.0);
    assert!(b.unclamped.abs() <= 1e-10);
    assert!(b.per_user.iter().all(|t| t.r1.abs() <= 1e-12 && t.r2 == 0.0));
}

#[test]
fn no_eavesdropper_single_user_reduces_to_rate() {
    let (omegas, _) = instance(8, 1, 2, 1, 2);
    let alloc = random_alloc(1, 8, 4.0, 1);
    let b = de_secrecy_lower_bound(&alloc, &omegas, &CouplingMatrix::zeros(1, 8), &DeConfig::default()).unwrap();
    let kbar = diag(vec![1.0; 2]);
    let s = de_fixed_point(&omegas[0], alloc.user(0), &kbar, 1e-10, 10_000).unwrap();
    assert!((b.value - de_user_rate(&s, alloc.user(0), &kbar)).abs() <= 1e-12);
    assert_eq!(b.per_user[0].r2, 0.0);
}

#[test]
fn single_user_rate_matches_monte_carlo() {
    // M=64, K=1, N_r=2, uniform coupling, P=10
    let omega = CouplingMatrix::filled(2, 64, 1.0).unwrap();
    let alloc = PowerAllocation::new(1, 64, vec![10.0 / 64.0; 64]).unwrap();
    let kbar = interference_cov(&alloc, 0, &omega).unwrap();
    let s = de_fixed_point(&omega, alloc.user(0), &kbar, 1e-10, 10_000).unwrap();
    let de = de_user_rate(&s, alloc.user(0), &kbar);
    let mc = user_rate_mc(&alloc, 0, &omega, 4000, &SeedSpace::new(10)).unwrap();
    let mc_total = mc.mean + kbar.logdet_bits();
    let tol = (0.02 * mc_total).max(3.0 * mc.std_error);
    assert!((de - mc_total).abs() <= tol, "DE {de} vs MC {mc_total} +- {}", mc.std_error);
}

#[test]
fn lower_bound_tracks_monte_carlo_on_a_small_family() {
    for seed in 0..3 {
        let (omegas, eve) = instance(64, 3, 2, 2, 30 + seed);
        let alloc = random_alloc(3, 64, 10.0, seed);
        let de = de_secrecy_lower_bound(&alloc, &omegas, &eve, &DeConfig::default()).unwrap();
        let mc = secrecy_rates(&alloc, &omegas, &eve, 2000, &SeedSpace::new(seed), false).unwrap();
        let lb = mc.secrecy_sum_rate_lb;
        let tol = (0.03 * lb.mean.abs()).max(3.0 * lb.std_error);
        assert!((de.value - lb.mean).abs() <= tol, "seed {seed}: {} vs {}", de.value, lb.mean);
    }
}

#[test]
fn rate_is_nondecreasing_in_each_beam_power() {
    let (omegas, _) = instance(12, 1, 3, 1, 4);
    let kbar = diag(vec![1.0, 1.5, 2.0]);
    let base = random_alloc(1, 12, 3.0, 7);
    let f = |lam: &[f64]| {
        let s = de_fixed_point(&omegas[0], lam, &kbar, 1e-12, 10_000).unwrap();
        de_user_rate(&s, lam, &kbar)
    };
    let f0 = f(base.user(0));
    for m in 0..12 {
        let mut lam = base.user(0).to_vec();
        lam[m] += 1e-3;
        assert!(f(&lam) >= f0 - 1e-12, "beam {m}");
    }
}

#[test]
fn sum_of_rate_terms_is_concave_along_segments() {
    let (omegas, eve) = instance(10, 3, 2, 2, 9);
    for seed in 0..8 {
        let a = random_alloc(3, 10, 5.0, 100 + seed);
        let b = random_alloc(3, 10, 5.0, 200 + seed);
        let f = |x: &PowerAllocation| -> f64 {
            de_secrecy_lower_bound(x, &omegas, &eve, &DeConfig { xi1: 1e-13, max_iter: 100_000 })
                .unwrap()
                .per_user
                .iter()
                .map(|t| t.r1)
                .sum()
        };
        for t in [0.25, 0.5, 0.75] {
            let lo = a.lerp(&b, t - 0.25);
            let mid = a.lerp(&b, t);
            let hi = a.lerp(&b, t + 0.25);
            let second = f(&lo) - 2.0 * f(&mid) + f(&hi);
            assert!(second <= 1e-9, "seed {seed} t {t}: {second}");
        }
    }
}

fn small_instance() -> impl Strategy<Value = (CouplingMatrix, Vec<f64>, Vec<f64>)> {
    (1usize..4, 1usize..7).prop_flat_map(|(n, m)| {
        (
            prop::collection::vec(0.0f64..3.0, n * m).prop_map(move |e| CouplingMatrix::new(n, m, e).unwrap()),
            prop::collection::vec(0.0f64..5.0, m),
            prop::collection::vec(1.0f64..4.0, n),
        )
    })
}

proptest! {
    #[test]
    fn converged_states_are_self_consistent((omega, lambda, kbar) in small_instance()) {
        let kbar = diag(kbar);
        let s = de_fixed_point(&omega, &lambda, &kbar, 1e-10, 10_000).unwrap();
        prop_assert!(s.residual <= 1e-10);
        prop_assert!(s.phi_de.iter().all(|&v| v >= 1.0));
        prop_assert!(s.phi_tilde_de.iter().all(|&v| v >= 1.0));
        prop_assert!(de_self_consistency(&s, &omega, &lambda, &kbar).unwrap() <= 1e-9);
    }

    #[test]
    fn eta_is_linear((omega, a, b) in small_instance(), s in 0.0f64..3.0) {
        let x: Vec<f64> = a.iter().map(|v| s * v).collect();
        let lhs = eta_tilde(&omega, &x).unwrap();
        let rhs = eta_tilde(&omega, &a).unwrap();
        for (l, r) in lhs.iter().zip(rhs) {
            prop_assert!((l - s * r).abs() <= 1e-12 * (1.0 + l.abs()));
        }
        let y: Vec<f64> = b.iter().map(|v| s * v).collect();
        let lhs = eta(&omega, &y).unwrap();
        let rhs = eta(&omega, &b).unwrap();
        for (l, r) in lhs.iter().zip(rhs) {
            prop_assert!((l - s * r).abs() <= 1e-12 * (1.0 + l.abs()));
        }
    }
}
