use beamsec_core::channel::*;
use beamsec_core::linalg::CMatrix;
use beamsec_core::rng::{Domain, SeedSpace};
use beamsec_core::Error;
use proptest::prelude::*;

#[test]
fn dft_entries_follow_the_definition() {
    let v = dft_basis(4).unwrap().matrix;
    for a in 0..4 {
        for b in 0..4 {
            let phase = -2.0 * std::f64::consts::PI * (a * b) as f64 / 4.0;
            assert!((v[(a, b)].re - phase.cos() / 2.0).abs() < 1e-15);
            assert!((v[(a, b)].im - phase.sin() / 2.0).abs() < 1e-15);
        }
    }
    let p = v.mul(&v.adjoint()).unwrap();
    assert!(p.max_abs_diff(&CMatrix::identity(4)) <= 1e-12);
}

#[test]
fn zero_variance_entries_sample_to_exact_zero() {
    let o = CouplingMatrix::from_rows(&[&[1.0, 0.0, 2.0], &[0.0, 3.0, 0.0]]).unwrap();
    let seeds = SeedSpace::new(9);
    for i in 0..20 {
        let g = sample_beam_channel(&o, &mut seeds.stream(Domain::UserChannel, 0, i)).entries;
        for (n, m) in [(0, 1), (1, 0), (1, 2)] {
            assert_eq!(g[(n, m)].re, 0.0);
            assert_eq!(g[(n, m)].im, 0.0);
        }
    }
}

#[test]
fn same_seed_gives_identical_samples() {
    let o = CouplingMatrix::from_rows(&[&[1.0, 0.5], &[2.0, 0.1]]).unwrap();
    let seeds = SeedSpace::new(1234);
    let a = sample_beam_channel(&o, &mut seeds.stream(Domain::UserChannel, 3, 77)).entries;
    let b = sample_beam_channel(&o, &mut seeds.stream(Domain::UserChannel, 3, 77)).entries;
    assert_eq!(a, b);
    let c = sample_beam_channel(&o, &mut seeds.stream(Domain::UserChannel, 3, 78)).entries;
    assert_ne!(a, c);
}

#[test]
fn unit_variance_scalar_mean_power() {
    let o = CouplingMatrix::from_rows(&[&[1.0]]).unwrap();
    let mut rng = SeedSpace::new(5).stream(Domain::UserChannel, 0, 0);
    let n = 100_000;
    let mean: f64 = (0..n)
        .map(|_| sample_beam_channel(&o, &mut rng).entries[(0, 0)].norm_sqr())
        .sum::<f64>()
        / n as f64;
    assert!((0.98..=1.02).contains(&mean), "mean |g|^2 = {mean}");
}

#[test]
fn empirical_variance_profile_within_four_se() {
    let o = CouplingMatrix::from_rows(&[&[0.2, 1.0, 3.5], &[2.0, 0.0, 0.7]]).unwrap();
    let mut rng = SeedSpace::new(42).stream(Domain::UserChannel, 0, 0);
    let n = 100_000;
    let mut sum = [0.0f64; 6];
    let mut sq = [0.0f64; 6];
    for _ in 0..n {
        let g = sample_beam_channel(&o, &mut rng).entries;
        for i in 0..6 {
            let v = g[(i / 3, i % 3)].norm_sqr();
            sum[i] += v;
            sq[i] += v * v;
        }
    }
    for i in 0..6 {
        let mean = sum[i] / n as f64;
        let var = (sq[i] / n as f64 - mean * mean).max(0.0);
        let se = (var / n as f64).sqrt();
        let target = o.get(i / 3, i % 3);
        assert!((mean - target).abs() <= 4.0 * se + 1e-300, "entry {i}: {mean} vs {target}");
    }
}

#[test]
fn uniform_profile_is_all_ones() {
    let dims = SystemDims::new(4, 2, 2, 3, 1.0).unwrap();
    let (users, eve) = synth_coupling(&dims, &ProfileSpec::uniform()).unwrap();
    assert_eq!(users.len(), 2);
    for o in users.iter().chain(std::iter::once(&eve)) {
        assert!(o.entries().iter().all(|&v| v == 1.0));
    }
    assert_eq!(eve.rows(), 3);
}

#[test]
fn sparse_support_zeroes_other_columns() {
    let dims = SystemDims::new(8, 3, 2, 2, 1.0).unwrap();
    let params = ProfileParams {
        support: Some(vec![0, 1]),
        ..Default::default()
    };
    let (users, eve) = synth_coupling(&dims, &ProfileSpec::new("sparse-beams", params, 3)).unwrap();
    for o in users.iter().chain(std::iter::once(&eve)) {
        for n in 0..o.rows() {
            assert!(o.row(n)[2..].iter().all(|&v| v == 0.0));
            assert!(o.row(n)[..2].iter().all(|&v| v > 0.0));
        }
    }
}

#[test]
fn profiles_are_normalized_and_deterministic() {
    let dims = SystemDims::new(32, 3, 4, 2, 1.0).unwrap();
    for kind in ["uniform", "exponential-cluster", "sparse-beams"] {
        let spec = ProfileSpec::new(kind, ProfileParams::default(), 17);
        let (a, ea) = synth_coupling(&dims, &spec).unwrap();
        let (b, eb) = synth_coupling(&dims, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(ea, eb);
        for o in a.iter().chain(std::iter::once(&ea)) {
            let expect = (o.rows() * 32) as f64;
            assert!((o.total() - expect).abs() <= 1e-9 * expect, "{kind}");
        }
    }
}

#[test]
fn profile_errors() {
    let dims = SystemDims::new(4, 1, 1, 1, 1.0).unwrap();
    let bad = ProfileSpec::new("winner-ii", ProfileParams::default(), 0);
    assert!(matches!(synth_coupling(&dims, &bad), Err(Error::Config(_))));
    let too_big = ProfileSpec::new(
        "sparse-beams",
        ProfileParams {
            support_size: Some(5),
            ..Default::default()
        },
        0,
    );
    assert!(matches!(synth_coupling(&dims, &too_big), Err(Error::Config(_))));
    assert!(matches!(SystemDims::new(0, 1, 1, 1, 1.0), Err(Error::Dimension(_))));
    assert!(matches!(SystemDims::new(1, 1, 1, 1, -1.0), Err(Error::Config(_))));
}

#[test]
fn coupling_json_layout() {
    let o = CouplingMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
    let json = serde_json::to_value(&o).unwrap();
    assert_eq!(json, serde_json::json!({"rows": 2, "cols": 2, "entries": [1.0, 2.0, 3.0, 4.0]}));
    let back: CouplingMatrix = serde_json::from_value(json).unwrap();
    assert_eq!(back, o);
}

fn coupling(rows: usize, cols: usize) -> impl Strategy<Value = CouplingMatrix> {
    prop::collection::vec(0.0f64..10.0, rows * cols).prop_map(move |e| CouplingMatrix::new(rows, cols, e).unwrap())
}

proptest! {
    #[test]
    fn beam_gains_are_linear(a in 0.0f64..5.0, b in 0.0f64..5.0, o1 in coupling(3, 5), o2 in coupling(3, 5)) {
        let combo = o1.combine(a, &o2, b).unwrap();
        let g = beam_gains(&combo).gains;
        let g1 = beam_gains(&o1).gains;
        let g2 = beam_gains(&o2).gains;
        for m in 0..5 {
            let expect = a * g1[m] + b * g2[m];
            prop_assert!((g[m] - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn beam_gains_are_column_sums(o in coupling(4, 6)) {
        let g = beam_gains(&o).gains;
        for m in 0..6 {
            let s: f64 = (0..4).map(|n| o.get(n, m)).sum();
            prop_assert_eq!(g[m], s);
        }
    }
}
