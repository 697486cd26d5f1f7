mod common;

use beamsec::config::ScenarioConfig;
use beamsec::grid::solve_grid;
use beamsec::with_workers;

fn load(name: &str, grid: &[f64]) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::load(&common::config_path(name)).unwrap();
    cfg.snr_grid = grid.to_vec();
    cfg
}

#[test]
fn bound_is_nondecreasing_along_the_grid() {
    // cold starts at 20 dB land on a worse stationary point than at 15 dB here
    let cfg = load("m128-k8.json", &[20.0, 15.0]);
    let (omegas, eve) = cfg.coupling().unwrap();
    let pts = solve_grid(&cfg, &omegas, &eve);
    let hi = pts[0].result.as_ref().unwrap();
    let lo = pts[1].result.as_ref().unwrap();
    assert!(hi.state.objective >= lo.state.objective, "{} < {}", hi.state.objective, lo.state.objective);
    assert!(pts[0].warm_started);
    assert!(!pts[1].warm_started);
    assert!(hi.alloc.total() <= pts[0].solver.p * (1.0 + 1e-12));
}

#[test]
fn continuation_is_independent_of_workers() {
    let cfg = load("small.json", &[10.0, -10.0, 0.0, 20.0, 5.0]);
    let (omegas, eve) = cfg.coupling().unwrap();
    let a = with_workers(1, || solve_grid(&cfg, &omegas, &eve)).unwrap();
    let b = with_workers(3, || solve_grid(&cfg, &omegas, &eve)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.snr_db, y.snr_db);
        assert_eq!(x.warm_started, y.warm_started);
        assert_eq!(x.result.as_ref().unwrap().alloc, y.result.as_ref().unwrap().alloc);
    }
    let mut by_snr: Vec<_> = a.iter().map(|p| (p.snr_db, p.result.as_ref().unwrap().state.objective)).collect();
    by_snr.sort_by(|x, y| x.0.total_cmp(&y.0));
    for w in by_snr.windows(2) {
        assert!(w[1].1 >= w[0].1, "{w:?}");
    }
}
