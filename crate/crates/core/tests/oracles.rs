//! Regression values computed with 50-digit arithmetic outside this crate.

use subscan::theory::{log_pvalue_bound, theta_crit};

const GRID: &str = include_str!("data/theta_crit_grid.csv");

#[test]
fn theta_crit_matches_high_precision_grid() {
    let mut checked = 0;
    for line in GRID.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let dims: Vec<usize> = f[..4].iter().map(|v| v.parse().unwrap()).collect();
        let want: f64 = f[4].parse().unwrap();
        let got = theta_crit(dims[0], dims[1], dims[2], dims[3]).unwrap();
        let rel = ((got - want) / want).abs();
        assert!(rel <= 1e-10, "{line}: got {got}, relative error {rel:e}");
        checked += 1;
    }
    assert_eq!(checked, 100);
}

#[test]
fn theta_crit_reference_points() {
    let a = theta_crit(200, 100, 10, 15).unwrap();
    let b = theta_crit(200, 100, 30, 10).unwrap();
    assert!((a - 0.882_527_601_145_921_7).abs() < 1e-14);
    assert!((b - 0.730_020_321_527_727).abs() < 1e-14);
}

#[test]
fn log_pvalue_bound_regression() {
    // spread 3 log(MN) corresponds to c = 1
    let spread = 3.0 * 20_000f64.ln();
    let v = log_pvalue_bound(200, 100, 10, 15, 0.8825, 1.0, spread).unwrap();
    // union term 87.6271..., Bernstein term -5.9970...: the bound is vacuous here
    assert!((v - 81.630_028_025_036_63).abs() < 1e-9, "{v}");
}
