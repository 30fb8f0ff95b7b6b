//! Upper bound on the net-Bonferroni p-value from a single calibrated pair,
//! the net size just above the planted one, across signal levels.
//!
//! cargo run --release --example upper_bound -- [replicates]

use std::time::Instant;

use subscan::{
    default_k, generate_instance, theta_crit, upper_bound_single_pair, MCConfig, NoiseFamily,
    PermutationKind, ScanEngine,
};

fn main() -> subscan::Result<()> {
    let replicates: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5000);

    let (rows, cols, m, n) = (200, 100, 10, 15);
    let crit = theta_crit(rows, cols, m, n)?;
    let (kr, kc) = (default_k(rows as u64)?, default_k(cols as u64)?);
    let cfg = MCConfig::new(replicates, PermutationKind::Bidimensional, 7, ScanEngine::default());

    for multiplier in [0.5, 1.0, 1.5, 2.0] {
        let inst = generate_instance(rows, cols, m, n, multiplier * crit, NoiseFamily::Gaussian, 2024)?;
        let start = Instant::now();
        let ub = upper_bound_single_pair(&inst.data, m, n, kr, kc, &cfg)?;
        println!(
            "{multiplier} x theta_crit: bound {:.4} = {} x {:.5} via ({}, {}) ({:.2?})",
            ub.value,
            ub.correction_factor,
            ub.pvalue.value,
            ub.m,
            ub.n,
            start.elapsed()
        );
    }
    Ok(())
}
