//! Net-accelerated Bonferroni test on a planted 200x100 instance.
//!
//! cargo run --release --example bonferroni_net -- [multiplier] [replicates] [restarts]

use std::time::Instant;

use subscan::detect::{bonferroni_net_with, SweepOptions};
use subscan::{default_k, generate_instance, theta_crit, MCConfig, NoiseFamily, PermutationKind, ScanEngine};

fn main() -> subscan::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let multiplier: f64 = args.first().and_then(|s| s.parse().ok()).unwrap_or(1.5);
    let replicates: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let restarts: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(20);

    let (rows, cols, m, n) = (200, 100, 10, 15);
    let theta = multiplier * theta_crit(rows, cols, m, n)?;
    let inst = generate_instance(rows, cols, m, n, theta, NoiseFamily::Gaussian, 2024)?;
    let (k_rows, k_cols) = (default_k(rows as u64)?, default_k(cols as u64)?);
    let cfg = MCConfig::new(
        replicates,
        PermutationKind::Bidimensional,
        7,
        ScanEngine::las(restarts, 100),
    );
    let opts = SweepOptions {
        shared_permutations: false,
        prune: true,
    };

    let start = Instant::now();
    let out = bonferroni_net_with(&inst.data, k_rows, k_cols, &cfg, 0.05, opts)?;
    let elapsed = start.elapsed();

    println!("theta = {theta:.4} ({multiplier} x theta_crit), k = ({k_rows}, {k_cols})");
    println!(
        "sizes tested: {}, correction factor: {}, floor: {:.4}",
        out.per_size.len(),
        out.correction_factor,
        out.floor()
    );
    let full = out.per_size.iter().filter(|s| !s.pvalue.truncated()).count();
    println!("sizes calibrated with all {replicates} replicates: {full}");
    if let Some(best) = out.best_size() {
        println!("smallest per-size p-value: {:.5} at ({}, {})", best.pvalue.value, best.m, best.n);
    }
    println!(
        "corrected p-value: {:.4}  reject at 0.05: {}  ({:.2?})",
        out.corrected_pvalue, out.reject, elapsed
    );
    Ok(())
}
