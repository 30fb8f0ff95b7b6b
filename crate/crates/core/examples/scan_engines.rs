//! Exhaustive scan against the alternating heuristic on small planted
//! instances, and the heuristic alone on a full-size one.
//!
//! cargo run --release --example scan_engines -- [instances]

use std::time::Instant;

use subscan::{generate_instance, scan_exact, scan_las, theta_crit, NoiseFamily};

fn main() -> subscan::Result<()> {
    let instances: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(50);

    let (rows, cols, m, n) = (12, 10, 3, 3);
    let theta = theta_crit(rows, cols, m, n)?;
    let (mut agree, mut gap) = (0, 0.0f64);
    let start = Instant::now();
    for seed in 0..instances {
        let inst = generate_instance(rows, cols, m, n, theta, NoiseFamily::Gaussian, seed)?;
        let exact = scan_exact(&inst.data, m, n)?;
        let las = scan_las(&inst.data, m, n, 20, 100, seed)?;
        agree += usize::from(las.value == exact.value);
        gap = gap.max(exact.value - las.value);
    }
    println!(
        "{rows}x{cols}, ({m}, {n}): heuristic = exhaustive on {agree}/{instances}, worst shortfall {gap:.4} ({:.2?})",
        start.elapsed()
    );

    let (rows, cols, m, n) = (200, 100, 10, 15);
    let inst = generate_instance(rows, cols, m, n, 1.5 * theta_crit(rows, cols, m, n)?, NoiseFamily::Gaussian, 1)?;
    let start = Instant::now();
    let las = scan_las(&inst.data, m, n, 20, 100, 1)?;
    let planted = inst.support.as_ref().unwrap();
    let hits = las.support.rows().iter().filter(|r| planted.rows().contains(r)).count();
    println!(
        "{rows}x{cols}, ({m}, {n}): scan {:.3}, {hits}/{m} planted rows recovered, {} iterations ({:.2?})",
        las.value,
        las.iterations,
        start.elapsed()
    );
    Ok(())
}
