//! Critical signal levels, the position of a signal relative to the scan and
//! sum boundaries, and the union-bound control of the Bonferroni p-value.
//!
//! cargo run --example detection_regime

use subscan::theory::{detection_ratios, empirical_log_pvalue_bound, log_pvalue_bound};
use subscan::{generate_instance, scan_las, theta_crit, NoiseFamily};

fn main() -> subscan::Result<()> {
    let (rows, cols) = (200, 100);
    for (m, n) in [(10, 15), (30, 10), (50, 50)] {
        println!("({m}, {n}): theta_crit = {:.6}", theta_crit(rows, cols, m, n)?);
    }

    let (m, n) = (10, 15);
    let crit = theta_crit(rows, cols, m, n)?;
    for multiplier in [0.5, 1.0, 2.0] {
        let r = detection_ratios(multiplier * crit, rows, cols, m, n)?;
        println!(
            "theta = {:.4}: scan ratio {:.3}, sum ratio {:.3}",
            r.theta, r.scan_ratio, r.sum_ratio
        );
    }

    // Gaussian noise with spread taken at 3 sigma.
    let bound = log_pvalue_bound(rows, cols, m, n, 1.5 * crit, 1.0, 3.0)?;
    println!("log p-value bound at 1.5 x theta_crit: {bound:.3} (vacuous when positive)");

    for multiplier in [1.0, 4.0] {
        let inst = generate_instance(rows, cols, m, n, multiplier * crit, NoiseFamily::Gaussian, 2)?;
        let scan = scan_las(&inst.data, m, n, 20, 100, 2)?;
        let b = empirical_log_pvalue_bound(&inst.data, scan.value, m, n)?;
        println!("planted at {multiplier} x theta_crit: scan {:.2}, log bound {b:.3}", scan.value);
    }
    Ok(())
}
