//! Planted blocks under each noise family: the block mean tracks the tilted
//! mean while the background stays centred.
//!
//! cargo run --example planted_instance -- [multiplier]

use subscan::{generate_instance, submatrix_sum, sum_stat, theta_crit, NoiseFamily, SubmatrixSupport};

fn main() -> subscan::Result<()> {
    let multiplier: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1.5);
    let (rows, cols, m, n) = (200, 100, 10, 15);
    let theta = multiplier * theta_crit(rows, cols, m, n)?;
    println!("theta = {theta:.4} ({multiplier} x theta_crit)");
    println!("{:<17} {:>12} {:>12} {:>12}", "family", "tilted mean", "block mean", "rest mean");

    for family in NoiseFamily::ALL {
        let inst = generate_instance(rows, cols, m, n, theta, family, 11)?;
        let support = inst.support.clone().unwrap_or(SubmatrixSupport::leading(m, n)?);
        let block = submatrix_sum(&inst.data, &support)?;
        let rest = sum_stat(&inst.data) - block;
        let cells = (m * n) as f64;
        println!(
            "{:<17} {:>12.4} {:>12.4} {:>12.4}",
            family.name(),
            family.tilted_mean(theta),
            block / cells,
            rest / ((rows * cols) as f64 - cells)
        );
    }
    Ok(())
}
