//! Permutation p-values: full enumeration on a tiny matrix, Monte Carlo
//! estimates of the same quantity, and a single-size test on a planted
//! instance.
//!
//! cargo run --release --example permutation_pvalue -- [replicates]

use subscan::{
    exact_pvalue_enum, generate_instance, mc_pvalue, single_size_test, theta_crit, DataMatrix,
    MCConfig, NoiseFamily, PermutationKind, ScanEngine,
};

fn main() -> subscan::Result<()> {
    let replicates: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10_000);

    let x = DataMatrix::from_rows(&[[3.0, 1.0], [2.0, 0.0]])?;
    for kind in [PermutationKind::Unidimensional, PermutationKind::Bidimensional] {
        let exact = exact_pvalue_enum(&x, 1, 2, kind)?;
        let cfg = MCConfig::new(replicates, kind, 1, ScanEngine::exact());
        let mc = mc_pvalue(&x, 1, 2, &cfg)?;
        println!(
            "{kind}: exact {}/{} = {:.4}, Monte Carlo ({replicates}) {:.4}",
            exact.exceedances, exact.replicates, exact.value, mc.value
        );
    }

    let (rows, cols, m, n) = (40, 30, 4, 4);
    let crit = theta_crit(rows, cols, m, n)?;
    let cfg = MCConfig::new(199, PermutationKind::Bidimensional, 5, ScanEngine::default());
    for multiplier in [0.0, 1.0, 2.0] {
        let inst = generate_instance(rows, cols, m, n, multiplier * crit, NoiseFamily::Gaussian, 3)?;
        let out = single_size_test(&inst.data, m, n, &cfg, 0.05)?;
        println!(
            "theta = {multiplier} x theta_crit: p = {:.4}, reject = {}",
            out.corrected_pvalue, out.reject
        );
    }
    Ok(())
}
