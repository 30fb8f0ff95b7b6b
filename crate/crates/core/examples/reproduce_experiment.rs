//! Simulation study: planted blocks over a grid of signal levels, tested with
//! the net-Bonferroni procedure, summarised per group and written as CSV.
//!
//! cargo run --release --example reproduce_experiment -- [config.json] [out.csv]
//!
//! Without a config this runs a reduced profile (one size, bidimensional
//! permutations, 20 instances per level). Any field of the JSON config
//! overrides the built-in defaults.

use std::time::Instant;

use subscan::experiment::{run_experiment, summarize, write_csv, ExperimentConfig};
use subscan::PermutationKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = match args.first() {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => ExperimentConfig {
            sizes: vec![(10, 15)],
            kinds: vec![PermutationKind::Bidimensional],
            reps: 20,
            ..ExperimentConfig::default()
        },
    };

    let start = Instant::now();
    let rows = run_experiment(&cfg)?;
    eprintln!("{} rows in {:.1?}", rows.len(), start.elapsed());

    println!("   m   n  kind            mult  median     min     max   floor");
    for g in summarize(&rows) {
        println!(
            "{:>4} {:>3}  {:<14} {:>5.3}  {:>6.4}  {:>6.4}  {:>6.4}  {:>6.4}",
            g.m, g.n, g.perm_kind, g.multiplier, g.median, g.min, g.max, g.floor
        );
    }

    if let Some(out) = args.get(1) {
        write_csv(&cfg, &rows, std::fs::File::create(out)?)?;
        eprintln!("wrote {out}");
    }
    Ok(())
}
