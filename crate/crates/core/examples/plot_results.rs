//! Runs a small simulation with the single-pair upper bound and renders it
//! as SVG.
//!
//! cargo run --release --example plot_results -- [out.svg]

use subscan::experiment::{run_experiment, summarize, ExperimentConfig, Mode};
use subscan::plot::render_svg;
use subscan::PermutationKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "results.svg".into());
    let cfg = ExperimentConfig {
        rows: 60,
        cols: 40,
        sizes: vec![(5, 5), (10, 4)],
        kinds: vec![PermutationKind::Bidimensional],
        replicates: 1999,
        reps: 5,
        multipliers: vec![0.5, 1.0, 1.5, 2.0, 3.0],
        mode: Mode::UpperBound,
        no_timing: true,
        ..ExperimentConfig::default()
    };
    let rows = run_experiment(&cfg)?;
    for g in summarize(&rows) {
        println!("({}, {}) x{}: median p {:.3}", g.m, g.n, g.multiplier, g.median);
    }
    std::fs::write(&out, render_svg(&rows))?;
    println!("wrote {out}");
    Ok(())
}
