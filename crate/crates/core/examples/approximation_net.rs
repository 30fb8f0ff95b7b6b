//! k-binary approximation nets: the table for a range, the approximation of
//! single integers, and how the net shrinks the candidate size grid.
//!
//! cargo run --example approximation_net -- [max] [k]

use subscan::detect::net_sizes;
use subscan::{build_net, default_k, k_binary_approx};

fn main() -> subscan::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let max = args.first().copied().unwrap_or(1024);
    let k = match args.get(1) {
        Some(&k) => k as u32,
        None => default_k(max)?,
    };

    let net = build_net(max, k)?;
    println!("net of 1..={max} keeping {k} leading binary digits: {} elements", net.len());
    for (binary, decimal) in net.table() {
        println!("  {binary} {decimal}");
    }

    for c in [5, 100, 777, 1000] {
        let a = k_binary_approx(c, k)?;
        println!("{c} -> {a} (relative error {:.3})", (c - a) as f64 / c as f64);
    }

    let (rows, cols) = (200, 100);
    let (kr, kc) = (default_k(rows as u64)?, default_k(cols as u64)?);
    let sizes = net_sizes(rows, cols, kr, kc)?;
    println!(
        "{rows}x{cols}: {} net sizes instead of {} (k = {kr}, {kc})",
        sizes.len(),
        rows * cols
    );
    Ok(())
}
