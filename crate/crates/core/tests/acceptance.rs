//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! cargo test --release --test acceptance [-- <criterion numbers>]

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use subscan::detect::single_size_test;
use subscan::experiment::{run_experiment, summarize, write_csv, ExperimentConfig, Mode};
use subscan::theory::{bernstein_log_tail, PopulationSummary};
use subscan::{
    build_net, exact_pvalue_enum, generate_instance, k_binary_approx, mc_pvalue, scan_exact,
    scan_las, theta_crit, DataMatrix, MCConfig, NoiseFamily, PermutationKind, ScanEngine,
};

type Criterion = (u32, &'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit: Duration) -> bool {
    elapsed <= limit
}

fn table_net() -> Verdict {
    let start = Instant::now();
    let net = build_net(1024, 3).unwrap();
    let elapsed = start.elapsed();
    let want: [u64; 36] = [
        1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14, 16, 20, 24, 28, 32, 40, 48, 56, 64, 80, 96, 112, 128,
        160, 192, 224, 256, 320, 384, 448, 512, 640, 768, 896, 1024,
    ];
    verdict(
        net.elements() == want && within(elapsed, Duration::from_secs(1)),
        format!("{} elements, {elapsed:.2?}", net.len()),
    )
}

fn approximation_bound() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut ok = true;
    for k in 1..=10u32 {
        let bound = 2f64.powi(1 - k as i32);
        for c in 1..=1_000_000u64 {
            let a = k_binary_approx(c, k).unwrap();
            let rel = (c - a.min(c)) as f64 / c as f64;
            ok &= a <= c && rel <= bound;
            worst = worst.max(rel / bound);
        }
    }
    let elapsed = start.elapsed();
    verdict(
        ok && within(elapsed, Duration::from_secs(30)),
        format!("1e7 pairs, max error / bound = {worst:.4}, {elapsed:.2?}"),
    )
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DataMatrix {
    let values = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DataMatrix::new(rows, cols, values).unwrap()
}

fn scan_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut equal, mut above) = (0, 0);
    for i in 0..200u64 {
        let x = normal_matrix(10, 10, &mut rng);
        let exact = scan_exact(&x, 3, 3).unwrap().value;
        let las = scan_las(&x, 3, 3, 20, 100, i).unwrap().value;
        equal += usize::from(las == exact);
        above += usize::from(las > exact);
    }
    let elapsed = start.elapsed();
    verdict(
        equal >= 190 && above == 0 && within(elapsed, Duration::from_secs(60)),
        format!("LAS = exact in {equal}/200, LAS > exact in {above}, {elapsed:.2?}"),
    )
}

fn permutation_oracle() -> Verdict {
    let x = DataMatrix::from_rows(&[[3.0, 1.0], [2.0, 0.0]]).unwrap();
    let exact = exact_pvalue_enum(&x, 1, 2, PermutationKind::Bidimensional).unwrap();
    let cfg = MCConfig::new(100_000, PermutationKind::Bidimensional, 4, ScanEngine::exact());
    let mc = mc_pvalue(&x, 1, 2, &cfg).unwrap();
    let diff = (mc.value - 2.0 / 3.0).abs();
    verdict(
        (exact.value - 2.0 / 3.0).abs() < 1e-15 && exact.exceedances == 16 && exact.replicates == 24 && diff <= 0.01,
        format!(
            "exact {}/{} = {:.6}, Monte Carlo {:.6} (|diff| {diff:.4})",
            exact.exceedances, exact.replicates, exact.value, mc.value
        ),
    )
}

fn level_control() -> Verdict {
    let reps = 1000u64;
    let mut rejections = 0;
    for r in 0..reps {
        let inst = generate_instance(20, 20, 3, 3, 0.0, NoiseFamily::Gaussian, 50_000 + r).unwrap();
        let cfg = MCConfig::new(200, PermutationKind::Bidimensional, 90_000 + r, ScanEngine::default());
        let out = single_size_test(&inst.data, 3, 3, &cfg, 0.05).unwrap();
        rejections += usize::from(out.reject);
    }
    let rate = rejections as f64 / reps as f64;
    verdict(rate <= 0.07, format!("rejection rate {rate:.3} ({rejections}/{reps})"))
}

fn planted_profile(replicates: usize, mode: Mode, multipliers: Vec<f64>) -> ExperimentConfig {
    ExperimentConfig {
        family: NoiseFamily::Gaussian,
        rows: 200,
        cols: 100,
        sizes: vec![(10, 15)],
        kinds: vec![PermutationKind::Bidimensional],
        replicates,
        reps: 20,
        multipliers,
        mode,
        no_timing: true,
        ..ExperimentConfig::default()
    }
}

fn medians_line(cfg: &ExperimentConfig) -> (Vec<(f64, f64)>, f64) {
    let rows = run_experiment(cfg).unwrap();
    let groups = summarize(&rows);
    let floor = groups[0].floor;
    (groups.iter().map(|g| (g.multiplier, g.median)).collect(), floor)
}

fn describe(medians: &[(f64, f64)]) -> String {
    medians
        .iter()
        .map(|(k, m)| format!("{k}:{m:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn net_power_curve() -> Verdict {
    let cfg = planted_profile(500, Mode::NetBonferroni, ExperimentConfig::default().multipliers);
    let (medians, floor) = medians_line(&cfg);
    let low = medians.first().unwrap().1;
    let high = medians.last().unwrap().1;
    verdict(
        low >= 0.9 && (high - floor).abs() < 1e-12 && (floor - 195.0 / 501.0).abs() < 1e-12,
        format!("floor {floor:.4}, medians {}", describe(&medians)),
    )
}

fn upper_bound_curve() -> Verdict {
    let cfg = planted_profile(5000, Mode::UpperBound, vec![0.625, 1.5]);
    let (medians, _) = medians_line(&cfg);
    let (low, high) = (medians[0].1, medians[1].1);
    verdict(
        low >= 0.5 && high <= 0.05,
        format!("medians {}", describe(&medians)),
    )
}

fn bernstein_tail() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut population: Vec<f64> = (0..10_000).map(|_| StandardNormal.sample(&mut rng)).collect();
    let summary = PopulationSummary::of(&population).unwrap();
    let trials = 100_000;
    let mut worst = 0.0f64;
    let mut details = Vec::new();
    for sample in [10usize, 100, 1000] {
        let mut hits = [0u32; 3];
        let ts = [0.05, 0.1, 0.2];
        for _ in 0..trials {
            let (chosen, _) = population.partial_shuffle(&mut rng, sample);
            let mean = chosen.iter().sum::<f64>() / sample as f64;
            for (h, t) in hits.iter_mut().zip(ts) {
                *h += u32::from(mean >= summary.mean + t);
            }
        }
        for (h, t) in hits.iter().zip(ts) {
            let bound = bernstein_log_tail(sample as u64, t, summary.variance, summary.spread())
                .unwrap()
                .exp();
            let empirical = f64::from(*h) / trials as f64;
            worst = worst.max(empirical / bound);
            details.push(format!("m={sample},t={t}: {empirical:.4}<={bound:.4}"));
        }
    }
    verdict(
        worst <= 1.05,
        format!("max empirical/bound {worst:.3}; {}", details.join(" ")),
    )
}

fn thread_determinism() -> Verdict {
    // every sweep strategy, since each parallelises differently
    let variants = [
        (Mode::NetBonferroni, true, false),
        (Mode::NetBonferroni, false, false),
        (Mode::NetBonferroni, true, true),
        (Mode::UpperBound, true, false),
    ];
    let mut identical = true;
    let mut parts = Vec::new();
    for (mode, prune, shared_permutations) in variants {
        let outputs: Vec<Vec<u8>> = [1, 4, 8]
            .into_iter()
            .map(|threads| {
                let cfg = ExperimentConfig {
                    rows: 40,
                    cols: 30,
                    sizes: vec![(6, 5)],
                    replicates: 59,
                    reps: 2,
                    multipliers: vec![0.75, 1.5],
                    mode,
                    prune,
                    shared_permutations,
                    threads: Some(threads),
                    no_timing: true,
                    ..ExperimentConfig::default()
                };
                let rows = run_experiment(&cfg).unwrap();
                let mut buf = Vec::new();
                write_csv(&cfg, &rows, &mut buf).unwrap();
                buf
            })
            .collect();
        let same = outputs.iter().all(|b| *b == outputs[0]);
        identical &= same;
        parts.push(format!(
            "{}(prune={prune},shared={shared_permutations}):{}",
            mode.name(),
            if same { "identical" } else { "differs" }
        ));
    }
    verdict(identical, format!("threads 1/4/8, {}", parts.join(" ")))
}

fn critical_levels() -> Verdict {
    // 50-digit evaluations
    let refs = [
        ((200, 100, 10, 15), 0.882_527_601_145_921_7, 0.88253),
        ((200, 100, 30, 10), 0.730_020_321_527_727, 0.73002),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for ((big_m, big_n, m, n), oracle, quoted) in refs {
        let v = theta_crit(big_m, big_n, m, n).unwrap();
        ok &= (v - oracle).abs() < 1e-12 && (v - quoted).abs() <= 1e-5;
        parts.push(format!("({big_m},{big_n},{m},{n}) -> {v:.8}"));
    }
    verdict(ok, parts.join(", "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "net for 1024 with k = 3", table_net),
        (2, "k-binary approximation error bound", approximation_bound),
        (3, "heuristic scan against exhaustive scan", scan_oracle),
        (4, "exact and Monte Carlo permutation p-value", permutation_oracle),
        (5, "level of the single-size test", level_control),
        (6, "net-Bonferroni medians over signal levels", net_power_curve),
        (7, "single-pair upper bound medians", upper_bound_curve),
        (8, "Bernstein tail without replacement", bernstein_tail),
        (9, "experiment output independent of threads", thread_determinism),
        (10, "critical signal levels", critical_levels),
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let v = check();
        let status = if v.pass { "PASS" } else { "FAIL" };
        println!(
            "[{status}] {id:>2} {name}: {} ({:.1?})",
            v.detail,
            start.elapsed()
        );
        failed += usize::from(!v.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
