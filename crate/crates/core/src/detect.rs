//! Size-adaptive detection: permutation scan tests over one or many submatrix
//! sizes, combined by Bonferroni correction.
//!
//! Two corrections are offered and never mixed. The full-grid variant
//! multiplies the smallest per-size p-value by `M * N` whatever the size list;
//! the net variant scans only `S_kM(M) x S_kN(N)` and multiplies by the
//! product of the net cardinalities. In both cases the result is clamped to 1.
//!
//! A size of `(M, N)` is allowed but degenerate: its scan is the plain sum,
//! which every permutation preserves, so its p-value is 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{build_net, neighbor, NeighborMode};
use crate::perm::{
    mc_pvalue_capped, observed_scan_seed, replicate_into, replicate_scan_seed, MCConfig,
    PValue,
};
use crate::rng::{self, TAG_SIZE};
use crate::stats::DataMatrix;

/// Which multiplicity correction produced a [`TestOutcome`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Correction {
    /// One size, no correction.
    Single,
    /// Factor `M * N`.
    FullGrid,
    /// Factor `|S_kM(M)| * |S_kN(N)|`.
    Net {
        k_rows: u32,
        k_cols: u32,
        rows_len: usize,
        cols_len: usize,
    },
}

/// Performance switches for multi-size sweeps. Both default to off.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Use one permutation stream for all sizes (every replicate is scanned
    /// at every size) instead of an independent stream per size.
    #[serde(default)]
    pub shared_permutations: bool,
    /// Stop calibrating a size once it cannot lower the corrected p-value
    /// (below 1, or below the best size so far when sizes have independent
    /// streams). The corrected p-value is unchanged; the per-size p-values of
    /// pruned sizes become lower bounds.
    #[serde(default)]
    pub prune: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizePValue {
    pub m: usize,
    pub n: usize,
    pub pvalue: PValue,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub corrected_pvalue: f64,
    pub per_size: Vec<SizePValue>,
    pub correction: Correction,
    pub correction_factor: u64,
    pub alpha: f64,
    pub reject: bool,
    /// Calibration settings, including the base seed and the scan engine.
    pub config: MCConfig,
    pub options: SweepOptions,
}

impl TestOutcome {
    pub fn sizes_tested(&self) -> Vec<(usize, usize)> {
        self.per_size.iter().map(|s| (s.m, s.n)).collect()
    }

    /// Smallest corrected p-value attainable with this many replicates.
    pub fn floor(&self) -> f64 {
        (self.correction_factor as f64 / (self.config.replicates as f64 + 1.0)).min(1.0)
    }

    /// The size with the smallest p-value (first in sweep order on ties).
    pub fn best_size(&self) -> Option<&SizePValue> {
        self.per_size
            .iter()
            .reduce(|a, b| if b.pvalue.value < a.pvalue.value { b } else { a })
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// `min(factor * min_p, 1)`. Pruned sizes count as 1.
pub fn bonferroni_combine(per_size: &[SizePValue], factor: u64) -> f64 {
    per_size
        .iter()
        .map(|s| {
            if s.pvalue.truncated() {
                1.0
            } else {
                factor as f64 * s.pvalue.value
            }
        })
        .fold(1.0, f64::min)
}

/// Seed of the calibration stream for one size.
fn size_seed(seed: u64, m: usize, n: usize) -> u64 {
    rng::derive(seed, &[TAG_SIZE, m as u64, n as u64])
}

/// Smallest exceedance count `c` with `factor * (c + 1) >= limit`, where
/// `limit` is a corrected value expressed in units of `1 / (B + 1)`.
fn prune_threshold(limit: u64, factor: u64) -> u64 {
    limit.div_ceil(factor.max(1)).saturating_sub(1)
}

fn size_config(cfg: &MCConfig, m: usize, n: usize) -> MCConfig {
    MCConfig {
        seed: size_seed(cfg.seed, m, n),
        ..*cfg
    }
}

fn sweep(
    x: &DataMatrix,
    sizes: &[(usize, usize)],
    cfg: &MCConfig,
    factor: u64,
    opts: SweepOptions,
) -> Result<Vec<SizePValue>> {
    cfg.validate()?;
    for &(m, n) in sizes {
        x.check_size(m, n)?;
    }
    let b1 = cfg.replicates as u64 + 1;
    if opts.shared_permutations {
        let stop_at = opts.prune.then(|| prune_threshold(b1, factor).max(1));
        return shared_sweep(x, sizes, cfg, stop_at);
    }
    if opts.prune {
        return pruned_sweep(x, sizes, cfg, factor);
    }
    sizes
        .par_iter()
        .map(|&(m, n)| {
            let pvalue = mc_pvalue_capped(x, m, n, &size_config(cfg, m, n), None)?;
            Ok(SizePValue { m, n, pvalue })
        })
        .collect()
}

/// Sizes in order, each stopped once it provably cannot lower the corrected
/// value found so far. `best` tracks `min(factor * (c + 1), B + 1)` over
/// completed sizes, i.e. the corrected value in units of `1 / (B + 1)`.
/// Once a size sits at the floor, later sizes are skipped outright.
fn pruned_sweep(
    x: &DataMatrix,
    sizes: &[(usize, usize)],
    cfg: &MCConfig,
    factor: u64,
) -> Result<Vec<SizePValue>> {
    let mut best = cfg.replicates as u64 + 1;
    let mut out = Vec::with_capacity(sizes.len());
    for &(m, n) in sizes {
        let stop_at = prune_threshold(best, factor);
        let pvalue = mc_pvalue_capped(x, m, n, &size_config(cfg, m, n), Some(stop_at))?;
        if !pvalue.truncated() {
            best = best.min(factor.saturating_mul(pvalue.exceedances + 1));
        }
        out.push(SizePValue { m, n, pvalue });
    }
    Ok(out)
}

/// One permutation per replicate, scanned at every still-active size.
fn shared_sweep(
    x: &DataMatrix,
    sizes: &[(usize, usize)],
    cfg: &MCConfig,
    stop_at: Option<u64>,
) -> Result<Vec<SizePValue>> {
    let observed: Vec<f64> = sizes
        .par_iter()
        .map(|&(m, n)| {
            let s = size_seed(cfg.seed, m, n);
            Ok(cfg.engine.scan(x, m, n, observed_scan_seed(s))?.value)
        })
        .collect::<Result<_>>()?;

    let total = cfg.replicates;
    let mut exceed = vec![0u64; sizes.len()];
    let mut evaluated = vec![total as u64; sizes.len()];
    let mut active: Vec<usize> = (0..sizes.len()).collect();
    let chunk = match (stop_at, rayon::current_num_threads()) {
        (None, _) => total,
        (Some(_), 1) => 1,
        (Some(_), t) => 4 * t,
    };

    let mut start = 0;
    while start < total && !active.is_empty() {
        let end = (start + chunk).min(total);
        let hits: Vec<Vec<bool>> = (start..end)
            .into_par_iter()
            .map_init(
                || x.clone(),
                |buf, b| -> Result<Vec<bool>> {
                    replicate_into(x, cfg.kind, cfg.seed, b, buf);
                    active
                        .iter()
                        .map(|&s| {
                            let (m, n) = sizes[s];
                            let seed = replicate_scan_seed(size_seed(cfg.seed, m, n), b);
                            Ok(cfg.engine.scan(buf, m, n, seed)?.value >= observed[s])
                        })
                        .collect()
                },
            )
            .collect::<Result<_>>()?;
        let mut stopped = vec![false; active.len()];
        for (offset, row) in hits.iter().enumerate() {
            for (slot, (&s, &hit)) in active.iter().zip(row).enumerate() {
                if stopped[slot] {
                    continue;
                }
                exceed[s] += u64::from(hit);
                if stop_at.is_some_and(|t| exceed[s] >= t) {
                    stopped[slot] = true;
                    evaluated[s] = (start + offset + 1) as u64;
                }
            }
        }
        active = active
            .into_iter()
            .zip(stopped)
            .filter_map(|(s, done)| (!done).then_some(s))
            .collect();
        start = end;
    }

    Ok(sizes
        .iter()
        .enumerate()
        .map(|(s, &(m, n))| SizePValue {
            m,
            n,
            pvalue: PValue::monte_carlo(exceed[s], total as u64, evaluated[s]),
        })
        .collect())
}

fn outcome(
    per_size: Vec<SizePValue>,
    correction: Correction,
    factor: u64,
    cfg: &MCConfig,
    alpha: f64,
    options: SweepOptions,
) -> TestOutcome {
    let corrected = bonferroni_combine(&per_size, factor);
    TestOutcome {
        corrected_pvalue: corrected,
        per_size,
        correction,
        correction_factor: factor,
        alpha,
        reject: corrected <= alpha,
        config: *cfg,
        options,
    }
}

/// Permutation scan test at a single known size.
pub fn single_size_test(
    x: &DataMatrix,
    m: usize,
    n: usize,
    cfg: &MCConfig,
    alpha: f64,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    let opts = SweepOptions::default();
    let per_size = sweep(x, &[(m, n)], cfg, 1, opts)?;
    Ok(outcome(per_size, Correction::Single, 1, cfg, alpha, opts))
}

/// Bonferroni test over a caller-supplied size list with factor `M * N`.
pub fn bonferroni_full(
    x: &DataMatrix,
    sizes: &[(usize, usize)],
    cfg: &MCConfig,
    alpha: f64,
) -> Result<TestOutcome> {
    bonferroni_full_with(x, sizes, cfg, alpha, SweepOptions::default())
}

pub fn bonferroni_full_with(
    x: &DataMatrix,
    sizes: &[(usize, usize)],
    cfg: &MCConfig,
    alpha: f64,
    opts: SweepOptions,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    if sizes.is_empty() {
        return Err(Error::invalid("size list must not be empty"));
    }
    let factor = (x.rows() * x.cols()) as u64;
    let per_size = sweep(x, sizes, cfg, factor, opts)?;
    Ok(outcome(per_size, Correction::FullGrid, factor, cfg, alpha, opts))
}

/// Every pair in `S_k_rows(M) x S_k_cols(N)`, rows major.
pub fn net_sizes(rows: usize, cols: usize, k_rows: u32, k_cols: u32) -> Result<Vec<(usize, usize)>> {
    let r = build_net(rows as u64, k_rows)?;
    let c = build_net(cols as u64, k_cols)?;
    Ok(r.elements()
        .iter()
        .flat_map(|&m| c.elements().iter().map(move |&n| (m as usize, n as usize)))
        .collect())
}

/// Bonferroni test over the approximation net with factor `|S_kM(M)| |S_kN(N)|`.
pub fn bonferroni_net(
    x: &DataMatrix,
    k_rows: u32,
    k_cols: u32,
    cfg: &MCConfig,
    alpha: f64,
) -> Result<TestOutcome> {
    bonferroni_net_with(x, k_rows, k_cols, cfg, alpha, SweepOptions::default())
}

pub fn bonferroni_net_with(
    x: &DataMatrix,
    k_rows: u32,
    k_cols: u32,
    cfg: &MCConfig,
    alpha: f64,
    opts: SweepOptions,
) -> Result<TestOutcome> {
    check_alpha(alpha)?;
    let rows_len = build_net(x.rows() as u64, k_rows)?.len();
    let cols_len = build_net(x.cols() as u64, k_cols)?.len();
    let sizes = net_sizes(x.rows(), x.cols(), k_rows, k_cols)?;
    let factor = (rows_len * cols_len) as u64;
    let per_size = sweep(x, &sizes, cfg, factor, opts)?;
    let correction = Correction::Net {
        k_rows,
        k_cols,
        rows_len,
        cols_len,
    };
    Ok(outcome(per_size, correction, factor, cfg, alpha, opts))
}

/// Upper bound on the net-corrected p-value from a single size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpperBound {
    /// `min(|S_kM(M)| |S_kN(N)| p_(m',n'), 1)`.
    pub value: f64,
    pub m: usize,
    pub n: usize,
    pub pvalue: PValue,
    pub correction_factor: u64,
}

/// Calibrates only `(m', n')`, the smallest net elements strictly above `m`
/// and `n`, and scales by the net size. Because a size's calibration stream
/// depends only on the base seed and the size, the per-size p-value equals
/// the one [`bonferroni_net`] computes for that pair on the same data.
pub fn upper_bound_single_pair(
    x: &DataMatrix,
    m: usize,
    n: usize,
    k_rows: u32,
    k_cols: u32,
    cfg: &MCConfig,
) -> Result<UpperBound> {
    upper_bound_single_pair_with(x, m, n, k_rows, k_cols, cfg, SweepOptions::default())
}

pub fn upper_bound_single_pair_with(
    x: &DataMatrix,
    m: usize,
    n: usize,
    k_rows: u32,
    k_cols: u32,
    cfg: &MCConfig,
    opts: SweepOptions,
) -> Result<UpperBound> {
    x.check_size(m, n)?;
    let row_net = build_net(x.rows() as u64, k_rows)?;
    let col_net = build_net(x.cols() as u64, k_cols)?;
    let above = |net: &crate::net::ApproxNet, v: usize| {
        neighbor(net, v as u64, NeighborMode::Above)
            .map(|e| e as usize)
            .ok_or(Error::MissingNeighbor {
                value: v,
                largest: net.elements().last().copied().unwrap_or(0) as usize,
            })
    };
    let (mp, np) = (above(&row_net, m)?, above(&col_net, n)?);
    let factor = (row_net.len() * col_net.len()) as u64;
    let per = sweep(
        x,
        &[(mp, np)],
        cfg,
        factor,
        SweepOptions {
            shared_permutations: false,
            ..opts
        },
    )?;
    Ok(UpperBound {
        value: bonferroni_combine(&per, factor),
        m: mp,
        n: np,
        pvalue: per[0].pvalue,
        correction_factor: factor,
    })
}
