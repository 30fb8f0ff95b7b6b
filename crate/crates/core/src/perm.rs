//! Permutation collections and permutation p-values of the scan statistic.
//!
//! Two collections are supported: shuffling entries within each row
//! ([`PermutationKind::Unidimensional`]) and shuffling all entries jointly
//! ([`PermutationKind::Bidimensional`]). Monte Carlo p-values use the add-one
//! estimator `(exceedances + 1) / (B + 1)` with ties counted as exceedances.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, StreamRng, TAG_OBSERVED, TAG_PERMUTE, TAG_REPLICATE, TAG_SCAN};
use crate::stats::{scan_exact, DataMatrix, ScanEngine};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermutationKind {
    /// Entries shuffled independently within each row.
    #[serde(alias = "uni")]
    Unidimensional,
    /// All entries shuffled jointly.
    #[serde(alias = "bi")]
    Bidimensional,
}

impl PermutationKind {
    pub fn name(self) -> &'static str {
        match self {
            PermutationKind::Unidimensional => "unidimensional",
            PermutationKind::Bidimensional => "bidimensional",
        }
    }
}

impl fmt::Display for PermutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PermutationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unidimensional" | "uni" | "row" => Ok(PermutationKind::Unidimensional),
            "bidimensional" | "bi" | "all" => Ok(PermutationKind::Bidimensional),
            other => Err(Error::invalid(format!("unknown permutation kind {other:?}"))),
        }
    }
}

/// Monte Carlo calibration settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    /// Number of permutation replicates `B`.
    pub replicates: usize,
    pub kind: PermutationKind,
    pub seed: u64,
    pub engine: ScanEngine,
}

impl MCConfig {
    pub fn new(replicates: usize, kind: PermutationKind, seed: u64, engine: ScanEngine) -> Self {
        Self {
            replicates,
            kind,
            seed,
            engine,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::invalid("number of replicates B must be >= 1"));
        }
        self.engine.validate()
    }

    /// Smallest attainable Monte Carlo p-value, `1 / (B + 1)`.
    pub fn floor(&self) -> f64 {
        1.0 / (self.replicates as f64 + 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PValue {
    pub value: f64,
    pub exceedances: u64,
    /// `B` for Monte Carlo results, `|Pi|` for exact enumeration.
    pub replicates: u64,
    /// Replicates actually evaluated. Smaller than `replicates` only when the
    /// computation was cut short, in which case `value` is a lower bound.
    pub evaluated: u64,
}

impl PValue {
    pub(crate) fn monte_carlo(exceedances: u64, replicates: u64, evaluated: u64) -> Self {
        Self {
            value: (exceedances as f64 + 1.0) / (replicates as f64 + 1.0),
            exceedances,
            replicates,
            evaluated,
        }
    }

    pub fn truncated(&self) -> bool {
        self.evaluated < self.replicates
    }
}

/// Uniformly random member of the chosen permutation collection applied to `x`.
pub fn permute(x: &DataMatrix, kind: PermutationKind, seed: u64) -> DataMatrix {
    let mut out = x.clone();
    shuffle_in_place(&mut out, kind, &mut rng::stream(seed, &[]));
    out
}

/// Fisher-Yates over the whole matrix or over each row.
fn shuffle_in_place(x: &mut DataMatrix, kind: PermutationKind, rng: &mut StreamRng) {
    let cols = x.cols();
    match kind {
        PermutationKind::Bidimensional => x.values_mut().shuffle(rng),
        PermutationKind::Unidimensional => {
            for row in x.values_mut().chunks_mut(cols) {
                row.shuffle(rng);
            }
        }
    }
}

/// Writes replicate `b` of the stream rooted at `seed` into `buf`.
pub(crate) fn replicate_into(
    x: &DataMatrix,
    kind: PermutationKind,
    seed: u64,
    b: usize,
    buf: &mut DataMatrix,
) {
    buf.values_mut().copy_from_slice(x.values());
    let mut r = rng::stream(seed, &[TAG_REPLICATE, b as u64, TAG_PERMUTE]);
    shuffle_in_place(buf, kind, &mut r);
}

pub(crate) fn replicate_scan_seed(seed: u64, b: usize) -> u64 {
    rng::derive(seed, &[TAG_REPLICATE, b as u64, TAG_SCAN])
}

pub(crate) fn observed_scan_seed(seed: u64) -> u64 {
    rng::derive(seed, &[TAG_OBSERVED])
}

/// Monte Carlo permutation p-value of the `(m, n)` scan statistic.
///
/// Observed and permuted data are scanned by `cfg.engine`. Replicate `b`
/// uses its own stream derived from `(cfg.seed, b)`, so the result is
/// independent of the number of worker threads.
pub fn mc_pvalue(x: &DataMatrix, m: usize, n: usize, cfg: &MCConfig) -> Result<PValue> {
    mc_pvalue_capped(x, m, n, cfg, None)
}

/// As [`mc_pvalue`], but stops as soon as `stop_at` exceedances have been
/// seen (`Some(0)` skips calibration entirely). The returned value is then a
/// lower bound on the full-`B` p-value.
/// Replicates are consumed in index order, so where the computation stops
/// is deterministic.
pub fn mc_pvalue_capped(
    x: &DataMatrix,
    m: usize,
    n: usize,
    cfg: &MCConfig,
    stop_at: Option<u64>,
) -> Result<PValue> {
    cfg.validate()?;
    x.check_size(m, n)?;
    let total = cfg.replicates;
    if stop_at == Some(0) {
        return Ok(PValue::monte_carlo(0, total as u64, 0));
    }
    let observed = cfg.engine.scan(x, m, n, observed_scan_seed(cfg.seed))?.value;

    // Without a cap everything goes in one parallel batch.
    let chunk = if stop_at.is_some() {
        match rayon::current_num_threads() {
            1 => 1,
            t => 4 * t,
        }
    } else {
        total
    };

    let mut exceed = 0u64;
    let mut start = 0;
    while start < total {
        let end = (start + chunk).min(total);
        let hits: Vec<bool> = (start..end)
            .into_par_iter()
            .map_init(
                || x.clone(),
                |buf, b| -> Result<bool> {
                    replicate_into(x, cfg.kind, cfg.seed, b, buf);
                    let v = cfg.engine.scan(buf, m, n, replicate_scan_seed(cfg.seed, b))?;
                    Ok(v.value >= observed)
                },
            )
            .collect::<Result<_>>()?;
        for (offset, hit) in hits.into_iter().enumerate() {
            exceed += u64::from(hit);
            if stop_at.is_some_and(|s| exceed >= s) {
                let evaluated = (start + offset + 1) as u64;
                return Ok(PValue::monte_carlo(exceed, total as u64, evaluated));
            }
        }
        start = end;
    }
    Ok(PValue::monte_carlo(exceed, total as u64, total as u64))
}

const BIDIMENSIONAL_MAX_ENTRIES: usize = 8;
const UNIDIMENSIONAL_MAX_PERMUTATIONS: u128 = 1_000_000;

fn factorial(k: usize) -> u128 {
    (1..=k as u128).product()
}

/// Exact permutation p-value by enumerating the whole collection, scanning
/// each permuted matrix exhaustively. Only for tiny matrices: at most 8
/// entries for the bidimensional collection, at most 10^6 row-wise
/// rearrangements for the unidimensional one.
///
/// The value is the plain ratio `#{pi : scan(X_pi) >= scan(X)} / |Pi|`.
pub fn exact_pvalue_enum(
    x: &DataMatrix,
    m: usize,
    n: usize,
    kind: PermutationKind,
) -> Result<PValue> {
    x.check_size(m, n)?;
    let (rows, cols) = x.shape();
    let entries = rows * cols;
    let observed = scan_exact(x, m, n)?.value;

    let mut buf = x.clone();
    let mut count = 0u64;
    let mut total = 0u64;
    let mut visit = |buf: &DataMatrix| -> Result<()> {
        total += 1;
        if scan_exact(buf, m, n)?.value >= observed {
            count += 1;
        }
        Ok(())
    };

    match kind {
        PermutationKind::Bidimensional => {
            if entries > BIDIMENSIONAL_MAX_ENTRIES {
                return Err(Error::EnumerationBudget {
                    required: factorial(entries.min(34)),
                    limit: factorial(BIDIMENSIONAL_MAX_ENTRIES),
                });
            }
            for perm in (0..entries).permutations(entries) {
                for (dst, &src) in buf.values_mut().iter_mut().zip(&perm) {
                    *dst = x.values()[src];
                }
                visit(&buf)?;
            }
        }
        PermutationKind::Unidimensional => {
            let per_row = factorial(cols.min(34));
            let required = (0..rows).try_fold(1u128, |acc, _| acc.checked_mul(per_row));
            if required.is_none_or(|r| r > UNIDIMENSIONAL_MAX_PERMUTATIONS) {
                return Err(Error::EnumerationBudget {
                    required: required.unwrap_or(u128::MAX),
                    limit: UNIDIMENSIONAL_MAX_PERMUTATIONS,
                });
            }
            let row_perms: Vec<Vec<usize>> = (0..cols).permutations(cols).collect();
            for choice in (0..rows).map(|_| 0..row_perms.len()).multi_cartesian_product() {
                for (i, &p) in choice.iter().enumerate() {
                    let src = x.row(i);
                    let dst = &mut buf.values_mut()[i * cols..(i + 1) * cols];
                    for (d, &s) in dst.iter_mut().zip(&row_perms[p]) {
                        *d = src[s];
                    }
                }
                visit(&buf)?;
            }
        }
    }

    Ok(PValue {
        value: count as f64 / total as f64,
        exceedances: count,
        replicates: total,
        evaluated: total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_instance, NoiseFamily};
    use crate::stats::{sum_stat, SubmatrixSupport};

    fn sorted(v: &[f64]) -> Vec<f64> {
        let mut v = v.to_vec();
        v.sort_by(f64::total_cmp);
        v
    }

    fn small() -> DataMatrix {
        DataMatrix::from_rows(&[[3.0, 1.0], [2.0, 0.0]]).unwrap()
    }

    #[test]
    fn unidimensional_keeps_rows() {
        let x = DataMatrix::demo();
        for seed in 0..20 {
            let p = permute(&x, PermutationKind::Unidimensional, seed);
            for i in 0..3 {
                assert_eq!(sorted(p.row(i)), sorted(x.row(i)));
            }
            assert_eq!(sum_stat(&p), 78.0);
        }
    }

    #[test]
    fn bidimensional_keeps_multiset_and_mixes_rows() {
        let x = DataMatrix::demo();
        let mut mixed = false;
        for seed in 0..20 {
            let p = permute(&x, PermutationKind::Bidimensional, seed);
            assert_eq!(sorted(p.values()), sorted(x.values()));
            assert_eq!(sum_stat(&p), 78.0);
            mixed |= sorted(p.row(0)) != vec![1.0, 2.0, 3.0, 4.0];
        }
        assert!(mixed);
    }

    #[test]
    fn single_row_kinds_coincide() {
        let x = DataMatrix::from_rows(&[[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]]).unwrap();
        for seed in 0..10 {
            assert_eq!(
                permute(&x, PermutationKind::Unidimensional, seed),
                permute(&x, PermutationKind::Bidimensional, seed)
            );
        }
    }

    #[test]
    fn bidimensional_is_uniform_on_small_matrix() {
        // All 24 arrangements of four distinct values should appear about equally often.
        let x = DataMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let mut counts = std::collections::HashMap::new();
        let draws = 24_000;
        for seed in 0..draws {
            let p = permute(&x, PermutationKind::Bidimensional, seed);
            *counts.entry(p.values().iter().map(|v| *v as u8).collect::<Vec<_>>()).or_insert(0u32) += 1;
        }
        assert_eq!(counts.len(), 24);
        let chi2: f64 = counts.values().map(|&c| (c as f64 - 1000.0).powi(2) / 1000.0).sum();
        // 23 degrees of freedom; 0.999 quantile is about 49.7
        assert!(chi2 < 49.7, "chi2 {chi2}");
    }

    #[test]
    fn exact_enumeration_small_cases() {
        let x = small();
        let bi = exact_pvalue_enum(&x, 1, 2, PermutationKind::Bidimensional).unwrap();
        assert_eq!(bi.exceedances, 16);
        assert_eq!(bi.replicates, 24);
        assert!((bi.value - 2.0 / 3.0).abs() < 1e-15);
        let uni = exact_pvalue_enum(&x, 1, 2, PermutationKind::Unidimensional).unwrap();
        assert_eq!(uni.value, 1.0);
        assert_eq!(uni.replicates, 4);
        let c = DataMatrix::filled(2, 3, 1.5).unwrap();
        for kind in [PermutationKind::Unidimensional, PermutationKind::Bidimensional] {
            assert_eq!(exact_pvalue_enum(&c, 1, 2, kind).unwrap().value, 1.0);
        }
    }

    #[test]
    fn exact_enumeration_refuses_large() {
        let x = DataMatrix::filled(3, 3, 0.0).unwrap();
        assert!(matches!(
            exact_pvalue_enum(&x, 1, 1, PermutationKind::Bidimensional),
            Err(Error::EnumerationBudget { .. })
        ));
        let y = DataMatrix::filled(3, 10, 0.0).unwrap();
        assert!(matches!(
            exact_pvalue_enum(&y, 1, 1, PermutationKind::Unidimensional),
            Err(Error::EnumerationBudget { .. })
        ));
        // 3 rows of 4! = 13824 arrangements is allowed
        let z = DataMatrix::demo();
        let p = exact_pvalue_enum(&z, 1, 1, PermutationKind::Unidimensional).unwrap();
        assert_eq!(p.replicates, 13_824);
    }

    #[test]
    fn mc_floor_and_ties() {
        // Observed holds a huge block, so no replicate can reach it.
        let mut x = DataMatrix::filled(6, 6, 0.0).unwrap();
        x.shift_block(&SubmatrixSupport::leading(2, 2).unwrap(), 100.0).unwrap();
        let cfg = MCConfig::new(500, PermutationKind::Bidimensional, 1, ScanEngine::exact());
        let p = mc_pvalue(&x, 2, 2, &cfg).unwrap();
        // A permutation can recreate the block, but with probability ~ 1e-3 per
        // replicate; accept at most a couple.
        assert!(p.exceedances <= 6, "{p:?}");
        assert_eq!(p.value, (p.exceedances as f64 + 1.0) / 501.0);

        let c = DataMatrix::filled(5, 5, 2.0).unwrap();
        let p = mc_pvalue(&c, 2, 2, &cfg).unwrap();
        assert_eq!(p.exceedances, 500);
        assert_eq!(p.value, 1.0);
        assert!((PValue::monte_carlo(0, 500, 500).value - 1.0 / 501.0).abs() < 1e-15);
    }

    #[test]
    fn mc_is_reproducible_and_capped_prefix_matches() {
        let x = generate_instance(12, 10, 3, 3, 0.5, NoiseFamily::Gaussian, 5).unwrap().data;
        let cfg = MCConfig::new(120, PermutationKind::Unidimensional, 9, ScanEngine::las(3, 50));
        let a = mc_pvalue(&x, 3, 3, &cfg).unwrap();
        let b = mc_pvalue(&x, 3, 3, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.evaluated, 120);
        let capped = mc_pvalue_capped(&x, 3, 3, &cfg, Some(5)).unwrap();
        if a.exceedances >= 5 {
            assert_eq!(capped.exceedances, 5);
            assert!(capped.evaluated <= 120);
            assert!(capped.value <= a.value);
        } else {
            assert_eq!(capped, a);
        }
    }

    #[test]
    fn mc_independent_of_thread_count() {
        let x = generate_instance(10, 10, 3, 3, 0.3, NoiseFamily::Gaussian, 2).unwrap().data;
        let cfg = MCConfig::new(200, PermutationKind::Bidimensional, 3, ScanEngine::las(4, 50));
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    (
                        mc_pvalue(&x, 3, 3, &cfg).unwrap(),
                        mc_pvalue_capped(&x, 3, 3, &cfg, Some(7)).unwrap(),
                    )
                })
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }

    #[test]
    fn raising_the_block_does_not_add_exceedances() {
        // Holds whenever the observed optimum is the planted block itself: the
        // observed scan then rises by exactly m*n*delta while no permuted scan
        // can rise by more.
        let inst = generate_instance(10, 10, 3, 3, 2.5, NoiseFamily::Gaussian, 21).unwrap();
        let block = inst.support.clone().unwrap();
        assert_eq!(scan_exact(&inst.data, 3, 3).unwrap().support, block);
        let cfg = MCConfig::new(300, PermutationKind::Bidimensional, 4, ScanEngine::exact());
        let base = mc_pvalue(&inst.data, 3, 3, &cfg).unwrap();
        for delta in [0.1, 0.5, 2.0] {
            let mut y = inst.data.clone();
            y.shift_block(&block, delta).unwrap();
            let raised = mc_pvalue(&y, 3, 3, &cfg).unwrap();
            assert!(raised.exceedances <= base.exceedances, "delta {delta}");
        }
    }

    #[test]
    fn mc_rejects_bad_config() {
        let x = DataMatrix::demo();
        let cfg = MCConfig::new(0, PermutationKind::Bidimensional, 0, ScanEngine::exact());
        assert!(mc_pvalue(&x, 1, 1, &cfg).is_err());
        let cfg = MCConfig::new(10, PermutationKind::Bidimensional, 0, ScanEngine::exact());
        assert!(matches!(mc_pvalue(&x, 4, 1, &cfg), Err(Error::Dimension { .. })));
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("bi".parse::<PermutationKind>().unwrap(), PermutationKind::Bidimensional);
        assert_eq!(
            serde_json::from_str::<PermutationKind>("\"uni\"").unwrap(),
            PermutationKind::Unidimensional
        );
    }
}
