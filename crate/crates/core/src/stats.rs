//! Data matrices, submatrix supports and the scan statistic.
//!
//! Indices are zero-based throughout. The scan statistic of size `(m, n)` is
//! the largest sum over any `m` rows and `n` columns of the matrix; it is
//! computed either exhaustively ([`scan_exact`]) or by alternating top-k
//! hill climbing with random restarts ([`scan_las`]).

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, TAG_SCAN};

/// Default number of candidate evaluations `C(M, m) * N` allowed for [`scan_exact`].
pub const DEFAULT_EXACT_BUDGET: u64 = 10_000_000;
pub const DEFAULT_RESTARTS: usize = 20;
pub const DEFAULT_MAX_ITERS: usize = 100;

/// Dense row-major matrix of finite reals with at least one row and column.
#[derive(Clone, Debug, PartialEq)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DataMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix must have at least one row and column, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{} values supplied for a {rows}x{cols} matrix",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self { rows, cols, values })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if let Some(bad) = rows.iter().position(|r| r.as_ref().len() != cols) {
            return Err(Error::invalid(format!(
                "row {bad} has {} entries, expected {cols}",
                rows[bad].as_ref().len()
            )));
        }
        let values = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(rows.len(), cols, values)
    }

    /// Matrix of the given shape with every entry equal to `value`.
    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    /// The 3x4 matrix holding 1..=12 in row-major order.
    pub fn demo() -> Self {
        Self {
            rows: 3,
            cols: 4,
            values: (1..=12).map(f64::from).collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.values.chunks(self.cols).map(<[f64]>::to_vec).collect()
    }

    /// Adds `delta` to every entry inside `support`.
    pub fn shift_block(&mut self, support: &SubmatrixSupport, delta: f64) -> Result<()> {
        support.check_bounds(self)?;
        for &i in support.rows() {
            for &j in support.cols() {
                self.values[i * self.cols + j] += delta;
            }
        }
        Ok(())
    }

    /// Reads headerless comma-separated rows; lines starting with `#` are
    /// skipped. Errors carry the 1-based line number.
    pub fn read_csv<R: std::io::Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let row = record
                .iter()
                .map(|field| match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::CsvParse {
                        line,
                        message: format!("expected a finite number, got {field:?}"),
                    }),
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = rows.first() {
                if first.len() != row.len() {
                    return Err(Error::CsvParse {
                        line,
                        message: format!("{} fields, expected {}", row.len(), first.len()),
                    });
                }
            }
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    /// Writes one comma-separated line per row, shortest round-trip formatting.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        for row in self.values.chunks(self.cols) {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io("<matrix output>", e))
    }

    pub(crate) fn check_size(&self, m: usize, n: usize) -> Result<()> {
        if m == 0 || n == 0 || m > self.rows || n > self.cols {
            return Err(Error::Dimension {
                m,
                n,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }
}

/// A candidate submatrix: sorted, duplicate-free row and column index sets.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubmatrixSupport {
    rows: Vec<usize>,
    cols: Vec<usize>,
}

impl SubmatrixSupport {
    /// Sorts both index sets; rejects empty sets and duplicates.
    pub fn new(mut rows: Vec<usize>, mut cols: Vec<usize>) -> Result<Self> {
        if rows.is_empty() || cols.is_empty() {
            return Err(Error::invalid("support needs at least one row and one column"));
        }
        rows.sort_unstable();
        cols.sort_unstable();
        if rows.windows(2).any(|w| w[0] == w[1]) || cols.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("support index sets must be duplicate-free"));
        }
        Ok(Self { rows, cols })
    }

    /// The top-left block `[0, m) x [0, n)`.
    pub fn leading(m: usize, n: usize) -> Result<Self> {
        Self::new((0..m).collect(), (0..n).collect())
    }

    /// Every row and column of `x`.
    pub fn full(x: &DataMatrix) -> Self {
        Self {
            rows: (0..x.rows()).collect(),
            cols: (0..x.cols()).collect(),
        }
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn cols(&self) -> &[usize] {
        &self.cols
    }

    pub fn size(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    fn check_bounds(&self, x: &DataMatrix) -> Result<()> {
        if let Some(&i) = self.rows.last().filter(|&&i| i >= x.rows()) {
            return Err(Error::Bounds(format!("row {i} in a matrix with {} rows", x.rows())));
        }
        if let Some(&j) = self.cols.last().filter(|&&j| j >= x.cols()) {
            return Err(Error::Bounds(format!(
                "column {j} in a matrix with {} columns",
                x.cols()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    /// Sum of the entries of `support`.
    pub value: f64,
    pub support: SubmatrixSupport,
    /// `true` for the exhaustive oracle, `false` for the heuristic.
    pub exact: bool,
    pub restarts_used: usize,
    /// Alternation rounds summed over all restarts.
    pub iterations: usize,
}

/// Which algorithm computes the scan statistic.
///
/// Observed and permuted data must go through the same engine for a
/// permutation test to be valid, so the engine travels with the test
/// configuration rather than being chosen per call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "snake_case")]
pub enum ScanEngine {
    Exact { budget: u64 },
    Las { restarts: usize, max_iters: usize },
}

impl Default for ScanEngine {
    fn default() -> Self {
        ScanEngine::Las {
            restarts: DEFAULT_RESTARTS,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

impl ScanEngine {
    pub fn exact() -> Self {
        ScanEngine::Exact {
            budget: DEFAULT_EXACT_BUDGET,
        }
    }

    pub fn las(restarts: usize, max_iters: usize) -> Self {
        ScanEngine::Las {
            restarts,
            max_iters,
        }
    }

    /// `seed` only matters for the heuristic engine.
    pub fn scan(&self, x: &DataMatrix, m: usize, n: usize, seed: u64) -> Result<ScanResult> {
        match *self {
            ScanEngine::Exact { budget } => scan_exact_with_budget(x, m, n, budget),
            ScanEngine::Las {
                restarts,
                max_iters,
            } => scan_las(x, m, n, restarts, max_iters, seed),
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            ScanEngine::Las { restarts: 0, .. } => Err(Error::invalid("LAS restarts must be >= 1")),
            ScanEngine::Las { max_iters: 0, .. } => {
                Err(Error::invalid("LAS max_iters must be >= 1"))
            }
            _ => Ok(()),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            ScanEngine::Exact { budget } => format!("exact(budget={budget})"),
            ScanEngine::Las {
                restarts,
                max_iters,
            } => format!("las(restarts={restarts},max_iters={max_iters})"),
        }
    }
}

/// Sum of all entries.
pub fn sum_stat(x: &DataMatrix) -> f64 {
    x.values().iter().sum()
}

/// Sum of the entries indexed by `support.rows() x support.cols()`.
pub fn submatrix_sum(x: &DataMatrix, support: &SubmatrixSupport) -> Result<f64> {
    support.check_bounds(x)?;
    Ok(block_sum(x, &support.rows, &support.cols))
}

#[inline]
fn block_sum(x: &DataMatrix, rows: &[usize], cols: &[usize]) -> f64 {
    rows.iter()
        .map(|&i| {
            let r = x.row(i);
            cols.iter().map(|&j| r[j]).sum::<f64>()
        })
        .sum()
}

/// Fills `out` with the `k` indices of largest score, ties to the smaller
/// index, returned in ascending index order.
fn top_k(scores: &[f64], k: usize, out: &mut Vec<usize>) {
    out.clear();
    out.extend(0..scores.len());
    if k < scores.len() {
        out.select_nth_unstable_by(k - 1, |&a, &b| {
            scores[b].total_cmp(&scores[a]).then(a.cmp(&b))
        });
        out.truncate(k);
    }
    out.sort_unstable();
}

/// `C(n, k)`, or `None` on u128 overflow.
pub(crate) fn binomial(n: usize, k: usize) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i + 1) as u128;
    }
    Some(acc)
}

/// Exhaustive scan with the default candidate budget.
pub fn scan_exact(x: &DataMatrix, m: usize, n: usize) -> Result<ScanResult> {
    scan_exact_with_budget(x, m, n, DEFAULT_EXACT_BUDGET)
}

/// Exact `(m, n)` scan statistic.
///
/// Row subsets are enumerated in lexicographic order; for each one the best
/// `n` columns are simply the top restricted column sums. Ties resolve to the
/// lexicographically smallest `(rows, cols)`. Refuses when `C(M, m) * N`
/// exceeds `budget`.
pub fn scan_exact_with_budget(
    x: &DataMatrix,
    m: usize,
    n: usize,
    budget: u64,
) -> Result<ScanResult> {
    x.check_size(m, n)?;
    let (rows, cols) = x.shape();
    let required = binomial(rows, m).map_or(u128::MAX, |c| c.saturating_mul(cols as u128));
    if required > budget as u128 {
        return Err(Error::ScanBudget { required, budget });
    }

    let mut combo: Vec<usize> = (0..m).collect();
    let mut col_sums = vec![0.0; cols];
    let mut picked = Vec::with_capacity(cols);
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    loop {
        col_sums.fill(0.0);
        for &i in &combo {
            for (s, v) in col_sums.iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        top_k(&col_sums, n, &mut picked);
        let value: f64 = picked.iter().map(|&j| col_sums[j]).sum();
        if best.as_ref().is_none_or(|(b, _, _)| value > *b) {
            best = Some((value, combo.clone(), picked.clone()));
        }
        if !next_combination(&mut combo, rows) {
            break;
        }
    }

    let (_, best_rows, best_cols) = best.expect("at least one row subset");
    let value = block_sum(x, &best_rows, &best_cols);
    Ok(ScanResult {
        value,
        support: SubmatrixSupport {
            rows: best_rows,
            cols: best_cols,
        },
        exact: true,
        restarts_used: 0,
        iterations: 0,
    })
}

/// Advances `combo` to the next k-subset of `0..n` in lexicographic order.
fn next_combination(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for t in i + 1..k {
                combo[t] = combo[t - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Scratch space for repeated hill climbs on matrices of one shape.
struct Climber {
    row_sums: Vec<f64>,
    col_sums: Vec<f64>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    next: Vec<usize>,
}

impl Climber {
    fn new(x: &DataMatrix) -> Self {
        Self {
            row_sums: vec![0.0; x.rows()],
            col_sums: vec![0.0; x.cols()],
            rows: Vec::with_capacity(x.rows()),
            cols: Vec::with_capacity(x.cols()),
            next: Vec::with_capacity(x.rows().max(x.cols())),
        }
    }

    /// Alternating maximisation from the column set already in `self.cols`.
    /// Returns the number of alternation rounds. When `trace` is given, the
    /// support value after every half step is pushed to it.
    fn climb(
        &mut self,
        x: &DataMatrix,
        m: usize,
        n: usize,
        max_iters: usize,
        mut trace: Option<&mut Vec<f64>>,
    ) -> usize {
        let (big_m, big_n) = x.shape();
        self.rows.clear();
        if m == big_m {
            self.rows.extend(0..big_m);
        }
        let mut iters = 0;
        while iters < max_iters {
            iters += 1;
            let mut changed = false;

            if m < big_m {
                for (i, s) in self.row_sums.iter_mut().enumerate() {
                    let r = x.row(i);
                    *s = self.cols.iter().map(|&j| r[j]).sum();
                }
                top_k(&self.row_sums, m, &mut self.next);
                if self.next != self.rows {
                    std::mem::swap(&mut self.next, &mut self.rows);
                    changed = true;
                }
                if let Some(t) = trace.as_deref_mut() {
                    t.push(block_sum(x, &self.rows, &self.cols));
                }
            }

            if n < big_n {
                self.col_sums.fill(0.0);
                for &i in &self.rows {
                    for (s, v) in self.col_sums.iter_mut().zip(x.row(i)) {
                        *s += v;
                    }
                }
                top_k(&self.col_sums, n, &mut self.next);
                if self.next != self.cols {
                    std::mem::swap(&mut self.next, &mut self.cols);
                    changed = true;
                }
                if let Some(t) = trace.as_deref_mut() {
                    t.push(block_sum(x, &self.rows, &self.cols));
                }
            }

            if !changed {
                break;
            }
        }
        iters
    }
}

/// Heuristic `(m, n)` scan: alternating top-k maximisation from `restarts`
/// random column subsets, keeping the best restart (lowest index on ties).
///
/// Each restart `r` draws its initial columns from the stream `(seed, r)`,
/// so the result does not depend on the order restarts are evaluated in.
pub fn scan_las(
    x: &DataMatrix,
    m: usize,
    n: usize,
    restarts: usize,
    max_iters: usize,
    seed: u64,
) -> Result<ScanResult> {
    x.check_size(m, n)?;
    if restarts == 0 || max_iters == 0 {
        return Err(Error::invalid("restarts and max_iters must both be >= 1"));
    }
    let big_n = x.cols();
    let mut climber = Climber::new(x);
    let mut best: Option<(f64, Vec<usize>, Vec<usize>)> = None;
    let mut total_iters = 0;
    for r in 0..restarts {
        init_cols(&mut climber.cols, big_n, n, seed, r);
        total_iters += climber.climb(x, m, n, max_iters, None);
        let value = block_sum(x, &climber.rows, &climber.cols);
        if best.as_ref().is_none_or(|(b, _, _)| value > *b) {
            best = Some((value, climber.rows.clone(), climber.cols.clone()));
        }
    }
    let (value, rows, cols) = best.expect("restarts >= 1");
    Ok(ScanResult {
        value,
        support: SubmatrixSupport { rows, cols },
        exact: false,
        restarts_used: restarts,
        iterations: total_iters,
    })
}

fn init_cols(cols: &mut Vec<usize>, big_n: usize, n: usize, seed: u64, restart: usize) {
    cols.clear();
    if n == big_n {
        cols.extend(0..big_n);
    } else {
        let mut rng = rng::stream(seed, &[TAG_SCAN, restart as u64]);
        cols.extend(index::sample(&mut rng, big_n, n).iter());
        cols.sort_unstable();
    }
}

/// Support values after every half step of one hill climb started from
/// `initial_cols`. Exposed for monotonicity checks.
pub fn las_trajectory(
    x: &DataMatrix,
    m: usize,
    n: usize,
    initial_cols: &[usize],
    max_iters: usize,
) -> Result<Vec<f64>> {
    x.check_size(m, n)?;
    let init = SubmatrixSupport::new(vec![0], initial_cols.to_vec())?;
    if init.cols.len() != n {
        return Err(Error::invalid(format!(
            "expected {n} initial columns, got {}",
            init.cols.len()
        )));
    }
    init.check_bounds(x)?;
    let mut climber = Climber::new(x);
    climber.cols = init.cols;
    let mut trace = Vec::new();
    climber.climb(x, m, n, max_iters, Some(&mut trace));
    Ok(trace)
}
