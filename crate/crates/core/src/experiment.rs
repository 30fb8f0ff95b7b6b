//! Simulation harness: planted instances over a grid of signal levels,
//! calibrated by the net-Bonferroni test or its single-pair upper bound,
//! written as self-describing CSV.
//!
//! Signal levels are given as multiples of `theta_crit(M, N, m, n)`. Each
//! cell `(size, kind, multiplier, replicate)` draws its own instance from a
//! seed derived from the base seed and the cell coordinates, so rows do not
//! depend on scheduling, thread count or which other cells are run. The
//! instance is shared by the permutation kinds of a cell.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{bonferroni_net_with, upper_bound_single_pair_with, SweepOptions};
use crate::error::{Error, Result};
use crate::model::{generate_instance, NoiseFamily};
use crate::net::{build_net, default_k};
use crate::perm::{MCConfig, PermutationKind};
use crate::rng;
use crate::stats::ScanEngine;
use crate::theory::theta_crit;

const TAG_INSTANCE: u64 = 0x494e_5354;
const TAG_CALIBRATE: u64 = 0x4341_4c49;

/// Significance level recorded in outcomes. Rows report p-values, so it does
/// not affect the output.
const ALPHA: f64 = 0.05;

/// Which quantity each row reports.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Corrected p-value of the full net sweep.
    #[default]
    #[serde(alias = "net-bonferroni")]
    NetBonferroni,
    /// Net correction applied to the single pair just above the planted size.
    #[serde(alias = "upper-bound")]
    UpperBound,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::NetBonferroni => "net_bonferroni",
            Mode::UpperBound => "upper_bound",
        }
    }
}

/// Net precision: a fixed `k` or `"default"`, i.e. `floor(log2 log2 M)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NetK {
    Fixed(u32),
    #[default]
    #[serde(with = "default_marker")]
    Default,
}

mod default_marker {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("default")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "default" {
            Ok(())
        } else {
            Err(de::Error::custom(format!("expected an integer or \"default\", got {s:?}")))
        }
    }
}

impl NetK {
    pub fn resolve(self, max: usize) -> Result<u32> {
        match self {
            NetK::Fixed(0) => Err(Error::invalid("net k must be >= 1")),
            NetK::Fixed(k) => Ok(k),
            NetK::Default => default_k(max as u64),
        }
    }
}

/// `0.625, 0.75, ..., 1.5`.
pub fn default_multipliers() -> Vec<f64> {
    (0..8).map(|i| 0.625 + 0.125 * i as f64).collect()
}

/// Full description of a simulation run. Every field has a default, so a
/// JSON document only needs the fields it changes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: NoiseFamily,
    pub rows: usize,
    pub cols: usize,
    /// Planted sizes `(m, n)`.
    pub sizes: Vec<(usize, usize)>,
    pub kinds: Vec<PermutationKind>,
    /// Permutation replicates `B` per test.
    pub replicates: usize,
    /// Instances per `(size, kind, multiplier)`.
    pub reps: usize,
    /// Signal levels as multiples of `theta_crit`; positive, strictly increasing.
    pub multipliers: Vec<f64>,
    pub k_rows: NetK,
    pub k_cols: NetK,
    pub seed: u64,
    pub engine: ScanEngine,
    pub mode: Mode,
    pub shared_permutations: bool,
    /// Skip calibration work that cannot change a row's value.
    pub prune: bool,
    /// Worker threads; the machine default when absent. Never affects rows.
    pub threads: Option<usize>,
    /// Leave the wall-clock column empty so output is byte-reproducible.
    pub no_timing: bool,
    /// CSV destination; standard output when absent.
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            family: NoiseFamily::Gaussian,
            rows: 200,
            cols: 100,
            sizes: vec![(10, 15), (30, 10)],
            kinds: vec![PermutationKind::Unidimensional, PermutationKind::Bidimensional],
            replicates: 500,
            reps: 100,
            multipliers: default_multipliers(),
            k_rows: NetK::Default,
            k_cols: NetK::Default,
            seed: 2024,
            engine: ScanEngine::default(),
            mode: Mode::NetBonferroni,
            shared_permutations: false,
            prune: true,
            threads: None,
            no_timing: false,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::invalid("at least one planted size is required"));
        }
        for &(m, n) in &self.sizes {
            // also rejects sizes covering the whole matrix
            theta_crit(self.rows, self.cols, m, n)?;
        }
        if self.kinds.is_empty() {
            return Err(Error::invalid("at least one permutation kind is required"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be >= 1"));
        }
        if self.reps == 0 {
            return Err(Error::invalid("reps must be >= 1"));
        }
        if self.multipliers.is_empty() {
            return Err(Error::invalid("at least one multiplier is required"));
        }
        if let Some(bad) = self.multipliers.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::invalid(format!("multipliers must be finite and > 0, got {bad}")));
        }
        if self.multipliers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("multipliers must be strictly increasing"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be >= 1"));
        }
        self.k_rows.resolve(self.rows)?;
        self.k_cols.resolve(self.cols)?;
        MCConfig::new(self.replicates, PermutationKind::Bidimensional, 0, self.engine).validate()
    }

    /// Number of rows [`run_experiment`] produces.
    pub fn row_count(&self) -> usize {
        self.sizes.len() * self.kinds.len() * self.multipliers.len() * self.reps
    }

    fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            shared_permutations: self.shared_permutations,
            prune: self.prune,
        }
    }
}

/// One tested instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub family: NoiseFamily,
    #[serde(rename = "M")]
    pub rows: usize,
    #[serde(rename = "N")]
    pub cols: usize,
    pub m: usize,
    pub n: usize,
    pub perm_kind: PermutationKind,
    pub mode: Mode,
    pub multiplier: f64,
    pub theta: f64,
    pub replicate: usize,
    #[serde(rename = "B")]
    pub replicates: usize,
    #[serde(rename = "k_M")]
    pub k_rows: u32,
    #[serde(rename = "k_N")]
    pub k_cols: u32,
    pub net_rows: usize,
    pub net_cols: usize,
    /// Corrected p-value, or the upper bound in that mode.
    pub pvalue: f64,
    pub floor: f64,
    pub wall_ms: Option<f64>,
    /// Instance seed; calibration seeds derive from it and the kind.
    pub seed: u64,
}

/// Column order of the CSV schema.
pub const COLUMNS: [&str; 19] = [
    "family",
    "M",
    "N",
    "m",
    "n",
    "perm_kind",
    "mode",
    "multiplier",
    "theta",
    "replicate",
    "B",
    "k_M",
    "k_N",
    "net_rows",
    "net_cols",
    "pvalue",
    "floor",
    "wall_ms",
    "seed",
];

#[derive(Clone, Copy)]
struct Cell {
    size: (usize, usize),
    kind: PermutationKind,
    multiplier: f64,
    replicate: usize,
}

fn instance_seed(base: u64, cell: &Cell) -> u64 {
    let (m, n) = cell.size;
    rng::derive(
        base,
        &[
            TAG_INSTANCE,
            m as u64,
            n as u64,
            cell.multiplier.to_bits(),
            cell.replicate as u64,
        ],
    )
}

fn calibration_seed(instance: u64, kind: PermutationKind) -> u64 {
    let code = match kind {
        PermutationKind::Unidimensional => 1,
        PermutationKind::Bidimensional => 2,
    };
    rng::derive(instance, &[TAG_CALIBRATE, code])
}

struct Nets {
    k_rows: u32,
    k_cols: u32,
    rows_len: usize,
    cols_len: usize,
}

fn run_cell(cfg: &ExperimentConfig, nets: &Nets, cell: Cell) -> Result<ResultRow> {
    let start = Instant::now();
    let (m, n) = cell.size;
    let theta = cell.multiplier * theta_crit(cfg.rows, cfg.cols, m, n)?;
    let seed = instance_seed(cfg.seed, &cell);
    let inst = generate_instance(cfg.rows, cfg.cols, m, n, theta, cfg.family, seed)?;
    let mc = MCConfig::new(
        cfg.replicates,
        cell.kind,
        calibration_seed(seed, cell.kind),
        cfg.engine,
    );
    let pvalue = match cfg.mode {
        Mode::NetBonferroni => {
            bonferroni_net_with(&inst.data, nets.k_rows, nets.k_cols, &mc, ALPHA, cfg.sweep_options())?
                .corrected_pvalue
        }
        Mode::UpperBound => {
            upper_bound_single_pair_with(
                &inst.data,
                m,
                n,
                nets.k_rows,
                nets.k_cols,
                &mc,
                cfg.sweep_options(),
            )?
            .value
        }
    };
    let factor = (nets.rows_len * nets.cols_len) as f64;
    let wall_ms = (!cfg.no_timing).then(|| (start.elapsed().as_secs_f64() * 1e6).round() / 1e3);
    Ok(ResultRow {
        family: cfg.family,
        rows: cfg.rows,
        cols: cfg.cols,
        m,
        n,
        perm_kind: cell.kind,
        mode: cfg.mode,
        multiplier: cell.multiplier,
        theta,
        replicate: cell.replicate,
        replicates: cfg.replicates,
        k_rows: nets.k_rows,
        k_cols: nets.k_cols,
        net_rows: nets.rows_len,
        net_cols: nets.cols_len,
        pvalue,
        floor: (factor / (cfg.replicates as f64 + 1.0)).min(1.0),
        wall_ms,
        seed,
    })
}

/// Runs every cell and returns rows ordered by (size, kind, multiplier,
/// replicate), following the order of the config lists.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let k_rows = cfg.k_rows.resolve(cfg.rows)?;
    let k_cols = cfg.k_cols.resolve(cfg.cols)?;
    let nets = Nets {
        k_rows,
        k_cols,
        rows_len: build_net(cfg.rows as u64, k_rows)?.len(),
        cols_len: build_net(cfg.cols as u64, k_cols)?.len(),
    };
    let mut cells = Vec::with_capacity(cfg.row_count());
    for &size in &cfg.sizes {
        for &kind in &cfg.kinds {
            for &multiplier in &cfg.multipliers {
                for replicate in 0..cfg.reps {
                    cells.push(Cell {
                        size,
                        kind,
                        multiplier,
                        replicate,
                    });
                }
            }
        }
    }
    let work = || {
        cells
            .par_iter()
            .map(|&cell| run_cell(cfg, &nets, cell))
            .collect::<Result<Vec<_>>>()
    };
    match cfg.threads {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

/// Echo of every setting that shapes the rows, one `# key: value` line each.
/// Thread count and output path are left out: they never change the rows.
fn header_lines(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let mut echo = serde_json::to_value(cfg)?;
    let map = echo
        .as_object_mut()
        .expect("config serializes to a JSON object");
    map.remove("threads");
    map.remove("output");
    let mut lines = vec![format!("# subscan {} experiment", env!("CARGO_PKG_VERSION"))];
    lines.extend(map.iter().map(|(k, v)| format!("# {k}: {v}")));
    if let (Ok(kr), Ok(kc)) = (cfg.k_rows.resolve(cfg.rows), cfg.k_cols.resolve(cfg.cols)) {
        lines.push(format!("# effective_k: [{kr},{kc}]"));
    }
    Ok(lines)
}

/// Writes the comment header, the column header and the rows.
pub fn write_csv<W: Write>(cfg: &ExperimentConfig, rows: &[ResultRow], out: W) -> Result<()> {
    let mut out = out;
    for line in header_lines(cfg)? {
        writeln!(out, "{line}").map_err(|e| Error::io("<csv output>", e))?;
    }
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))?;
    Ok(())
}

/// Runs the experiment and writes it to `cfg.output`, or to standard output.
pub fn run_to_csv(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    // fail on an unwritable path before spending the compute
    let sink: Box<dyn Write> = match &cfg.output {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).map_err(|e| Error::io(path, e))?,
        )),
        None => Box::new(io::stdout().lock()),
    };
    let rows = run_experiment(cfg)?;
    write_csv(cfg, &rows, sink)?;
    Ok(rows)
}

/// Parses CSV produced by [`write_csv`]. Comment lines are skipped; errors
/// carry the 1-based line number in the file.
pub fn parse_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let header_line = header.position().map_or(1, |p| p.line());
    if header.iter().ne(COLUMNS) {
        return Err(Error::CsvParse {
            line: header_line,
            message: format!(
                "expected columns {}, found {}",
                COLUMNS.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        let row: ResultRow = record.deserialize(Some(&header)).map_err(|e| Error::CsvParse {
            line,
            message: e.to_string(),
        })?;
        if !(row.pvalue > 0.0 && row.pvalue <= 1.0) {
            return Err(Error::CsvParse {
                line,
                message: format!("pvalue {} outside (0, 1]", row.pvalue),
            });
        }
        if !(row.floor > 0.0 && row.floor <= 1.0) {
            return Err(Error::CsvParse {
                line,
                message: format!("floor {} outside (0, 1]", row.floor),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let path = path.as_ref();
    parse_csv(File::open(path).map_err(|e| Error::io(path, e))?)
}

fn csv_error(e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::CsvParse {
            line: p.line(),
            message: e.to_string(),
        },
        None => Error::Csv(e),
    }
}

/// Spread of one `(size, kind, multiplier)` group of rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub m: usize,
    pub n: usize,
    pub perm_kind: PermutationKind,
    pub multiplier: f64,
    pub count: usize,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub floor: f64,
}

/// Median of a non-empty slice; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

/// Groups rows by `(m, n, kind, multiplier)` in order of first appearance.
pub fn summarize(rows: &[ResultRow]) -> Vec<GroupSummary> {
    let mut groups: Vec<(GroupSummary, Vec<f64>)> = Vec::new();
    for r in rows {
        let found = groups.iter_mut().find(|(g, _)| {
            (g.m, g.n, g.perm_kind) == (r.m, r.n, r.perm_kind) && g.multiplier == r.multiplier
        });
        match found {
            Some((g, values)) => {
                g.floor = g.floor.min(r.floor);
                values.push(r.pvalue);
            }
            None => groups.push((
                GroupSummary {
                    m: r.m,
                    n: r.n,
                    perm_kind: r.perm_kind,
                    multiplier: r.multiplier,
                    count: 0,
                    median: 0.0,
                    min: 0.0,
                    max: 0.0,
                    floor: r.floor,
                },
                vec![r.pvalue],
            )),
        }
    }
    groups
        .into_iter()
        .map(|(g, values)| GroupSummary {
            count: values.len(),
            median: median(&values),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ..g
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            rows: 24,
            cols: 16,
            sizes: vec![(4, 3)],
            replicates: 19,
            reps: 2,
            multipliers: vec![0.5, 2.0],
            engine: ScanEngine::las(3, 20),
            no_timing: true,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn default_grid() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.multipliers, [0.625, 0.75, 0.875, 1.0, 1.125, 1.25, 1.375, 1.5]);
        cfg.validate().unwrap();
        let one = ExperimentConfig {
            sizes: vec![(10, 15)],
            kinds: vec![PermutationKind::Bidimensional],
            ..cfg
        };
        assert_eq!(one.row_count(), 800);
    }

    #[test]
    fn config_json_overlay() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"reps": 3, "k_rows": 4, "mode": "upper-bound", "kinds": ["bi"]}"#)
                .unwrap();
        assert_eq!(cfg.reps, 3);
        assert_eq!(cfg.k_rows, NetK::Fixed(4));
        assert_eq!(cfg.k_cols, NetK::Default);
        assert_eq!(cfg.mode, Mode::UpperBound);
        assert_eq!(cfg.replicates, 500);
        let back: ExperimentConfig =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"k_rows": "auto"}"#).is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            ExperimentConfig {
                multipliers: vec![1.0, 0.5],
                ..small()
            },
            ExperimentConfig {
                multipliers: vec![0.0, 1.0],
                ..small()
            },
            ExperimentConfig { reps: 0, ..small() },
            ExperimentConfig {
                sizes: vec![(25, 3)],
                ..small()
            },
            ExperimentConfig {
                sizes: vec![(24, 16)],
                ..small()
            },
            ExperimentConfig {
                k_rows: NetK::Fixed(0),
                ..small()
            },
            ExperimentConfig {
                kinds: vec![],
                ..small()
            },
        ];
        for cfg in bad {
            assert!(run_experiment(&cfg).unwrap_err().is_validation());
        }
    }

    #[test]
    fn rows_follow_cell_order() {
        let cfg = small();
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), cfg.row_count());
        let keys: Vec<_> = rows
            .iter()
            .map(|r| (r.perm_kind, r.multiplier, r.replicate))
            .collect();
        let mut want = Vec::new();
        for kind in [PermutationKind::Unidimensional, PermutationKind::Bidimensional] {
            for mult in [0.5, 2.0] {
                for rep in 0..2 {
                    want.push((kind, mult, rep));
                }
            }
        }
        assert_eq!(keys, want);
        for r in &rows {
            assert!(r.pvalue >= r.floor && r.pvalue <= 1.0);
            assert_eq!(r.wall_ms, None);
        }
        // the kinds of a cell share the instance
        assert_eq!(rows[0].seed, rows[4].seed);
        assert_ne!(rows[0].seed, rows[1].seed);
    }

    #[test]
    fn csv_round_trip() {
        let cfg = ExperimentConfig {
            no_timing: false,
            mode: Mode::UpperBound,
            ..small()
        };
        let rows = run_experiment(&cfg).unwrap();
        let mut buf = Vec::new();
        write_csv(&cfg, &rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# subscan"));
        assert!(text.contains("# replicates: 19"));
        assert!(!text.contains("threads"));
        assert_eq!(parse_csv(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn parse_errors_report_lines() {
        let mut buf = Vec::new();
        write_csv(&small(), &[], &mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        let comments = text.lines().filter(|l| l.starts_with('#')).count() as u64;
        assert!(parse_csv(text.as_bytes()).unwrap().is_empty());
        text.push_str("gaussian,24,16,4,3,bidimensional,net_bonferroni,oops,1,0,19,2,2,5,5,1,1,,7\n");
        match parse_csv(text.as_bytes()) {
            Err(Error::CsvParse { line, .. }) => assert_eq!(line, comments + 2),
            other => panic!("expected a parse error, got {other:?}"),
        }
        match parse_csv("a,b\n1,2\n".as_bytes()) {
            Err(Error::CsvParse { line: 1, .. }) => {}
            other => panic!("expected a header error, got {other:?}"),
        }
    }

    #[test]
    fn summaries() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let rows = run_experiment(&small()).unwrap();
        let groups = summarize(&rows);
        assert_eq!(groups.len(), 4);
        assert!(groups.iter().all(|g| g.count == 2 && g.min <= g.median && g.median <= g.max));
        assert_eq!(groups[1].multiplier, 2.0);
        assert_eq!(groups[2].perm_kind, PermutationKind::Bidimensional);
    }
}
