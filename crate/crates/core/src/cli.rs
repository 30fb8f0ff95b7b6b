//! The `subscan` command line, a thin layer over the library.
//!
//! Every subcommand accepts `--seed` and `--json-config FILE`. The config
//! file is a JSON object keyed by the subcommand's option names in
//! snake_case (for `experiment`, an experiment config document); options
//! given on the command line take precedence. Results go to standard output:
//! JSON for most subcommands, CSV for `gen` and `experiment`, one
//! `binary decimal` line per element for `net`.
//!
//! Exit status is 0 on success, 1 for invalid arguments or input and 2 for
//! failures at run time.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::detect::{
    bonferroni_full_with, bonferroni_net_with, single_size_test, upper_bound_single_pair_with,
    SweepOptions,
};
use crate::error::{Error, Result};
use crate::experiment::{run_to_csv, ExperimentConfig, Mode, NetK};
use crate::model::{generate_instance, NoiseFamily};
use crate::net::{build_net, default_k};
use crate::perm::{MCConfig, PermutationKind};
use crate::plot::emit_plot;
use crate::stats::{DataMatrix, ScanEngine, DEFAULT_EXACT_BUDGET, DEFAULT_MAX_ITERS, DEFAULT_RESTARTS};
use crate::theory::{detection_ratios, theta_crit};

#[derive(Parser)]
#[command(name = "subscan", version, about = "Permutation scan tests for elevated submatrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a planted instance and print it as CSV.
    Gen(GenArgs),
    /// Compute the scan statistic of a matrix.
    Scan(ScanArgs),
    /// Permutation test at a single size.
    Test(TestArgs),
    /// Bonferroni test over a net, an explicit size list, or one net pair.
    Bonf(BonfArgs),
    /// Print an approximation net.
    Net(NetArgs),
    /// Locate a signal level relative to the detection boundaries.
    Regime(RegimeArgs),
    /// Run the simulation study and print CSV.
    Experiment(ExperimentArgs),
    /// Render experiment CSV as SVG.
    Plot(PlotArgs),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON object supplying defaults for the options of this subcommand.
    #[arg(long, value_name = "FILE")]
    json_config: Option<PathBuf>,
}

fn parse_serde<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// `MxN` or `M,N`.
fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', ','])
        .ok_or_else(|| format!("expected a size like 10x15, got {s:?}"))?;
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{t:?}: {e}"));
    Ok((num(a)?, num(b)?))
}

fn parse_net_k(s: &str) -> std::result::Result<NetK, String> {
    match s {
        "default" => Ok(NetK::Default),
        _ => s.parse().map(NetK::Fixed).map_err(|e| format!("{s:?}: {e}")),
    }
}

/// Options choosing and tuning the scan engine.
#[derive(Args, Clone, Default, Serialize)]
struct EngineArgs {
    /// Exhaustive scan instead of the alternating heuristic.
    #[arg(long)]
    exact: bool,
    /// Heuristic restarts.
    #[arg(long)]
    restarts: Option<usize>,
    /// Heuristic iteration cap per restart.
    #[arg(long)]
    max_iters: Option<usize>,
    /// Candidate evaluations allowed for the exhaustive scan.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default)]
struct EngineParams {
    exact: bool,
    restarts: usize,
    max_iters: usize,
    budget: u64,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            exact: false,
            restarts: DEFAULT_RESTARTS,
            max_iters: DEFAULT_MAX_ITERS,
            budget: DEFAULT_EXACT_BUDGET,
        }
    }
}

impl EngineParams {
    fn engine(&self) -> ScanEngine {
        if self.exact {
            ScanEngine::Exact {
                budget: self.budget,
            }
        } else {
            ScanEngine::las(self.restarts, self.max_iters)
        }
    }
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    /// Number of rows.
    #[arg(long = "M", visible_alias = "rows")]
    rows: Option<usize>,
    /// Number of columns.
    #[arg(long = "N", visible_alias = "cols")]
    cols: Option<usize>,
    /// Planted rows.
    #[arg(long)]
    m: Option<usize>,
    /// Planted columns.
    #[arg(long)]
    n: Option<usize>,
    /// Signal level inside the block.
    #[arg(long, conflicts_with = "multiplier")]
    theta: Option<f64>,
    /// Signal level as a multiple of theta_crit.
    #[arg(long)]
    multiplier: Option<f64>,
    #[arg(long, value_parser = parse_serde::<NoiseFamily>)]
    family: Option<NoiseFamily>,
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GenParams {
    rows: usize,
    cols: usize,
    m: usize,
    n: usize,
    theta: Option<f64>,
    multiplier: Option<f64>,
    family: NoiseFamily,
    seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        Self {
            rows: 200,
            cols: 100,
            m: 10,
            n: 15,
            theta: None,
            multiplier: None,
            family: NoiseFamily::Gaussian,
            seed: 0,
        }
    }
}

/// Matrix source shared by the testing subcommands.
#[derive(Args, Serialize)]
struct InputArgs {
    /// Matrix as headerless CSV; the 3x4 demo matrix 1..12 when absent.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ScanArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    engine: EngineArgs,
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct ScanParams {
    input: Option<PathBuf>,
    m: Option<usize>,
    n: Option<usize>,
    seed: u64,
    #[serde(flatten)]
    engine: EngineParams,
}

/// Calibration options shared by `test` and `bonf`.
#[derive(Args, Serialize)]
struct CalibrationArgs {
    /// Permutation replicates B.
    #[arg(long, short = 'B')]
    replicates: Option<usize>,
    /// unidimensional (within rows) or bidimensional (all entries).
    #[arg(long, value_parser = parse_serde::<PermutationKind>)]
    kind: Option<PermutationKind>,
    #[arg(long)]
    alpha: Option<f64>,
}

#[derive(Deserialize)]
#[serde(default)]
struct CalibrationParams {
    replicates: usize,
    kind: PermutationKind,
    alpha: f64,
    seed: u64,
    #[serde(flatten)]
    engine: EngineParams,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        Self {
            replicates: 500,
            kind: PermutationKind::Bidimensional,
            alpha: 0.05,
            seed: 0,
            engine: EngineParams::default(),
        }
    }
}

impl CalibrationParams {
    fn config(&self) -> MCConfig {
        MCConfig::new(self.replicates, self.kind, self.seed, self.engine.engine())
    }
}

#[derive(Args, Serialize)]
struct TestArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    calibration: CalibrationArgs,
    #[command(flatten)]
    #[serde(flatten)]
    engine: EngineArgs,
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct TestParams {
    input: Option<PathBuf>,
    m: Option<usize>,
    n: Option<usize>,
    #[serde(flatten)]
    calibration: CalibrationParams,
}

#[derive(Args, Serialize)]
struct BonfArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    input: InputArgs,
    /// Explicit size list (repeatable); switches to the M*N full-grid correction.
    #[arg(long = "size", value_parser = parse_size, value_name = "MxN")]
    #[serde(rename = "sizes", skip_serializing_if = "Vec::is_empty")]
    sizes: Vec<(usize, usize)>,
    /// Calibrate only the net pair just above this size.
    #[arg(long, value_parser = parse_size, value_name = "MxN", conflicts_with = "sizes")]
    upper_bound: Option<(usize, usize)>,
    /// Row net precision, or "default".
    #[arg(long, value_parser = parse_net_k)]
    k_rows: Option<NetK>,
    /// Column net precision, or "default".
    #[arg(long, value_parser = parse_net_k)]
    k_cols: Option<NetK>,
    /// Scan every replicate at every size with one permutation stream.
    #[arg(long)]
    shared_permutations: bool,
    /// Calibrate every size fully even when it cannot change the result.
    #[arg(long)]
    no_prune: bool,
    #[command(flatten)]
    #[serde(flatten)]
    calibration: CalibrationArgs,
    #[command(flatten)]
    #[serde(flatten)]
    engine: EngineArgs,
}

#[derive(Deserialize, Default)]
#[serde(default)]
struct BonfParams {
    input: Option<PathBuf>,
    sizes: Vec<(usize, usize)>,
    upper_bound: Option<(usize, usize)>,
    k_rows: NetK,
    k_cols: NetK,
    shared_permutations: bool,
    no_prune: bool,
    #[serde(flatten)]
    calibration: CalibrationParams,
}

#[derive(Args, Serialize)]
struct NetArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    /// Upper end of the range 1..=M.
    #[arg(long = "M", visible_alias = "max")]
    max: Option<u64>,
    /// Digits kept; floor(log2 log2 M) when absent.
    #[arg(long)]
    k: Option<u32>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct NetParams {
    max: Option<u64>,
    k: Option<u32>,
    // accepted for uniformity, unused
    seed: u64,
}

#[derive(Args, Serialize)]
struct RegimeArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long = "M", visible_alias = "rows")]
    rows: Option<usize>,
    #[arg(long = "N", visible_alias = "cols")]
    cols: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct RegimeParams {
    rows: Option<usize>,
    cols: Option<usize>,
    m: Option<usize>,
    n: Option<usize>,
    theta: Option<f64>,
    seed: u64,
}

#[derive(Args, Serialize)]
struct ExperimentArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    #[arg(long, value_parser = parse_serde::<NoiseFamily>)]
    family: Option<NoiseFamily>,
    #[arg(long = "M", visible_alias = "rows")]
    rows: Option<usize>,
    #[arg(long = "N", visible_alias = "cols")]
    cols: Option<usize>,
    /// Planted size (repeatable).
    #[arg(long = "size", value_parser = parse_size, value_name = "MxN")]
    #[serde(rename = "sizes", skip_serializing_if = "Vec::is_empty")]
    sizes: Vec<(usize, usize)>,
    /// Permutation kind (repeatable).
    #[arg(long = "kind", value_parser = parse_serde::<PermutationKind>)]
    #[serde(rename = "kinds", skip_serializing_if = "Vec::is_empty")]
    kinds: Vec<PermutationKind>,
    #[arg(long, short = 'B')]
    replicates: Option<usize>,
    /// Instances per signal level.
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated multiples of theta_crit.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Vec::is_empty")]
    multipliers: Vec<f64>,
    #[arg(long, value_parser = parse_net_k)]
    k_rows: Option<NetK>,
    #[arg(long, value_parser = parse_net_k)]
    k_cols: Option<NetK>,
    /// net_bonferroni or upper_bound.
    #[arg(long, value_parser = parse_serde::<Mode>)]
    mode: Option<Mode>,
    #[arg(long)]
    shared_permutations: bool,
    #[arg(long)]
    #[serde(skip)]
    no_prune: bool,
    #[arg(long)]
    threads: Option<usize>,
    /// Leave the wall-clock column empty.
    #[arg(long)]
    no_timing: bool,
    /// CSV destination instead of standard output.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    #[command(flatten)]
    #[serde(skip)]
    engine: EngineArgs,
}

#[derive(Args, Serialize)]
struct PlotArgs {
    #[command(flatten)]
    #[serde(skip)]
    common: Common,
    /// Experiment CSV.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// SVG destination.
    #[arg(long, short = 'o', value_name = "FILE")]
    output: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
struct PlotParams {
    input: Option<PathBuf>,
    output: Option<PathBuf>,
    seed: u64,
}

fn load_config(path: Option<&Path>) -> Result<Map<String, Value>> {
    let Some(path) = path else {
        return Ok(Map::new());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match serde_json::from_str(&text)? {
        Value::Object(map) => Ok(map),
        _ => Err(Error::invalid(format!("{}: config must be a JSON object", path.display()))),
    }
}

/// Overlays the options given on the command line onto the config file.
/// Absent options serialize as null and unset flags as false; neither
/// overrides the file.
fn merged(common: &Common, args: &impl Serialize) -> Result<Map<String, Value>> {
    let mut base = load_config(common.json_config.as_deref())?;
    if let Value::Object(patch) = serde_json::to_value(args)? {
        for (k, v) in patch {
            if !matches!(v, Value::Null | Value::Bool(false)) {
                base.insert(k, v);
            }
        }
    }
    if let Some(seed) = common.seed {
        base.insert("seed".into(), json!(seed));
    }
    Ok(base)
}

fn resolve<P: DeserializeOwned>(common: &Common, args: &impl Serialize) -> Result<P> {
    Ok(serde_json::from_value(Value::Object(merged(common, args)?))?)
}

fn required<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| Error::invalid(format!("missing required option --{name}")))
}

fn load_matrix(input: Option<&Path>) -> Result<DataMatrix> {
    match input {
        Some(path) => DataMatrix::read_csv(File::open(path).map_err(|e| Error::io(path, e))?),
        None => Ok(DataMatrix::demo()),
    }
}

fn print_json(out: &mut impl Write, value: &impl Serialize) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out).map_err(|e| Error::io("<stdout>", e))
}

fn generate(args: GenArgs, out: &mut impl Write) -> Result<()> {
    let p: GenParams = resolve(&args.common, &args)?;
    let theta = match (p.theta, p.multiplier) {
        (Some(_), Some(_)) => return Err(Error::invalid("give either theta or multiplier")),
        (Some(t), None) => t,
        (None, Some(k)) => k * theta_crit(p.rows, p.cols, p.m, p.n)?,
        (None, None) => 0.0,
    };
    let inst = generate_instance(p.rows, p.cols, p.m, p.n, theta, p.family, p.seed)?;
    let io_err = |e| Error::io("<stdout>", e);
    writeln!(out, "# family: {}", p.family).map_err(io_err)?;
    writeln!(out, "# theta: {theta}").map_err(io_err)?;
    writeln!(out, "# seed: {}", p.seed).map_err(io_err)?;
    match &inst.support {
        Some(s) => writeln!(out, "# support: rows 0..{} cols 0..{}", s.rows().len(), s.cols().len()),
        None => writeln!(out, "# support: none"),
    }
    .map_err(io_err)?;
    inst.data.write_csv(out)
}

fn scan(args: ScanArgs, out: &mut impl Write) -> Result<()> {
    let p: ScanParams = resolve(&args.common, &args)?;
    let x = load_matrix(p.input.as_deref())?;
    let (m, n) = (required(p.m, "m")?, required(p.n, "n")?);
    let engine = p.engine.engine();
    engine.validate()?;
    let result = engine.scan(&x, m, n, p.seed)?;
    print_json(
        out,
        &json!({ "m": m, "n": n, "engine": engine, "seed": p.seed, "result": result }),
    )
}

fn test(args: TestArgs, out: &mut impl Write) -> Result<()> {
    let p: TestParams = resolve(&args.common, &args)?;
    let x = load_matrix(p.input.as_deref())?;
    let (m, n) = (required(p.m, "m")?, required(p.n, "n")?);
    let outcome = single_size_test(&x, m, n, &p.calibration.config(), p.calibration.alpha)?;
    print_json(out, &outcome)
}

fn bonf(args: BonfArgs, out: &mut impl Write) -> Result<()> {
    let p: BonfParams = resolve(&args.common, &args)?;
    let x = load_matrix(p.input.as_deref())?;
    let cfg = p.calibration.config();
    let opts = SweepOptions {
        shared_permutations: p.shared_permutations,
        prune: !p.no_prune,
    };
    let k_rows = p.k_rows.resolve(x.rows())?;
    let k_cols = p.k_cols.resolve(x.cols())?;
    if let Some((m, n)) = p.upper_bound {
        let bound = upper_bound_single_pair_with(&x, m, n, k_rows, k_cols, &cfg, opts)?;
        return print_json(out, &bound);
    }
    let outcome = if p.sizes.is_empty() {
        bonferroni_net_with(&x, k_rows, k_cols, &cfg, p.calibration.alpha, opts)?
    } else {
        bonferroni_full_with(&x, &p.sizes, &cfg, p.calibration.alpha, opts)?
    };
    print_json(out, &outcome)
}

fn net(args: NetArgs, out: &mut impl Write) -> Result<()> {
    let p: NetParams = resolve(&args.common, &args)?;
    let max = required(p.max, "M")?;
    let k = match p.k {
        Some(k) => k,
        None => default_k(max)?,
    };
    for (binary, decimal) in build_net(max, k)?.table() {
        writeln!(out, "{binary} {decimal}").map_err(|e| Error::io("<stdout>", e))?;
    }
    Ok(())
}

fn regime(args: RegimeArgs, out: &mut impl Write) -> Result<()> {
    let p: RegimeParams = resolve(&args.common, &args)?;
    let report = detection_ratios(
        required(p.theta, "theta")?,
        required(p.rows, "M")?,
        required(p.cols, "N")?,
        required(p.m, "m")?,
        required(p.n, "n")?,
    )?;
    print_json(out, &report)
}

fn experiment_config(args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut map = merged(&args.common, args)?;
    if args.no_prune {
        map.insert("prune".into(), json!(false));
    }
    let e = &args.engine;
    if e.exact {
        let budget = e.budget.unwrap_or(DEFAULT_EXACT_BUDGET);
        map.insert("engine".into(), serde_json::to_value(ScanEngine::Exact { budget })?);
    } else if e.restarts.is_some() || e.max_iters.is_some() {
        let base = match map.get("engine").cloned().map(serde_json::from_value) {
            Some(Ok(ScanEngine::Las {
                restarts,
                max_iters,
            })) => (restarts, max_iters),
            _ => (DEFAULT_RESTARTS, DEFAULT_MAX_ITERS),
        };
        let engine = ScanEngine::las(e.restarts.unwrap_or(base.0), e.max_iters.unwrap_or(base.1));
        map.insert("engine".into(), serde_json::to_value(engine)?);
    }
    Ok(serde_json::from_value(Value::Object(map))?)
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let cfg = experiment_config(&args)?;
    cfg.validate()?;
    let rows = run_to_csv(&cfg)?;
    eprintln!("{} rows", rows.len());
    Ok(())
}

fn plot(args: PlotArgs, out: &mut impl Write) -> Result<()> {
    let p: PlotParams = resolve(&args.common, &args)?;
    let input = required(p.input, "input")?;
    let output = required(p.output, "output")?;
    emit_plot(&input, &output)?;
    print_json(out, &json!({ "input": input, "output": output }))
}

fn dispatch(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Gen(a) => generate(a, &mut out),
        Command::Scan(a) => scan(a, &mut out),
        Command::Test(a) => test(a, &mut out),
        Command::Bonf(a) => bonf(a, &mut out),
        Command::Net(a) => net(a, &mut out),
        Command::Regime(a) => regime(a, &mut out),
        Command::Experiment(a) => {
            drop(out);
            experiment(a)
        }
        Command::Plot(a) => plot(a, &mut out),
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
