//! Experiment harness: RMSE, window sweeps, throughput and singles ratios.
//!
//! Every RMSE cell streams a trace through one sketch and an
//! [`ExactWindowCounter`], queries the just-arrived item on both, and checks
//! the `(W, eps)` guarantee at every arrival. Cells are independent and run
//! through [`Execution`].

use std::fmt;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::item::ItemKey;
use crate::lwcss::{LwcssSketch, NextArrivalPredictor};
use crate::oracles::{
    predictions, ConstantOracle, FlipOracle, GapTable, PositionalOracle, PredictionQuality,
};
use crate::par::Execution;
use crate::wcss::{self, WcssSketch};
use crate::workload::{self, ExactWindowCounter, SinglesDenominator, Trace, TraceFormat};

/// Exact CSV header of result files.
pub const CSV_HEADER: &str =
    "variant,eps,w,memory_bytes,rmse,updates_per_sec,queries_per_sec,oracle_f1,seed";

/// Minimum operations per timed pass in [`throughput_run`].
pub const MIN_TIMED_OPS: usize = 1_000_000;
const TIMING_REPETITIONS: usize = 3;

/// Sketch variants compared by the harness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Wcss,
    Lwcss,
    /// WCSS given the same block count (counter budget) that LWCSS uses at
    /// the same eps, for comparisons at matched memory.
    WcssMatched,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Wcss => "wcss",
            Variant::Lwcss => "lwcss",
            Variant::WcssMatched => "wcss-matched",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wcss" => Ok(Variant::Wcss),
            "lwcss" => Ok(Variant::Lwcss),
            "wcss-matched" => Ok(Variant::WcssMatched),
            other => Err(Error::invalid(format!("unknown variant {other:?}"))),
        }
    }
}

/// Standard deviation of the Gaussian oracle, absolute or relative to `W`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Sigma {
    Absolute(f64),
    /// `W / divisor`
    WindowOver(f64),
}

impl Sigma {
    pub fn resolve(self, window: u64) -> f64 {
        match self {
            Sigma::Absolute(s) => s,
            Sigma::WindowOver(d) => window as f64 / d,
        }
    }
}

/// Which predictor drives LWCSS.
///
/// Textual forms: `perfect`, `gaussian:<sigma>` or `gaussian:w/<d>`,
/// `flip:<p>` (flips the perfect oracle), `constant:<true|false>`,
/// `file:<path>`.
#[derive(Clone, Debug, PartialEq)]
pub enum OracleSpec {
    Perfect,
    Gaussian(Sigma),
    Flip(f64),
    Constant(bool),
    File(PathBuf),
}

impl FromStr for OracleSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::invalid(format!("unrecognized oracle spec {s:?}"));
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        match (kind, arg) {
            ("perfect", None) => Ok(OracleSpec::Perfect),
            ("gaussian", Some(a)) => {
                let lower = a.to_ascii_lowercase();
                if let Some(d) = lower.strip_prefix("w/") {
                    let d: f64 = d.parse().map_err(|_| bad())?;
                    if d.is_nan() || d <= 0.0 {
                        return Err(bad());
                    }
                    Ok(OracleSpec::Gaussian(Sigma::WindowOver(d)))
                } else {
                    Ok(OracleSpec::Gaussian(Sigma::Absolute(
                        a.parse().map_err(|_| bad())?,
                    )))
                }
            }
            ("flip", Some(a)) => Ok(OracleSpec::Flip(a.parse().map_err(|_| bad())?)),
            ("constant" | "const", Some(a)) => {
                Ok(OracleSpec::Constant(a.parse().map_err(|_| bad())?))
            }
            ("file", Some(a)) if !a.is_empty() => Ok(OracleSpec::File(PathBuf::from(a))),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for OracleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleSpec::Perfect => f.write_str("perfect"),
            OracleSpec::Gaussian(Sigma::Absolute(s)) => write!(f, "gaussian:{s}"),
            OracleSpec::Gaussian(Sigma::WindowOver(d)) => write!(f, "gaussian:w/{d}"),
            OracleSpec::Flip(p) => write!(f, "flip:{p}"),
            OracleSpec::Constant(b) => write!(f, "constant:{b}"),
            OracleSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

/// Boxed predictor as built by [`build_oracle`].
pub type DynPredictor = Box<dyn NextArrivalPredictor + Send + Sync>;

/// Materializes `spec` for `trace`. Noisy oracles are seeded with `seed`.
pub fn build_oracle(
    spec: &OracleSpec,
    trace: &[ItemKey],
    gaps: &GapTable,
    window: u64,
    seed: u64,
) -> Result<DynPredictor> {
    // decorrelate oracle noise from the Zipf trace drawn with the same seed
    let seed = seed ^ 0x6f72_6163_6c65_0000;
    Ok(match spec {
        OracleSpec::Perfect => Box::new(PositionalOracle::perfect(gaps, window)),
        OracleSpec::Gaussian(sigma) => Box::new(PositionalOracle::gaussian(
            gaps,
            window,
            sigma.resolve(window),
            seed,
        )?),
        OracleSpec::Flip(p) => Box::new(FlipOracle::new(
            PositionalOracle::perfect(gaps, window),
            *p,
            seed,
        )?),
        OracleSpec::Constant(b) => Box::new(ConstantOracle::new(*b)),
        OracleSpec::File(path) => Box::new(PositionalOracle::from_file(path, trace.len())?),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum WorkloadSpec {
    Zipf {
        universe: u64,
        length: usize,
        alpha: f64,
    },
    File {
        path: PathBuf,
        format: TraceFormat,
    },
}

impl WorkloadSpec {
    /// Zipf traces are drawn per seed; a file trace is the same for all.
    pub fn trace(&self, seed: u64) -> Result<Trace> {
        match self {
            WorkloadSpec::Zipf {
                universe,
                length,
                alpha,
            } => workload::gen_zipf(*universe, *length, *alpha, seed),
            WorkloadSpec::File { path, format } => workload::read_trace(path, *format),
        }
    }

    fn per_seed(&self) -> bool {
        matches!(self, WorkloadSpec::Zipf { .. })
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub workload: WorkloadSpec,
    pub window: u64,
    pub eps: Vec<f64>,
    pub variants: Vec<Variant>,
    pub oracle: OracleSpec,
    pub seeds: Vec<u64>,
    /// Bytes per identifier in memory accounting.
    pub id_bytes: u64,
    /// Fail a cell on any `(W, eps)` guarantee violation.
    pub check_guarantee: bool,
    pub execution: Execution,
}

impl ExperimentConfig {
    /// Zipf(1.0) over 10^5 items, 10^6 arrivals, `W = 2^10`,
    /// `eps in {1/16, 1/32, 1/64}`, five seeds, perfect oracle.
    pub fn desk_default() -> Self {
        ExperimentConfig {
            workload: WorkloadSpec::Zipf {
                universe: 100_000,
                length: 1_000_000,
                alpha: 1.0,
            },
            window: 1 << 10,
            eps: vec![1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
            variants: vec![Variant::Wcss, Variant::Lwcss],
            oracle: OracleSpec::Perfect,
            seeds: (0..5).collect(),
            id_bytes: wcss::DEFAULT_ID_BYTES,
            check_guarantee: true,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps.is_empty() {
            return Err(Error::invalid("at least one epsilon is required"));
        }
        if self.variants.is_empty() {
            return Err(Error::invalid("at least one sketch variant is required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        if self.window == 0 {
            return Err(Error::invalid("window must be positive"));
        }
        if let WorkloadSpec::Zipf { length: 0, .. } = self.workload {
            return Err(Error::EmptyTrace);
        }
        Ok(())
    }
}

/// One output row; timing and quality columns are absent when a run does
/// not measure them.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub variant: Variant,
    pub eps: f64,
    pub window: u64,
    pub memory_bytes: u64,
    pub rmse: Option<f64>,
    pub updates_per_sec: Option<f64>,
    pub queries_per_sec: Option<f64>,
    pub oracle_f1: Option<f64>,
    pub seed: u64,
}

impl ResultRow {
    pub fn csv_fields(&self) -> [String; 9] {
        fn opt(v: Option<f64>, prec: usize) -> String {
            v.map_or_else(String::new, |x| format!("{x:.prec$}"))
        }
        [
            self.variant.to_string(),
            self.eps.to_string(),
            self.window.to_string(),
            self.memory_bytes.to_string(),
            opt(self.rmse, 6),
            opt(self.updates_per_sec, 0),
            opt(self.queries_per_sec, 0),
            opt(self.oracle_f1, 6),
            self.seed.to_string(),
        ]
    }
}

/// A cell that could not produce a row.
#[derive(Debug)]
pub struct CellError {
    pub variant: Variant,
    pub eps: f64,
    pub window: u64,
    pub seed: u64,
    pub error: Error,
}

impl fmt::Display for CellError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} eps={} w={} seed={}: {}",
            self.variant, self.eps, self.window, self.seed, self.error
        )
    }
}

pub type CellResult = std::result::Result<ResultRow, CellError>;

/// Common surface of the sketches under test.
pub trait WindowSketch {
    fn update(&mut self, item: ItemKey);
    fn query(&self, item: ItemKey) -> u64;
    fn memory_bytes(&self) -> u64;
}

impl WindowSketch for WcssSketch {
    fn update(&mut self, item: ItemKey) {
        WcssSketch::update(self, item)
    }

    fn query(&self, item: ItemKey) -> u64 {
        WcssSketch::query(self, item)
    }

    fn memory_bytes(&self) -> u64 {
        WcssSketch::memory_bytes(self)
    }
}

impl<P: NextArrivalPredictor> WindowSketch for LwcssSketch<P> {
    fn update(&mut self, item: ItemKey) {
        LwcssSketch::update(self, item);
    }

    fn query(&self, item: ItemKey) -> u64 {
        LwcssSketch::query(self, item)
    }

    fn memory_bytes(&self) -> u64 {
        LwcssSketch::memory_bytes(self)
    }
}

/// Block count LWCSS uses internally at `(window, eps)`.
pub fn lwcss_block_count(window: u64, eps: f64) -> Result<u64> {
    let sk = LwcssSketch::new(window, eps, ConstantOracle::new(true))?;
    Ok(sk.inner().block_count())
}

/// Sketch plus the predictor quality it was built with.
struct Prepared {
    sketch: Box<dyn WindowSketch>,
    oracle_f1: Option<f64>,
}

fn prepare(
    variant: Variant,
    eps: f64,
    window: u64,
    seed: u64,
    trace: &Trace,
    gaps: Option<&GapTable>,
    config: &ExperimentConfig,
) -> Result<Prepared> {
    Ok(match variant {
        Variant::Wcss => Prepared {
            sketch: Box::new(WcssSketch::new(window, eps)?.with_id_bytes(config.id_bytes)),
            oracle_f1: None,
        },
        Variant::WcssMatched => {
            let blocks = lwcss_block_count(window, eps)?;
            Prepared {
                sketch: Box::new(
                    WcssSketch::with_blocks(window, blocks)?.with_id_bytes(config.id_bytes),
                ),
                oracle_f1: None,
            }
        }
        Variant::Lwcss => {
            let owned;
            let gaps = match gaps {
                Some(g) => g,
                None => {
                    owned = GapTable::build(trace.items())?;
                    &owned
                }
            };
            let oracle = build_oracle(&config.oracle, trace.items(), gaps, window, seed)?;
            let quality = PredictionQuality::evaluate(
                &predictions(&oracle, trace.items()),
                &gaps.labels(window),
            )?;
            Prepared {
                sketch: Box::new(
                    LwcssSketch::new(window, eps, oracle)?.with_id_bytes(config.id_bytes),
                ),
                oracle_f1: Some(quality.f1),
            }
        }
    })
}

/// Streams `trace` through `sketch`, returning `(rmse, peak memory)`.
///
/// With `check` set, any estimate outside `[exact, exact + eps * W]` aborts
/// the run.
pub fn measure_rmse(
    sketch: &mut dyn WindowSketch,
    trace: &[ItemKey],
    window: u64,
    eps: f64,
    check: bool,
) -> Result<(f64, u64)> {
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let mut exact = ExactWindowCounter::new(window);
    let slack = eps * window as f64;
    let mut sum_sq = 0.0;
    let mut peak = sketch.memory_bytes();
    for (t, &x) in trace.iter().enumerate() {
        sketch.update(x);
        exact.update(x);
        let est = sketch.query(x);
        let f = exact.query(x);
        if check && (est < f || (est - f) as f64 > slack + 1e-9) {
            return Err(Error::GuaranteeViolated {
                position: t as u64,
                estimate: est,
                exact: f,
                slack,
            });
        }
        let d = est as f64 - f as f64;
        sum_sq += d * d;
        peak = peak.max(sketch.memory_bytes());
    }
    Ok(((sum_sq / trace.len() as f64).sqrt(), peak))
}

struct Cell {
    window: u64,
    seed: u64,
    variant: Variant,
    eps: f64,
    trace_index: usize,
}

struct Prepped {
    trace: Trace,
    gaps: Option<GapTable>,
}

fn load_traces(config: &ExperimentConfig, need_gaps: bool) -> Result<Vec<Prepped>> {
    let seeds: Vec<u64> = if config.workload.per_seed() {
        config.seeds.clone()
    } else {
        vec![config.seeds[0]]
    };
    config
        .execution
        .map(&seeds, |&seed| {
            let trace = config.workload.trace(seed)?;
            let gaps = if need_gaps {
                Some(GapTable::build(trace.items())?)
            } else {
                None
            };
            Ok(Prepped { trace, gaps })
        })
        .into_iter()
        .collect()
}

fn grid(config: &ExperimentConfig, windows: &[u64]) -> Vec<Cell> {
    let mut cells = Vec::new();
    for &window in windows {
        for (i, &seed) in config.seeds.iter().enumerate() {
            let trace_index = if config.workload.per_seed() { i } else { 0 };
            for &variant in &config.variants {
                for &eps in &config.eps {
                    cells.push(Cell {
                        window,
                        seed,
                        variant,
                        eps,
                        trace_index,
                    });
                }
            }
        }
    }
    cells
}

fn run_grid(config: &ExperimentConfig, windows: &[u64]) -> Result<Vec<CellResult>> {
    config.validate()?;
    if windows.is_empty() {
        return Err(Error::invalid("at least one window is required"));
    }
    let need_gaps = config.variants.contains(&Variant::Lwcss);
    let traces = load_traces(config, need_gaps)?;
    let cells = grid(config, windows);
    Ok(config.execution.map(&cells, |cell| {
        let prepped = &traces[cell.trace_index];
        let run = || -> Result<ResultRow> {
            let Prepared {
                mut sketch,
                oracle_f1,
            } = prepare(
                cell.variant,
                cell.eps,
                cell.window,
                cell.seed,
                &prepped.trace,
                prepped.gaps.as_ref(),
                config,
            )?;
            let (rmse, memory_bytes) = measure_rmse(
                sketch.as_mut(),
                prepped.trace.items(),
                cell.window,
                cell.eps,
                config.check_guarantee,
            )?;
            Ok(ResultRow {
                variant: cell.variant,
                eps: cell.eps,
                window: cell.window,
                memory_bytes,
                rmse: Some(rmse),
                updates_per_sec: None,
                queries_per_sec: None,
                oracle_f1,
                seed: cell.seed,
            })
        };
        run().map_err(|error| CellError {
            variant: cell.variant,
            eps: cell.eps,
            window: cell.window,
            seed: cell.seed,
            error,
        })
    }))
}

/// One row per (seed, variant, eps) at the configured window.
pub fn rmse_run(config: &ExperimentConfig) -> Result<Vec<CellResult>> {
    run_grid(config, &[config.window])
}

/// [`rmse_run`] for each window in `windows`, sharing the traces.
pub fn window_sweep(config: &ExperimentConfig, windows: &[u64]) -> Result<Vec<CellResult>> {
    run_grid(config, windows)
}

fn median(mut xs: Vec<Duration>) -> Duration {
    xs.sort();
    xs[xs.len() / 2]
}

/// Times a pure-update pass and a pure-query pass per (seed, variant, eps),
/// each over at least `min_ops` arrivals (the trace is repeated as needed),
/// reporting the median of three repetitions. Cells run sequentially.
pub fn throughput_run(config: &ExperimentConfig, min_ops: usize) -> Result<Vec<CellResult>> {
    config.validate()?;
    if min_ops == 0 {
        return Err(Error::invalid(
            "throughput run needs at least one operation",
        ));
    }
    let need_gaps = config.variants.contains(&Variant::Lwcss);
    let mut sequential = config.clone();
    sequential.execution = Execution::Sequential;
    let traces: Vec<Prepped> = load_traces(&sequential, false)?
        .into_iter()
        .map(|p| {
            let trace = p.trace.cycled(min_ops);
            let gaps = if need_gaps {
                Some(GapTable::build(trace.items())?)
            } else {
                None
            };
            Ok(Prepped { trace, gaps })
        })
        .collect::<Result<_>>()?;
    let cells = grid(config, &[config.window]);
    let mut out = Vec::with_capacity(cells.len());
    for cell in &cells {
        let prepped = &traces[cell.trace_index];
        let run = || -> Result<ResultRow> {
            let items = prepped.trace.items();
            let mut update_times = Vec::new();
            let mut query_times = Vec::new();
            let mut memory_bytes = 0;
            let mut oracle_f1 = None;
            for _ in 0..TIMING_REPETITIONS {
                let Prepared {
                    mut sketch,
                    oracle_f1: f1,
                } = prepare(
                    cell.variant,
                    cell.eps,
                    cell.window,
                    cell.seed,
                    &prepped.trace,
                    prepped.gaps.as_ref(),
                    config,
                )?;
                oracle_f1 = f1;
                let start = Instant::now();
                for &x in items {
                    sketch.update(x);
                }
                update_times.push(start.elapsed());
                let start = Instant::now();
                let mut acc = 0u64;
                for &x in items {
                    acc = acc.wrapping_add(sketch.query(x));
                }
                std::hint::black_box(acc);
                query_times.push(start.elapsed());
                memory_bytes = sketch.memory_bytes();
            }
            let rate = |d: Duration| items.len() as f64 / d.as_secs_f64().max(1e-12);
            Ok(ResultRow {
                variant: cell.variant,
                eps: cell.eps,
                window: cell.window,
                memory_bytes,
                rmse: None,
                updates_per_sec: Some(rate(median(update_times))),
                queries_per_sec: Some(rate(median(query_times))),
                oracle_f1,
                seed: cell.seed,
            })
        };
        out.push(run().map_err(|error| CellError {
            variant: cell.variant,
            eps: cell.eps,
            window: cell.window,
            seed: cell.seed,
            error,
        }));
    }
    Ok(out)
}

/// Average singles ratio per frame size.
pub fn singles_sweep(
    trace: &[ItemKey],
    frames: &[usize],
    denominator: SinglesDenominator,
) -> Result<Vec<(usize, f64)>> {
    frames
        .iter()
        .map(|&f| Ok((f, workload::singles_ratio(trace, f, denominator)?)))
        .collect()
}

pub fn write_rows_csv<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::io("<csv output>", std::io::Error::other(e));
    w.write_record(CSV_HEADER.split(',')).map_err(io)?;
    for row in rows {
        w.write_record(row.csv_fields()).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))
}

pub fn write_singles_csv<W: Write>(out: W, ratios: &[(usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::io("<csv output>", std::io::Error::other(e));
    w.write_record(["frame_size", "avg_ratio"]).map_err(io)?;
    for (f, r) in ratios {
        w.write_record([f.to_string(), format!("{r:.6}")])
            .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io("<csv output>", e))
}

/// Parses an epsilon written as a decimal or a fraction such as `1/32`.
pub fn parse_eps(s: &str) -> Result<f64> {
    let s = s.trim();
    let bad = || Error::invalid(format!("cannot parse epsilon {s:?}"));
    let value = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| bad())?;
            let d: f64 = d.trim().parse().map_err(|_| bad())?;
            n / d
        }
        None => s.parse().map_err(|_| bad())?,
    };
    if !(value > 0.0 && value <= 1.0) {
        return Err(Error::invalid(format!(
            "epsilon must lie in (0, 1], got {s}"
        )));
    }
    Ok(value)
}
