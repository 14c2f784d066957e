use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};
use lwcss::experiment::{self, CellResult, ExperimentConfig, OracleSpec, ResultRow, WorkloadSpec};
use lwcss::oracles::{self, GapTable};
use lwcss::workload::{self, SinglesDenominator, Trace, TraceFormat};
use lwcss::{Error, Execution};

/// Sliding-window frequency sketches: experiments and trace tools.
#[derive(Parser, Debug)]
#[command(name = "lwcss", version, args_override_self = true)]
struct Cli {
    /// TOML file whose keys are long flag names; flags given on the command
    /// line take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// RMSE and peak memory per (variant, eps, seed).
    Rmse(RunArgs),
    /// RMSE across several window sizes.
    WindowSweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated window sizes.
        #[arg(long, default_value = "256,1024,4096")]
        windows: String,
    },
    /// Update and query throughput.
    Throughput {
        #[command(flatten)]
        run: RunArgs,
        /// Minimum operations per timed pass; the trace is repeated as needed.
        #[arg(long, default_value_t = experiment::MIN_TIMED_OPS)]
        min_ops: usize,
    },
    /// Average singles ratio per frame size.
    Singles {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma-separated frame sizes; defaults to powers of two 2^6..2^14.
        #[arg(long)]
        frames: Option<String>,
        /// `distinct` or `frame`.
        #[arg(long, default_value = "distinct")]
        denominator: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes a Zipf trace, one item name per line.
    GenZipf {
        #[arg(long, default_value_t = 100_000)]
        universe: u64,
        #[arg(long, default_value_t = 1_000_000)]
        length: usize,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Writes next-arrival labels for a trace as a prediction file.
    GapTable {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, default_value = "lines")]
        format: String,
        #[arg(long = "w", default_value_t = 1024)]
        window: u64,
        /// Write raw gaps instead of labels (`inf` when the item never recurs).
        #[arg(long)]
        raw: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct SourceArgs {
    /// Trace file; a Zipf trace is generated when absent.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// `lines` or `pairs`.
    #[arg(long, default_value = "lines")]
    format: String,
    #[arg(long, default_value_t = 100_000)]
    universe: u64,
    #[arg(long, default_value_t = 1_000_000)]
    length: usize,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
}

impl SourceArgs {
    fn workload(&self) -> Result<WorkloadSpec> {
        Ok(match &self.trace {
            Some(path) => WorkloadSpec::File {
                path: path.clone(),
                format: self.format.parse()?,
            },
            None => WorkloadSpec::Zipf {
                universe: self.universe,
                length: self.length,
                alpha: self.alpha,
            },
        })
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long = "w", default_value_t = 1024)]
    window: u64,
    /// Comma-separated; fractions such as 1/32 are accepted.
    #[arg(long, default_value = "1/16,1/32,1/64")]
    eps: String,
    /// Comma-separated from wcss, lwcss, wcss-matched.
    #[arg(long, default_value = "wcss,lwcss")]
    variant: String,
    /// perfect, gaussian:<sigma>, gaussian:w/<d>, flip:<p>, constant:<bool>,
    /// file:<path>.
    #[arg(long, default_value = "perfect")]
    oracle: String,
    /// Comma-separated seeds.
    #[arg(long, default_value = "0,1,2,3,4")]
    seeds: String,
    #[arg(long, default_value_t = 8)]
    id_bytes: u64,
    /// Report guarantee violations in the RMSE instead of failing the cell.
    #[arg(long)]
    no_check: bool,
    /// Run cells on the calling thread.
    #[arg(long)]
    sequential: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let execution = if self.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        };
        Ok(ExperimentConfig {
            workload: self.source.workload()?,
            window: self.window,
            eps: split(&self.eps)
                .map(experiment::parse_eps)
                .collect::<lwcss::Result<_>>()?,
            variants: split(&self.variant)
                .map(str::parse)
                .collect::<lwcss::Result<_>>()?,
            oracle: self.oracle.parse::<OracleSpec>()?,
            seeds: parse_list(&self.seeds, "seed")?,
            id_bytes: self.id_bytes,
            check_guarantee: !self.no_check,
            execution,
        })
    }
}

fn split(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|p| !p.is_empty())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    split(s)
        .map(|p| {
            p.parse()
                .map_err(|_| anyhow::anyhow!("cannot parse {what} {p:?}"))
        })
        .collect()
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Writes successful rows, reports failed cells on stderr and fails when
/// any cell broke the accuracy guarantee.
fn finish(results: Vec<CellResult>, out: Option<&Path>) -> Result<()> {
    let mut rows: Vec<ResultRow> = Vec::with_capacity(results.len());
    let mut violations = 0;
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(cell) => {
                if matches!(cell.error, Error::GuaranteeViolated { .. }) {
                    violations += 1;
                }
                eprintln!("cell failed: {cell}");
            }
        }
    }
    experiment::write_rows_csv(output(out)?, &rows)?;
    if violations > 0 {
        bail!("{violations} cell(s) violated the accuracy guarantee");
    }
    Ok(())
}

/// Path given with `--config`, found before clap runs so that required
/// flags may come from the file.
fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let a = a.to_string_lossy();
        if a == "--" {
            break;
        }
        if a == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// Expands `--config` into flags placed ahead of the explicit ones.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let path = &path;
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .with_context(|| format!("parsing {}", path.display()))?;
    let mut flags = Vec::new();
    for (key, value) in &table {
        if key == "config" {
            bail!("{}: nested config files are not supported", path.display());
        }
        let flag = format!("--{}", key.replace('_', "-"));
        let rendered = match value {
            toml::Value::Boolean(true) => {
                flags.push(OsString::from(flag));
                continue;
            }
            toml::Value::Boolean(false) => continue,
            toml::Value::String(s) => s.clone(),
            toml::Value::Integer(i) => i.to_string(),
            toml::Value::Float(f) => f.to_string(),
            toml::Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    toml::Value::String(s) => Ok(s.clone()),
                    toml::Value::Integer(i) => Ok(i.to_string()),
                    toml::Value::Float(f) => Ok(f.to_string()),
                    other => bail!(
                        "{}: unsupported list element {other} for {key}",
                        path.display()
                    ),
                })
                .collect::<Result<Vec<_>>>()?
                .join(","),
            other => bail!("{}: unsupported value {other} for {key}", path.display()),
        };
        flags.push(OsString::from(format!("{flag}={rendered}")));
    }
    // insert right after the subcommand name
    let names: Vec<String> = Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_owned())
        .collect();
    let sub = args
        .iter()
        .skip(1)
        .position(|a| names.iter().any(|n| a.to_str() == Some(n)))
        .map(|i| i + 2)
        .unwrap_or(args.len());
    let mut expanded = args[..sub].to_vec();
    expanded.extend(flags);
    expanded.extend_from_slice(&args[sub..]);
    Ok(expanded)
}

fn load_trace(source: &SourceArgs, seed: u64) -> Result<Trace> {
    Ok(source.workload()?.trace(seed)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Rmse(run) => finish(experiment::rmse_run(&run.config()?)?, run.out.as_deref()),
        Command::WindowSweep { run, windows } => {
            let windows: Vec<u64> = parse_list(&windows, "window")?;
            finish(
                experiment::window_sweep(&run.config()?, &windows)?,
                run.out.as_deref(),
            )
        }
        Command::Throughput { run, min_ops } => finish(
            experiment::throughput_run(&run.config()?, min_ops)?,
            run.out.as_deref(),
        ),
        Command::Singles {
            source,
            seed,
            frames,
            denominator,
            out,
        } => {
            let frames: Vec<usize> = match frames {
                Some(f) => parse_list(&f, "frame size")?,
                None => (6..=14).map(|e| 1usize << e).collect(),
            };
            let denominator = match denominator.as_str() {
                "distinct" => SinglesDenominator::Distinct,
                "frame" => SinglesDenominator::FrameLength,
                other => bail!("unknown denominator {other:?}; expected distinct or frame"),
            };
            let trace = load_trace(&source, seed)?;
            let ratios = experiment::singles_sweep(trace.items(), &frames, denominator)?;
            experiment::write_singles_csv(output(out.as_deref())?, &ratios)?;
            Ok(())
        }
        Command::GenZipf {
            universe,
            length,
            alpha,
            seed,
            out,
        } => {
            let ranks = workload::zipf_ranks(universe, length, alpha, seed)?;
            let mut w = output(out.as_deref())?;
            for r in ranks {
                writeln!(w, "{}", workload::zipf_key_name(r))?;
            }
            w.flush()?;
            Ok(())
        }
        Command::GapTable {
            trace,
            format,
            window,
            raw,
            out,
        } => {
            let format: TraceFormat = format.parse()?;
            let trace = workload::read_trace(&trace, format)?;
            let gaps = GapTable::build(trace.items())?;
            let mut w = output(out.as_deref())?;
            if raw {
                for &g in gaps.gaps() {
                    if g == oracles::NO_NEXT {
                        writeln!(w, "inf")?;
                    } else {
                        writeln!(w, "{g}")?;
                    }
                }
            } else {
                if window == 0 {
                    bail!("window must be positive");
                }
                for label in gaps.labels(window) {
                    writeln!(w, "{}", u8::from(label))?;
                }
            }
            w.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let args: Vec<OsString> = std::env::args_os().collect();
    let cli = match expand_config(args) {
        Ok(expanded) => Cli::parse_from(expanded),
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::FAILURE;
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
