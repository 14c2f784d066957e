//! Stream sources and ground truth: Zipf traces, trace files, the exact
//! sliding-window counter, and the per-frame singles ratio.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::item::ItemKey;

/// Separator joining the two endpoints of a `pairs` trace row.
pub const PAIR_SEPARATOR: &str = "→";

/// A materialized, nonempty stream of item keys.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    items: Vec<ItemKey>,
}

impl Trace {
    pub fn new(items: Vec<ItemKey>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::EmptyTrace);
        }
        Ok(Trace { items })
    }

    pub fn items(&self) -> &[ItemKey] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Repeats the trace until it holds at least `min_len` arrivals.
    pub fn cycled(&self, min_len: usize) -> Trace {
        let reps = min_len.div_ceil(self.items.len()).max(1);
        let items = self
            .items
            .iter()
            .copied()
            .cycle()
            .take(reps * self.items.len())
            .collect();
        Trace { items }
    }
}

impl AsRef<[ItemKey]> for Trace {
    fn as_ref(&self) -> &[ItemKey] {
        &self.items
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceFormat {
    /// One item key per nonempty line.
    Lines,
    /// Two CSV columns `src,dst`; the key is `src→dst`.
    Pairs,
}

impl FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lines" => Ok(TraceFormat::Lines),
            "pairs" => Ok(TraceFormat::Pairs),
            other => Err(Error::invalid(format!(
                "unknown trace format {other:?} (expected lines or pairs)"
            ))),
        }
    }
}

pub fn read_trace(path: impl AsRef<Path>, format: TraceFormat) -> Result<Trace> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let items = match format {
        TraceFormat::Lines => read_lines(path, BufReader::new(file))?,
        TraceFormat::Pairs => read_pairs(path, file)?,
    };
    Trace::new(items)
}

fn read_lines(path: &Path, reader: impl BufRead) -> Result<Vec<ItemKey>> {
    let mut items = Vec::new();
    for line in reader.split(b'\n') {
        let mut line = line.map_err(|e| Error::io(path, e))?;
        if line.last() == Some(&b'\r') {
            line.pop();
        }
        if !line.is_empty() {
            items.push(ItemKey::from_bytes(&line));
        }
    }
    Ok(items)
}

fn read_pairs(path: &Path, file: File) -> Result<Vec<ItemKey>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(file);
    let mut items = Vec::new();
    let mut key = Vec::new();
    for record in reader.byte_records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(Error::Parse {
                path: path.to_owned(),
                line,
                message: format!("expected 2 columns src,dst, found {}", record.len()),
            });
        }
        key.clear();
        key.extend_from_slice(&record[0]);
        key.extend_from_slice(PAIR_SEPARATOR.as_bytes());
        key.extend_from_slice(&record[1]);
        items.push(ItemKey::from_bytes(&key));
    }
    Ok(items)
}

/// Inverse-CDF sampler for Zipf(alpha) over ranks `1..=universe`.
#[derive(Clone, Debug)]
pub struct Zipf {
    cdf: Vec<f64>,
}

impl Zipf {
    pub fn new(universe: u64, alpha: f64) -> Result<Self> {
        if universe == 0 {
            return Err(Error::invalid("zipf universe must be at least 1"));
        }
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::invalid(format!(
                "zipf alpha must be positive, got {alpha}"
            )));
        }
        let mut cdf = Vec::with_capacity(universe as usize);
        let mut acc = 0.0;
        for rank in 1..=universe {
            acc += (rank as f64).powf(-alpha);
            cdf.push(acc);
        }
        for p in &mut cdf {
            *p /= acc;
        }
        Ok(Zipf { cdf })
    }

    pub fn universe(&self) -> u64 {
        self.cdf.len() as u64
    }

    /// Draws a rank in `1..=universe`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = rng.random();
        let idx = self.cdf.partition_point(|&c| c <= u);
        idx.min(self.cdf.len() - 1) as u64 + 1
    }
}

/// Key used for Zipf rank `rank` in generated traces.
pub fn zipf_key_name(rank: u64) -> String {
    format!("item{rank}")
}

/// `length` i.i.d. Zipf ranks, deterministic per seed.
pub fn zipf_ranks(universe: u64, length: usize, alpha: f64, seed: u64) -> Result<Vec<u64>> {
    if length == 0 {
        return Err(Error::invalid("trace length must be at least 1"));
    }
    let zipf = Zipf::new(universe, alpha)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..length).map(|_| zipf.sample(&mut rng)).collect())
}

/// A Zipf trace with keys `item<R>`.
pub fn gen_zipf(universe: u64, length: usize, alpha: f64, seed: u64) -> Result<Trace> {
    let ranks = zipf_ranks(universe, length, alpha, seed)?;
    let keys: Vec<ItemKey> = (1..=universe)
        .map(|r| ItemKey::from(zipf_key_name(r).as_str()))
        .collect();
    Trace::new(ranks.into_iter().map(|r| keys[r as usize - 1]).collect())
}

/// Exact frequencies over the last `W` arrivals.
#[derive(Clone, Debug)]
pub struct ExactWindowCounter {
    window: usize,
    recent: VecDeque<ItemKey>,
    counts: FxHashMap<ItemKey, u64>,
}

impl ExactWindowCounter {
    pub fn new(window: u64) -> Self {
        assert!(window > 0, "window must be positive");
        ExactWindowCounter {
            window: window as usize,
            recent: VecDeque::with_capacity(window as usize),
            counts: FxHashMap::default(),
        }
    }

    pub fn update(&mut self, item: ItemKey) {
        if self.recent.len() == self.window {
            let old = self.recent.pop_front().expect("window is full");
            match self.counts.get_mut(&old) {
                Some(c) if *c > 1 => *c -= 1,
                _ => {
                    self.counts.remove(&old);
                }
            }
        }
        self.recent.push_back(item);
        *self.counts.entry(item).or_insert(0) += 1;
    }

    pub fn query(&self, item: ItemKey) -> u64 {
        self.counts.get(&item).copied().unwrap_or(0)
    }

    /// Arrivals currently inside the window.
    pub fn len(&self) -> usize {
        self.recent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recent.is_empty()
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }
}

/// Denominator of the per-frame singles ratio.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SinglesDenominator {
    /// Singles over distinct items in the frame.
    #[default]
    Distinct,
    /// Singles over frame length.
    FrameLength,
}

/// Mean over disjoint frames of `F` arrivals of the fraction of items that
/// occur exactly once in their frame. A trailing partial frame is ignored.
pub fn singles_ratio(
    trace: &[ItemKey],
    frame: usize,
    denominator: SinglesDenominator,
) -> Result<f64> {
    if frame == 0 {
        return Err(Error::invalid("frame size must be at least 1"));
    }
    if frame > trace.len() {
        return Err(Error::invalid(format!(
            "frame size {frame} exceeds trace length {}",
            trace.len()
        )));
    }
    let mut counts: FxHashMap<ItemKey, u32> = FxHashMap::default();
    let mut total = 0.0;
    let mut frames = 0usize;
    for chunk in trace.chunks_exact(frame) {
        counts.clear();
        for &x in chunk {
            *counts.entry(x).or_insert(0) += 1;
        }
        let singles = counts.values().filter(|&&c| c == 1).count() as f64;
        total += match denominator {
            SinglesDenominator::Distinct => singles / counts.len() as f64,
            SinglesDenominator::FrameLength => singles / frame as f64,
        };
        frames += 1;
    }
    Ok(total / frames as f64)
}
