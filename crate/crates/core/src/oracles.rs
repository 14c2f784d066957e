//! Next-arrival predictors.
//!
//! Position-indexed oracles are precomputed over a whole trace: the ground
//! truth from the gap table, a Gaussian-noise variant of it, and predictions
//! loaded from a file. [`FlipOracle`] and [`ConstantOracle`] provide
//! controlled accuracy and adversarial behaviour.
//!
//! Prediction files are UTF-8 text with one ASCII `0` or `1` per line, LF
//! terminated, one line per trace position.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::item::ItemKey;
use crate::lwcss::NextArrivalPredictor;

/// Gap recorded for positions whose item never occurs again.
pub const NO_NEXT: u64 = u64::MAX;

/// Distance from each position to the next occurrence of the same item.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GapTable {
    gaps: Vec<u64>,
}

impl GapTable {
    /// Single backward scan over the trace.
    pub fn build(trace: &[ItemKey]) -> Result<Self> {
        if trace.is_empty() {
            return Err(Error::EmptyTrace);
        }
        let mut next_seen: FxHashMap<ItemKey, usize> = FxHashMap::default();
        let mut gaps = vec![NO_NEXT; trace.len()];
        for (t, &x) in trace.iter().enumerate().rev() {
            if let Some(next) = next_seen.insert(x, t) {
                gaps[t] = (next - t) as u64;
            }
        }
        Ok(GapTable { gaps })
    }

    pub fn gaps(&self) -> &[u64] {
        &self.gaps
    }

    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    /// `gap <= window` per position.
    pub fn labels(&self, window: u64) -> Vec<bool> {
        self.gaps.iter().map(|&g| g <= window).collect()
    }
}

/// Predictions fixed in advance for every trace position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PositionalOracle {
    bits: Vec<bool>,
}

impl PositionalOracle {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        PositionalOracle { bits }
    }

    /// Ground truth: the next occurrence is at most `window` arrivals away.
    pub fn perfect(gaps: &GapTable, window: u64) -> Self {
        PositionalOracle {
            bits: gaps.labels(window),
        }
    }

    /// Thresholds the true gap after adding `N(0, sigma^2)` noise, drawn
    /// once per position from a generator seeded with `seed`.
    pub fn gaussian(gaps: &GapTable, window: u64, sigma: f64, seed: u64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::invalid(format!(
                "sigma must be non-negative, got {sigma}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits = gaps
            .gaps()
            .iter()
            .map(|&g| {
                let z: f64 = rng.sample(StandardNormal);
                g != NO_NEXT && g as f64 + sigma * z <= window as f64
            })
            .collect();
        Ok(PositionalOracle { bits })
    }

    /// Loads a prediction file that must hold exactly `expected_len` lines.
    pub fn from_file(path: impl AsRef<Path>, expected_len: usize) -> Result<Self> {
        let path = path.as_ref();
        let data = fs::read(path).map_err(|e| Error::io(path, e))?;
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_owned(),
            line: line as u64,
            message,
        };
        let body = data.strip_suffix(b"\n").unwrap_or(&data);
        let mut bits = Vec::with_capacity(expected_len);
        if !data.is_empty() {
            for (i, line) in body.split(|&b| b == b'\n').enumerate() {
                bits.push(match line {
                    b"1" => true,
                    b"0" => false,
                    other => {
                        return Err(parse_err(
                            i + 1,
                            format!(
                                "expected 0 or 1, found {:?}",
                                String::from_utf8_lossy(other)
                            ),
                        ))
                    }
                });
            }
        }
        if bits.len() != expected_len {
            return Err(parse_err(
                bits.len(),
                format!("expected {expected_len} predictions, found {}", bits.len()),
            ));
        }
        Ok(PositionalOracle { bits })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn try_predict(&self, position: u64) -> Result<bool> {
        self.bits
            .get(position as usize)
            .copied()
            .ok_or(Error::PositionOutOfRange {
                position,
                len: self.bits.len() as u64,
            })
    }
}

impl NextArrivalPredictor for PositionalOracle {
    /// # Panics
    ///
    /// If `position` lies beyond the trace the oracle was built for.
    fn predict_within_window(&self, _item: ItemKey, position: u64) -> bool {
        match self.try_predict(position) {
            Ok(b) => b,
            Err(e) => panic!("oracle contract violation: {e}"),
        }
    }
}

/// Inverts each prediction of `base` independently with probability `p`.
#[derive(Clone, Debug)]
pub struct FlipOracle<P> {
    base: P,
    p: f64,
    seed: u64,
}

impl<P: NextArrivalPredictor> FlipOracle<P> {
    pub fn new(base: P, p: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid(format!(
                "flip probability must lie in [0, 1], got {p}"
            )));
        }
        Ok(FlipOracle { base, p, seed })
    }

    /// Whether the prediction at `position` is inverted; a pure function of
    /// `(seed, position)`.
    pub fn flips(&self, position: u64) -> bool {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(position);
        rng.random::<f64>() < self.p
    }
}

impl<P: NextArrivalPredictor> NextArrivalPredictor for FlipOracle<P> {
    fn predict_within_window(&self, item: ItemKey, position: u64) -> bool {
        self.base.predict_within_window(item, position) ^ self.flips(position)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstantOracle(bool);

impl ConstantOracle {
    pub fn new(value: bool) -> Self {
        ConstantOracle(value)
    }
}

impl NextArrivalPredictor for ConstantOracle {
    fn predict_within_window(&self, _item: ItemKey, _position: u64) -> bool {
        self.0
    }
}

/// Evaluates `predictor` at every position of `trace`.
pub fn predictions<P: NextArrivalPredictor + ?Sized>(
    predictor: &P,
    trace: &[ItemKey],
) -> Vec<bool> {
    trace
        .iter()
        .enumerate()
        .map(|(t, &x)| predictor.predict_within_window(x, t as u64))
        .collect()
}

pub fn write_prediction_file(path: impl AsRef<Path>, bits: &[bool]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for &b in bits {
        out.write_all(if b { b"1\n" } else { b"0\n" })
            .map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Binary classification quality on the "recurs within W" class.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionQuality {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub positives: u64,
    pub total: u64,
}

impl PredictionQuality {
    pub fn evaluate(predictions: &[bool], labels: &[bool]) -> Result<Self> {
        if predictions.len() != labels.len() {
            return Err(Error::invalid(format!(
                "{} predictions for {} labels",
                predictions.len(),
                labels.len()
            )));
        }
        let (mut tp, mut fp, mut fneg) = (0u64, 0u64, 0u64);
        for (&p, &l) in predictions.iter().zip(labels) {
            match (p, l) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => {}
            }
        }
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fneg);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Ok(PredictionQuality {
            precision,
            recall,
            f1,
            positives: tp + fneg,
            total: labels.len() as u64,
        })
    }
}
