//! Learning-augmented WCSS.
//!
//! Arrivals whose next occurrence is predicted to fall beyond the window are
//! kept out of the inner sketch. A per-frame Bloom filter remembers which
//! items were skipped, so an item loses at most one arrival per frame (two
//! per window, which spans at most two frames). The inner sketch runs at
//! `eps - 2/W` and every query adds 2 back, which restores the `(W, eps)`
//! guarantee regardless of how bad the predictions are.

use std::sync::Arc;

use crate::bloom::BloomFilter;
use crate::error::{Error, Result};
use crate::item::ItemKey;
use crate::wcss::WcssSketch;

/// Default Bloom filter bits per inner block.
pub const DEFAULT_BLOOM_BITS_PER_BLOCK: u64 = 8;
pub const DEFAULT_BLOOM_HASHES: u32 = 3;

/// Binary next-arrival oracle.
///
/// `true` means the item arriving at global `position` occurs again within
/// the next `W` arrivals. Answers must be deterministic per position.
pub trait NextArrivalPredictor {
    fn predict_within_window(&self, item: ItemKey, position: u64) -> bool;
}

impl<P: NextArrivalPredictor + ?Sized> NextArrivalPredictor for &P {
    fn predict_within_window(&self, item: ItemKey, position: u64) -> bool {
        (**self).predict_within_window(item, position)
    }
}

impl<P: NextArrivalPredictor + ?Sized> NextArrivalPredictor for Box<P> {
    fn predict_within_window(&self, item: ItemKey, position: u64) -> bool {
        (**self).predict_within_window(item, position)
    }
}

impl<P: NextArrivalPredictor + ?Sized> NextArrivalPredictor for Arc<P> {
    fn predict_within_window(&self, item: ItemKey, position: u64) -> bool {
        (**self).predict_within_window(item, position)
    }
}

/// What [`LwcssSketch::update`] did with an arrival.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Admission {
    /// Predicted to recur within the window; counted.
    Predicted,
    /// Predicted not to recur, but already skipped this frame; counted.
    Readmitted,
    /// Predicted not to recur and first of its kind this frame; not counted.
    Skipped,
}

impl Admission {
    pub fn forwarded(self) -> bool {
        !matches!(self, Admission::Skipped)
    }
}

#[derive(Clone, Debug)]
pub struct LwcssSketch<P> {
    inner: WcssSketch,
    predictor: P,
    bloom: BloomFilter,
    window: u64,
    eps: f64,
    position: u64,
    skipped: u64,
    readmitted: u64,
}

impl<P: NextArrivalPredictor> LwcssSketch<P> {
    /// Builds a `(W, eps)` sketch with a Bloom filter of 8 bits per inner
    /// block and 3 hash functions.
    pub fn new(window: u64, eps: f64, predictor: P) -> Result<Self> {
        let inner_eps = Self::inner_eps(window, eps)?;
        let inner = WcssSketch::new(window, inner_eps)?;
        let bits = DEFAULT_BLOOM_BITS_PER_BLOCK * inner.block_count();
        Self::assemble(inner, window, eps, predictor, bits, DEFAULT_BLOOM_HASHES)
    }

    pub fn with_bloom(
        window: u64,
        eps: f64,
        predictor: P,
        bloom_bits: u64,
        bloom_hashes: u32,
    ) -> Result<Self> {
        let inner_eps = Self::inner_eps(window, eps)?;
        let inner = WcssSketch::new(window, inner_eps)?;
        Self::assemble(inner, window, eps, predictor, bloom_bits, bloom_hashes)
    }

    fn inner_eps(window: u64, eps: f64) -> Result<f64> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::invalid(format!(
                "epsilon must lie in (0, 1], got {eps}"
            )));
        }
        if window == 0 || eps <= 2.0 / window as f64 {
            return Err(Error::invalid(format!(
                "epsilon must exceed 2/W (eps = {eps}, W = {window})"
            )));
        }
        Ok(eps - 2.0 / window as f64)
    }

    fn assemble(
        inner: WcssSketch,
        window: u64,
        eps: f64,
        predictor: P,
        bloom_bits: u64,
        bloom_hashes: u32,
    ) -> Result<Self> {
        Ok(LwcssSketch {
            inner,
            predictor,
            bloom: BloomFilter::new(bloom_bits, bloom_hashes)?,
            window,
            eps,
            position: 0,
            skipped: 0,
            readmitted: 0,
        })
    }

    /// Sets the per-identifier size used by memory accounting.
    pub fn with_id_bytes(mut self, id_bytes: u64) -> Self {
        self.inner = self.inner.with_id_bytes(id_bytes);
        self
    }

    pub fn update(&mut self, item: ItemKey) -> Admission {
        if self.position.is_multiple_of(self.window) {
            self.bloom.flush();
        }
        let admission = if self.predictor.predict_within_window(item, self.position) {
            Admission::Predicted
        } else if self.bloom.contains(item) {
            Admission::Readmitted
        } else {
            self.bloom.add(item);
            Admission::Skipped
        };
        match admission {
            Admission::Skipped => {
                self.skipped += 1;
                self.inner.tick();
            }
            Admission::Readmitted => {
                self.readmitted += 1;
                self.inner.update(item);
            }
            Admission::Predicted => self.inner.update(item),
        }
        self.position += 1;
        admission
    }

    pub fn query(&self, item: ItemKey) -> u64 {
        self.inner.query(item) + 2
    }

    /// Inner sketch footprint plus the Bloom filter bits.
    pub fn memory_bytes(&self) -> u64 {
        self.inner.memory_bytes() + self.bloom.memory_bytes()
    }

    pub fn inner(&self) -> &WcssSketch {
        &self.inner
    }

    pub fn predictor(&self) -> &P {
        &self.predictor
    }

    pub fn bloom(&self) -> &BloomFilter {
        &self.bloom
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Global index of the next arrival.
    pub fn position(&self) -> u64 {
        self.position
    }

    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn readmitted(&self) -> u64 {
        self.readmitted
    }
}
