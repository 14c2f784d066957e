//! Window Compact Space-Saving (WCSS).
//!
//! The stream is cut into frames of `W` arrivals, each frame into `k` blocks
//! of `s = W / k` arrivals. A Space-Saving instance with `k` counters counts
//! the current frame and is flushed at every frame start. Whenever an item's
//! frame count reaches a multiple of `s` it "overflows" and its id is pushed
//! onto the queue of the current block. The last `k + 1` block queues are
//! retained; the oldest one is drained one id per arrival so that it is empty
//! by the time it is retired. `overflows[x]` mirrors the number of ids of `x`
//! across all live queues.
//!
//! A query returns `s * (overflows[x] + 2) + (frame_count(x) mod s)`, or
//! `2s + frame_count(x)` for items without live overflows. With
//! `k >= 4 / eps` this never underestimates the frequency over the last `W`
//! arrivals and overestimates it by less than `4s <= eps * W`.

use std::collections::VecDeque;

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::item::ItemKey;
use crate::space_saving::SpaceSaving;

/// Default bytes charged per item identifier by [`WcssSketch::memory_bytes`].
pub const DEFAULT_ID_BYTES: u64 = 8;

/// Fixed bytes charged for the scalar state of a sketch.
pub const FIXED_OVERHEAD_BYTES: u64 = 64;

/// Smallest divisor of `window` that is at least `ceil(4 / eps)`.
pub fn block_count_for(window: u64, eps: f64) -> Result<u64> {
    if window < 4 {
        return Err(Error::invalid(format!(
            "window must be at least 4, got {window}"
        )));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!(
            "epsilon must lie in (0, 1], got {eps}"
        )));
    }
    // 4/eps for eps = 1/2^j is exact; the guard absorbs representation
    // error for values such as 0.05.
    let min_k = (4.0 / eps - 1e-9).ceil().max(1.0);
    if min_k > window as f64 {
        return Err(Error::invalid(format!(
            "no block count k with ceil(4/eps) = {min_k} <= k <= W = {window} divides W"
        )));
    }
    let min_k = min_k as u64;
    (min_k..=window)
        .find(|k| window.is_multiple_of(*k))
        .ok_or_else(|| {
            Error::invalid(format!(
                "no block count k with ceil(4/eps) = {min_k} <= k <= W = {window} divides W"
            ))
        })
}

#[derive(Clone, Debug)]
pub struct WcssSketch {
    window: u64,
    blocks: u64,
    block_size: u64,
    /// Arrivals into the current frame, in `[0, W)`.
    position: u64,
    frame: SpaceSaving,
    overflows: FxHashMap<ItemKey, u32>,
    /// Front is the oldest block, back the current one; always `k + 1` long.
    queues: VecDeque<VecDeque<ItemKey>>,
    queued: u64,
    id_bytes: u64,
}

impl WcssSketch {
    /// Builds a `(W, eps)` sketch with the smallest admissible block count.
    pub fn new(window: u64, eps: f64) -> Result<Self> {
        let blocks = block_count_for(window, eps)?;
        Self::with_blocks(window, blocks)
    }

    /// Builds a sketch with an explicit block count `k`, which must divide
    /// `W`. Its error bound is `4 W / k`.
    pub fn with_blocks(window: u64, blocks: u64) -> Result<Self> {
        if window == 0 || blocks == 0 || blocks > window || !window.is_multiple_of(blocks) {
            return Err(Error::invalid(format!(
                "block count {blocks} must divide window {window}"
            )));
        }
        let frame = SpaceSaving::new(blocks as usize)?;
        let queues = (0..=blocks).map(|_| VecDeque::new()).collect();
        Ok(WcssSketch {
            window,
            blocks,
            block_size: window / blocks,
            position: 0,
            frame,
            overflows: FxHashMap::default(),
            queues,
            queued: 0,
            id_bytes: DEFAULT_ID_BYTES,
        })
    }

    /// Sets the per-identifier size used by memory accounting.
    pub fn with_id_bytes(mut self, id_bytes: u64) -> Self {
        self.id_bytes = id_bytes;
        self
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn block_count(&self) -> u64 {
        self.blocks
    }

    pub fn block_size(&self) -> u64 {
        self.block_size
    }

    /// Position of the next arrival within the current frame.
    pub fn position(&self) -> u64 {
        self.position
    }

    /// Additive error bound `4s` guaranteed by this geometry.
    pub fn error_bound(&self) -> u64 {
        4 * self.block_size
    }

    pub fn update(&mut self, item: ItemKey) {
        self.advance_frame();
        let count = self.frame.insert(item);
        if count.is_multiple_of(self.block_size) {
            self.queues
                .back_mut()
                .expect("k + 1 queues")
                .push_back(item);
            *self.overflows.entry(item).or_insert(0) += 1;
            self.queued += 1;
        }
        self.finish_arrival();
    }

    /// Advances the window by one arrival that is not counted.
    ///
    /// Frame flushes, block rotation and aging proceed exactly as in
    /// [`update`](Self::update), so the frame grid stays aligned with the
    /// underlying stream.
    pub fn tick(&mut self) {
        self.advance_frame();
        self.finish_arrival();
    }

    pub fn query(&self, item: ItemKey) -> u64 {
        let s = self.block_size;
        let count = self.frame.query(item);
        match self.overflows.get(&item) {
            Some(&b) => s * (b as u64 + 2) + count % s,
            None => 2 * s + count,
        }
    }

    /// Live overflow records of `item`.
    pub fn overflow_count(&self, item: ItemKey) -> u64 {
        self.overflows.get(&item).copied().unwrap_or(0) as u64
    }

    /// Model-based footprint: `k` counters, one id per queued overflow
    /// record, one (id, count) per overflow-map entry, and a fixed overhead.
    pub fn memory_bytes(&self) -> u64 {
        let id = self.id_bytes;
        self.blocks * (id + 8)
            + self.queued * id
            + self.overflows.len() as u64 * (id + 8)
            + FIXED_OVERHEAD_BYTES
    }

    /// Overflow records currently held across all queues.
    pub fn queued_records(&self) -> u64 {
        self.queued
    }

    pub fn queue_lengths(&self) -> impl Iterator<Item = usize> + '_ {
        self.queues.iter().map(VecDeque::len)
    }

    #[cfg(test)]
    fn frame_counter(&self) -> &SpaceSaving {
        &self.frame
    }

    /// Frame flush, block rotation and one step of aging.
    fn advance_frame(&mut self) {
        if self.position == 0 {
            self.frame.flush();
        }
        if self.position.is_multiple_of(self.block_size) {
            let mut retired = self.queues.pop_front().expect("k + 1 queues");
            debug_assert!(retired.is_empty(), "queue retired before it was drained");
            retired.clear();
            self.queues.push_back(retired);
        }
        if let Some(old) = self.queues.front_mut().and_then(VecDeque::pop_front) {
            self.queued -= 1;
            match self.overflows.get_mut(&old) {
                Some(n) if *n > 1 => *n -= 1,
                _ => {
                    self.overflows.remove(&old);
                }
            }
        }
    }

    fn finish_arrival(&mut self) {
        self.position += 1;
        if self.position == self.window {
            self.position = 0;
        }
    }

    /// Checks that the overflow map is the census of the queues.
    #[doc(hidden)]
    pub fn check_structure(&self) -> std::result::Result<(), String> {
        if self.queues.len() as u64 != self.blocks + 1 {
            return Err(format!(
                "{} queues, expected {}",
                self.queues.len(),
                self.blocks + 1
            ));
        }
        let mut census: FxHashMap<ItemKey, u32> = FxHashMap::default();
        let mut total = 0u64;
        for q in &self.queues {
            if q.len() as u64 > self.block_size {
                return Err(format!(
                    "queue of length {} exceeds s = {}",
                    q.len(),
                    self.block_size
                ));
            }
            for &x in q {
                *census.entry(x).or_insert(0) += 1;
                total += 1;
            }
        }
        if census != self.overflows {
            return Err("overflow map differs from queue census".into());
        }
        if total != self.queued {
            return Err(format!(
                "queued counter {} but {} records",
                self.queued, total
            ));
        }
        Ok(())
    }
}
