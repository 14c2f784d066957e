//! Sliding-window frequency estimation.
//!
//! [`WcssSketch`] answers point queries over the last `W` arrivals of a
//! stream with additive error at most `eps * W` and never underestimates.
//! [`LwcssSketch`] wraps it with a next-arrival predictor that keeps items
//! not recurring within the window out of the sketch, while preserving the
//! same guarantee for any predictor.
//!
//! The [`experiment`] module drives both sketches over Zipf or file traces
//! and reports RMSE, memory and throughput.

pub mod bloom;
pub mod error;
pub mod experiment;
pub mod item;
pub mod lwcss;
pub mod oracles;
pub mod par;
pub mod space_saving;
pub mod wcss;
pub mod workload;

pub use bloom::BloomFilter;
pub use error::{Error, Result};
pub use item::ItemKey;
pub use lwcss::{Admission, LwcssSketch, NextArrivalPredictor};
pub use oracles::{ConstantOracle, FlipOracle, GapTable, PositionalOracle, PredictionQuality};
pub use par::Execution;
pub use space_saving::SpaceSaving;
pub use wcss::WcssSketch;
pub use workload::{ExactWindowCounter, Trace, TraceFormat};
