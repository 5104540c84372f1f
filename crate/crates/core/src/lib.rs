//! Synthetic complex-event dataset toolkit for multimodal activity streams.
//!
//! Atomic events arrive once per five-second window; rule machines turn
//! them into online complex-event labels.

pub mod dataset;
pub mod fsm;
pub mod labeler;
pub mod metrics;
pub mod model;
pub mod rules;
pub mod simulator;

pub use model::*;
