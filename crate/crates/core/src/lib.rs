//! Format-faithfulness toolkit.
//!
//! Decidable checkers for ten output-format tasks, format and quality
//! metrics, a refinement loop that feeds checker errors back to a generator,
//! and a small checker-rewarded PPO trainer with an adaptive KL penalty.

pub mod checkers;
pub mod data_io;
pub mod generator;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod refine;
pub mod reff;
