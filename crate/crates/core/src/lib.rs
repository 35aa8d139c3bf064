//! Industrial video anomaly QA toolkit: response grammar, verifiable rewards,
//! benchmark scoring, visibility interval derivation and a review service.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod grammar;
pub mod interval;
pub mod jsonl;
pub mod review;
pub mod reward;
pub mod scorer;
pub mod synthetic;
pub mod taxonomy;
pub mod visibility;

pub use error::{Error, Result};
pub use interval::{Interval, IntervalSet};
