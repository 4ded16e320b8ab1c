//! Batch harness for plan-guided code generation experiments: few-shot
//! prompt assembly, a record/replay completion gateway, sandboxed functional
//! evaluation, and Pass@k / CodeBLEU scoring.

pub mod config;
pub mod dataset;
pub mod error;
pub mod gateway;
pub mod metrics;
pub mod pipeline;
pub mod prompt;
pub mod report;
pub mod sandbox;
pub mod score;

pub use error::{Error, Result};
