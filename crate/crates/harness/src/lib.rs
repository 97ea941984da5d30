//! Seeded, reproducible experiments on top of `ddmodem`, with CSV reports and
//! run manifests.

pub mod codec;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;

pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{HarnessError, HarnessResult};
pub use experiments::run;
pub use report::ResultTable;
