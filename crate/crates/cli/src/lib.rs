//! Experiment harness behind the `rlsa` binary: JSON configuration with
//! flag overrides, single and multi-seed runs, CSV/JSON outputs, rate
//! reports, and the invariant suite.

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod validate;

pub use config::{ExperimentConfig, Overrides};
pub use error::{HarnessError, HarnessResult};
