//! Configuration, initial data, checkpoints and runners behind the `npns` binary.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod initial;
pub mod run;

pub use config::RunConfig;
pub use error::HarnessError;
