//! Staged pipeline over the `reachmac` library.
//!
//! Each stage reads the previous stage's files from the output directory
//! and writes its own; `all` runs the stages in order.

pub mod config;
pub mod error;
pub mod meta;
pub mod stages;

pub use config::{RunConfig, Settings};
pub use error::CliError;
pub use stages::{cmd_all, cmd_calibrate, cmd_collect, cmd_estimate, cmd_predict, cmd_validate};
