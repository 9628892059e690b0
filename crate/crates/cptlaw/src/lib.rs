//! File formats and the `cptlaw` command line for [`cptlaw_core`].
//!
//! Run logs are JSON lines ([`runlog`]); fitted laws and reports are
//! schema-versioned JSON documents ([`docs`]); plot data is CSV
//! ([`tables`]). Every file is written atomically.

mod cli;
pub mod docs;
pub mod error;
pub mod output;
pub mod runlog;
pub mod tables;

pub use cli::run;
pub use error::{CliError, Result};
