//! Run-log files: one JSON record per line.
//!
//! ```text
//! {"run_id":"s-1b","strategy":"scratch","language":"de","replay_ratio":0.0,"param_count":1000000000,"tokens":20000000,"loss":3.1}
//! ```
//!
//! An optional `val_language` tags the validation set a loss was measured
//! on. Blank lines are ignored; records of a run may appear in any order.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use cptlaw_core::run::{RunRow, RunSetBuilder};
use cptlaw_core::RunSet;

use crate::error::{CliError, Result};
use crate::output::write_atomic;

/// Parses a run log. `source` names the input in error messages.
pub fn parse_runs<R: BufRead>(reader: R, source: &str) -> Result<RunSet> {
    let mut builder = RunSetBuilder::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CliError::io(source, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let at = |message: String| CliError::Line { path: source.to_string(), line: i + 1, message };
        let row: RunRow = serde_json::from_str(&line).map_err(|e| at(e.to_string()))?;
        builder.push(row).map_err(|e| at(e.to_string()))?;
    }
    Ok(builder.finish()?)
}

pub fn write_runs<W: Write + ?Sized>(w: &mut W, runs: &RunSet) -> std::io::Result<()> {
    for row in runs.to_rows() {
        serde_json::to_writer(&mut *w, &row)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_runs_file(path: &Path) -> Result<RunSet> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    parse_runs(BufReader::new(file), &path.display().to_string())
}

pub fn write_runs_file(path: &Path, runs: &RunSet) -> Result<()> {
    write_atomic(path, |w| write_runs(w, runs).map_err(|e| CliError::io(path, e)))
}
