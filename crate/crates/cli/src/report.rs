//! Artifact output: a per-run directory holding CSV tables, JSON reports,
//! and a timestamped log.
//!
//! Every artifact except `run.log` is a pure function of the resolved
//! configuration, so rerunning a command with the same inputs reproduces
//! every byte.  `run.log` carries wall-clock timestamps and is the only file
//! expected to differ between identical reruns.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use scorelab::reconstruct::GridDensity;

use crate::CliError;

/// Handle on an output directory plus its open run log.
pub struct Workspace {
    dir: PathBuf,
    log: File,
}

impl Workspace {
    /// Create (or reuse) the directory and truncate `run.log`.
    pub fn create(dir: &Path) -> Result<Workspace, CliError> {
        fs::create_dir_all(dir).map_err(|e| {
            CliError::Runtime(format!("cannot create {}: {e}", dir.display()))
        })?;
        let log_path = dir.join("run.log");
        let log = File::create(&log_path).map_err(|e| {
            CliError::Runtime(format!("cannot create {}: {e}", log_path.display()))
        })?;
        Ok(Workspace {
            dir: dir.to_path_buf(),
            log,
        })
    }

    /// Append a timestamped line to `run.log`.
    pub fn log(&mut self, message: &str) -> Result<(), CliError> {
        let millis = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        writeln!(self.log, "{millis} {message}")
            .map_err(|e| CliError::Runtime(format!("cannot write run.log: {e}")))
    }

    /// Write a text artifact and record it in the log.
    pub fn write_text(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|e| {
            CliError::Runtime(format!("cannot write {}: {e}", path.display()))
        })?;
        self.log(&format!("wrote {name}"))
    }

    /// Write a pretty-printed JSON artifact and record it in the log.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Runtime(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Write a gridded density as CSV and record it in the log.
    pub fn write_grid(&mut self, name: &str, grid: &GridDensity) -> Result<(), CliError> {
        let mut buf = Vec::new();
        grid.write_csv(&mut buf)
            .map_err(|e| CliError::Runtime(format!("cannot render {name}: {e}")))?;
        let text = String::from_utf8(buf)
            .map_err(|e| CliError::Runtime(format!("non-UTF8 CSV for {name}: {e}")))?;
        self.write_text(name, &text)
    }
}

/// Full-precision float formatting for CSV cells, stable across runs.
pub fn csv_float(v: f64) -> String {
    format!("{v:.16e}")
}
