//! Output-directory plumbing: canonical JSON files, CSV tables, the run
//! summary and the stage-timing sidecar.
//!
//! Every file except `timings.json` is byte-reproducible for identical
//! inputs; timings are wall-clock and live in their own file so golden
//! comparisons can skip them.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use neurolabel_core::canonical::{fmt_float, to_canonical_json};

use crate::CliError;

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::Data(format!("{}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let text = to_canonical_json(value).map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        std::fs::write(self.path(name), text)
            .map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        Ok(())
    }

    pub fn write_csv(
        &self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), CliError> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(self.path(name))
            .map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        writer
            .write_record(header)
            .map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        for row in rows {
            writer
                .write_record(row)
                .map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        }
        writer
            .flush()
            .map_err(|e| CliError::Data(format!("{name}: {e}")))?;
        Ok(())
    }
}

/// CSV cell for an optional float; absent values stay empty.
pub fn cell_opt(value: Option<f64>) -> String {
    value.map(fmt_float).unwrap_or_default()
}

pub fn cell(value: f64) -> String {
    fmt_float(value)
}

/// Deterministic run summary written by every command.
#[derive(Serialize)]
pub struct RunSummary<T: Serialize> {
    pub command: &'static str,
    pub engine_version: &'static str,
    pub seed: Option<u64>,
    pub details: T,
}

impl<T: Serialize> RunSummary<T> {
    pub fn new(command: &'static str, seed: Option<u64>, details: T) -> Self {
        Self {
            command,
            engine_version: env!("CARGO_PKG_VERSION"),
            seed,
            details,
        }
    }
}

/// Wall-clock stage timings; the single non-reproducible output.
pub struct Timings {
    stages: Vec<(String, f64)>,
    current: Option<(String, Instant)>,
}

impl Timings {
    pub fn new() -> Self {
        Self {
            stages: Vec::new(),
            current: None,
        }
    }

    pub fn start(&mut self, stage: &str) {
        self.finish();
        self.current = Some((stage.to_string(), Instant::now()));
    }

    fn finish(&mut self) {
        if let Some((stage, at)) = self.current.take() {
            self.stages.push((stage, at.elapsed().as_secs_f64()));
        }
    }

    pub fn write(mut self, out: &OutDir, command: &str) -> Result<(), CliError> {
        self.finish();
        #[derive(Serialize)]
        struct Stage {
            stage: String,
            seconds: f64,
        }
        let stages: Vec<Stage> = self
            .stages
            .into_iter()
            .map(|(stage, seconds)| Stage { stage, seconds })
            .collect();
        out.write_json(&format!("timings_{command}.json"), &stages)
    }
}
