//! One module per subcommand plus shared stage plumbing.

pub mod assign;
pub mod evaluate;
pub mod ingest;
pub mod prompts;
pub mod retrieve;
pub mod simulate;
pub mod sweep;

use std::path::{Path, PathBuf};

use neurolabel_core::corpus::{RunInputs, RunManifest};
use neurolabel_core::retrieval::Fallback;

use crate::{CliError, OutputFormat};

pub struct Context {
    pub out: PathBuf,
    pub format: OutputFormat,
    pub seed_override: Option<u64>,
    pub fallback_override: Option<Fallback>,
}

impl Context {
    /// Loads and validates the manifest with command-line overrides
    /// applied, before any data file is consumed.
    pub fn load_manifest(&self, path: &Path) -> Result<RunManifest, CliError> {
        let mut manifest = RunManifest::load_with_seed(path, self.seed_override)
            .map_err(neurolabel_core::Error::from)?;
        if let Some(fallback) = self.fallback_override {
            manifest.fallback = fallback;
        }
        Ok(manifest)
    }

    pub fn load_inputs(&self, manifest: &RunManifest) -> Result<RunInputs, CliError> {
        manifest
            .load_inputs()
            .map_err(neurolabel_core::Error::from)
            .map_err(CliError::from)
    }
}

/// Reads a JSON stage file produced by an earlier command.
pub fn read_stage_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
