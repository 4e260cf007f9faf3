//! `prompts`: write one VLM-ready prompt pack per neuron.

use std::path::Path;

use serde::Serialize;

use neurolabel_core::prompts::{export_prompt, PromptMode};
use neurolabel_core::retrieval::EvidenceBatch;

use crate::output::{OutDir, RunSummary, Timings};
use crate::{CliError, PromptModeArg, RunOutcome};

use super::{read_stage_json, Context};

#[derive(Serialize)]
struct Failure {
    neuron_id: usize,
    error: String,
}

#[derive(Serialize)]
struct Details {
    manifest: neurolabel_core::corpus::RunManifest,
    mode: &'static str,
    exported: usize,
    failures: Vec<Failure>,
}

pub fn run(
    ctx: &Context,
    manifest_path: &Path,
    evidence_path: &Path,
    mode: PromptModeArg,
    rows: usize,
    cols: usize,
) -> Result<RunOutcome, CliError> {
    let mut timings = Timings::new();
    timings.start("load");
    let manifest = ctx.load_manifest(manifest_path)?;
    let evidence: EvidenceBatch = read_stage_json(evidence_path)?;
    let mode_enum = match mode {
        PromptModeArg::Positive => PromptMode::Positive,
        PromptModeArg::Contrastive => PromptMode::Contrastive,
    };

    timings.start("export");
    let out = OutDir::create(&ctx.out)?;
    let pack_dir = ctx.out.join("prompts");
    std::fs::create_dir_all(&pack_dir)
        .map_err(|e| CliError::Data(format!("{}: {e}", pack_dir.display())))?;
    let mut exported = 0usize;
    let mut failures = Vec::new();
    for e in &evidence.evidence {
        match export_prompt(e, mode_enum, rows, cols) {
            Ok(pack) => {
                let name = format!("prompts/neuron_{:06}.json", e.neuron_id);
                out.write_json(&name, &pack)?;
                exported += 1;
            }
            Err(err) => failures.push(Failure {
                neuron_id: e.neuron_id,
                error: err.to_string(),
            }),
        }
    }

    timings.start("write");
    let partial = !failures.is_empty() || !evidence.failures.is_empty();
    let details = Details {
        mode: match mode_enum {
            PromptMode::Positive => "positive",
            PromptMode::Contrastive => "contrastive",
        },
        exported,
        failures,
        manifest,
    };
    out.write_json(
        "run_prompts.json",
        &RunSummary::new("prompts", details.manifest.seed, &details),
    )?;
    timings.write(&out, "prompts")?;
    Ok(if partial {
        RunOutcome::Partial
    } else {
        RunOutcome::Clean
    })
}
