//! `retrieve`: positive/contrastive evidence for every neuron.

use std::path::Path;

use serde::Serialize;

use neurolabel_core::retrieval::build_evidence;

use crate::output::{OutDir, RunSummary, Timings};
use crate::{CliError, RunOutcome};

use super::Context;

#[derive(Serialize)]
struct Details {
    manifest: neurolabel_core::corpus::RunManifest,
    neurons: usize,
    evidence: usize,
    failures: usize,
}

pub fn run(ctx: &Context, manifest_path: &Path) -> Result<RunOutcome, CliError> {
    let mut timings = Timings::new();
    timings.start("load");
    let manifest = ctx.load_manifest(manifest_path)?;
    let inputs = ctx.load_inputs(&manifest)?;

    timings.start("retrieve");
    let batch = build_evidence(
        &inputs.activations,
        &inputs.embeddings,
        manifest.k,
        manifest.fallback,
    )
    .map_err(neurolabel_core::Error::from)?;

    timings.start("write");
    let out = OutDir::create(&ctx.out)?;
    out.write_json("evidence.json", &batch)?;
    let partial = !batch.failures.is_empty();
    let details = Details {
        neurons: inputs.activations.neurons(),
        evidence: batch.evidence.len(),
        failures: batch.failures.len(),
        manifest,
    };
    out.write_json(
        "run_retrieve.json",
        &RunSummary::new("retrieve", details.manifest.seed, &details),
    )?;
    timings.write(&out, "retrieve")?;
    Ok(if partial {
        RunOutcome::Partial
    } else {
        RunOutcome::Clean
    })
}
