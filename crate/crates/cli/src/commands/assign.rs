//! `assign`: label every (neuron, pipeline, gamma) cell from retrieved
//! evidence.

use std::path::Path;

use serde::Serialize;

use neurolabel_core::projection::{assign_all, LabelAssignment};
use neurolabel_core::retrieval::EvidenceBatch;

use crate::output::{cell, cell_opt, OutDir, RunSummary, Timings};
use crate::{CliError, RunOutcome};

use super::{read_stage_json, Context};

#[derive(Serialize)]
struct Details {
    manifest: neurolabel_core::corpus::RunManifest,
    neurons_with_evidence: usize,
    assignments: usize,
    failures: usize,
    evidence_failures: usize,
}

pub fn assignments_csv_rows(assignments: &[LabelAssignment]) -> Vec<Vec<String>> {
    assignments
        .iter()
        .map(|a| {
            let alternatives = a
                .alternatives
                .iter()
                .map(|alt| format!("{}={}", alt.label, cell(alt.score)))
                .collect::<Vec<_>>()
                .join("|");
            vec![
                a.neuron_id.to_string(),
                a.pipeline.tag().to_string(),
                cell_opt(a.gamma),
                a.label.clone(),
                cell(a.score),
                a.source_tag.tag().to_string(),
                alternatives,
            ]
        })
        .collect()
}

pub const ASSIGNMENTS_CSV_HEADER: [&str; 7] = [
    "neuron_id",
    "pipeline",
    "gamma",
    "label",
    "score",
    "source_tag",
    "alternatives",
];

pub fn run(
    ctx: &Context,
    manifest_path: &Path,
    evidence_path: &Path,
) -> Result<RunOutcome, CliError> {
    let mut timings = Timings::new();
    timings.start("load");
    let manifest = ctx.load_manifest(manifest_path)?;
    let inputs = ctx.load_inputs(&manifest)?;
    if inputs.vocabulary.is_empty() {
        return Err(CliError::Data("vocabulary is empty".into()));
    }
    let evidence: EvidenceBatch = read_stage_json(evidence_path)?;
    for e in &evidence.evidence {
        e.validate(inputs.embeddings.rows())
            .map_err(neurolabel_core::Error::from)?;
    }

    timings.start("assign");
    let batch = assign_all(
        &evidence,
        &inputs.embeddings,
        &inputs.vocabulary,
        &manifest.canonical_gammas(),
        &manifest.canonical_pipelines(),
        manifest.top_n,
    );

    timings.start("write");
    let out = OutDir::create(&ctx.out)?;
    out.write_json("assignments.json", &batch)?;
    if ctx.format.wants_csv() {
        out.write_csv(
            "assignments.csv",
            &ASSIGNMENTS_CSV_HEADER,
            &assignments_csv_rows(&batch.assignments),
        )?;
    }
    let partial = !batch.failures.is_empty() || !evidence.failures.is_empty();
    let details = Details {
        neurons_with_evidence: evidence.evidence.len(),
        assignments: batch.assignments.len(),
        failures: batch.failures.len(),
        evidence_failures: evidence.failures.len(),
        manifest,
    };
    out.write_json(
        "run_assign.json",
        &RunSummary::new("assign", details.manifest.seed, &details),
    )?;
    timings.write(&out, "assign")?;
    Ok(if partial {
        RunOutcome::Partial
    } else {
        RunOutcome::Clean
    })
}
