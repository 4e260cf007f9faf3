//! `evaluate`: faithfulness metrics over existing assignments.

use std::path::Path;

use serde::Serialize;

use neurolabel_core::metrics::{evaluate, EvaluationContext, FaithfulnessReport};
use neurolabel_core::projection::AssignmentBatch;

use crate::output::{cell, cell_opt, OutDir, RunSummary, Timings};
use crate::{CliError, RunOutcome};

use super::{read_stage_json, Context};

#[derive(Serialize)]
struct Details {
    manifest: neurolabel_core::corpus::RunManifest,
    assignments: usize,
    records: usize,
    diagnostics: usize,
}

pub fn report_csv_rows(report: &FaithfulnessReport) -> Vec<Vec<String>> {
    report
        .per_neuron
        .iter()
        .map(|r| {
            vec![
                r.neuron_id.to_string(),
                r.pipeline.tag().to_string(),
                cell_opt(r.gamma),
                r.label.clone(),
                r.source_tag.tag().to_string(),
                cell_opt(r.dma),
                cell_opt(r.auc),
                cell_opt(r.scs),
            ]
        })
        .collect()
}

pub const REPORT_CSV_HEADER: [&str; 8] = [
    "neuron_id",
    "pipeline",
    "gamma",
    "label",
    "source_tag",
    "dma",
    "auc",
    "scs",
];

pub fn aggregate_csv_rows(report: &FaithfulnessReport) -> Vec<Vec<String>> {
    report
        .aggregates
        .iter()
        .map(|a| {
            vec![
                a.pipeline.tag().to_string(),
                cell_opt(a.gamma),
                a.metric.clone(),
                a.count.to_string(),
                cell(a.mean),
                cell_opt(a.sem),
            ]
        })
        .collect()
}

pub const AGGREGATE_CSV_HEADER: [&str; 6] = ["pipeline", "gamma", "metric", "count", "mean", "sem"];

pub fn run(
    ctx: &Context,
    manifest_path: &Path,
    assignments_path: &Path,
) -> Result<RunOutcome, CliError> {
    let mut timings = Timings::new();
    timings.start("load");
    let manifest = ctx.load_manifest(manifest_path)?;
    let inputs = ctx.load_inputs(&manifest)?;
    let batch: AssignmentBatch = read_stage_json(assignments_path)?;

    timings.start("evaluate");
    let eval_ctx = EvaluationContext {
        probe_activations: &inputs.activations,
        generated: inputs.generated_activations.as_ref(),
        random_negatives: inputs.random_negatives.as_ref(),
        heldout_activations: inputs.heldout_activations.as_ref(),
        heldout_similarities: inputs.heldout_similarities.as_ref(),
        tau: manifest.metrics.tau,
        subsample_negatives: manifest.metrics.subsample_negatives,
        seed: manifest.seed,
    };
    let report = evaluate(&batch.assignments, &eval_ctx);

    timings.start("write");
    let out = OutDir::create(&ctx.out)?;
    out.write_json("report.json", &report)?;
    if ctx.format.wants_csv() {
        out.write_csv("report.csv", &REPORT_CSV_HEADER, &report_csv_rows(&report))?;
        out.write_csv(
            "report_aggregates.csv",
            &AGGREGATE_CSV_HEADER,
            &aggregate_csv_rows(&report),
        )?;
    }
    let partial = !report.diagnostics.is_empty();
    let details = Details {
        assignments: batch.assignments.len(),
        records: report.per_neuron.len(),
        diagnostics: report.diagnostics.len(),
        manifest,
    };
    out.write_json(
        "run_evaluate.json",
        &RunSummary::new("evaluate", details.manifest.seed, &details),
    )?;
    timings.write(&out, "evaluate")?;
    Ok(if partial {
        RunOutcome::Partial
    } else {
        RunOutcome::Clean
    })
}
