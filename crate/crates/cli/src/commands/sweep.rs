//! `sweep`: ablation tables over the pinned gamma grid (0.0 to 1.0 in
//! steps of 0.1) or the pinned K grid (10 to 100 in steps of 10).

use std::path::Path;

use serde::Serialize;

use neurolabel_core::corpus::{EmbeddingMatrix, RunInputs, RunManifest};
use neurolabel_core::projection::{assign_all, csp_residual, Pipeline};
use neurolabel_core::retrieval::{build_evidence, EvidenceBatch};
use neurolabel_core::simulator::GroundTruth;
use neurolabel_core::vecmath::{dot_f64, widen};

use crate::output::{cell_opt, OutDir, RunSummary, Timings};
use crate::{CliError, RunOutcome, SweepAxis};

use super::Context;

/// The 11-point gamma grid.
pub fn gamma_grid() -> Vec<f64> {
    (0..=10).map(|i| i as f64 / 10.0).collect()
}

/// The 10-point K grid.
pub fn k_grid() -> Vec<usize> {
    (1..=10).map(|i| i * 10).collect()
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub pipeline: Pipeline,
    pub gamma: Option<f64>,
    pub labeled: usize,
    pub failures: usize,
    pub accuracy: Option<f64>,
    pub nuisance_rate: Option<f64>,
    /// Mean |⟨residual, contrastive⟩| over all evidence pairs; the
    /// leftover nuisance component, (1−γ)·mean|overlap| by construction.
    pub mean_abs_nuisance_overlap: Option<f64>,
    pub mean_score: Option<f64>,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct SweepTable {
    pub axis: String,
    pub rows: Vec<SweepRow>,
}

#[derive(Serialize)]
struct Details {
    manifest: RunManifest,
    axis: String,
    rows: usize,
    evidence_failures: usize,
}

fn mean_abs_overlap(
    evidence: &EvidenceBatch,
    embeddings: &EmbeddingMatrix,
    gamma: f64,
) -> Option<f64> {
    let mut total = 0.0f64;
    let mut pairs = 0usize;
    for e in &evidence.evidence {
        for (p, c) in e.positives.iter().zip(&e.contrastives) {
            let pos = widen(embeddings.row(p.index));
            let neg = widen(embeddings.row(c.index));
            let residual = csp_residual(&pos, &neg, gamma);
            total += dot_f64(&residual, &neg).abs();
            pairs += 1;
        }
    }
    (pairs > 0).then(|| total / pairs as f64)
}

fn rows_for_cells(
    k: usize,
    evidence: &EvidenceBatch,
    inputs: &RunInputs,
    manifest: &RunManifest,
    gammas: &[f64],
    pipelines: &[Pipeline],
    truth: Option<&GroundTruth>,
) -> Vec<SweepRow> {
    let batch = assign_all(
        evidence,
        &inputs.embeddings,
        &inputs.vocabulary,
        gammas,
        pipelines,
        manifest.top_n,
    );
    let mut cells: Vec<(Pipeline, Option<f64>)> = batch
        .assignments
        .iter()
        .map(|a| (a.pipeline, a.gamma))
        .collect();
    cells.sort_by(|a, b| {
        (a.1.map(f64::to_bits), a.0.tag()).cmp(&(b.1.map(f64::to_bits), b.0.tag()))
    });
    cells.dedup();
    let neurons = inputs.activations.neurons();
    let mut rows = Vec::new();
    for (pipeline, gamma) in cells {
        let mut labeled = 0usize;
        let mut correct = 0usize;
        let mut nuisance = 0usize;
        let mut score_sum = 0.0f64;
        for a in &batch.assignments {
            if a.pipeline != pipeline || a.gamma != gamma {
                continue;
            }
            labeled += 1;
            score_sum += a.score;
            if let Some(truth) = truth {
                if truth.concept_label(a.neuron_id) == Some(a.label.as_str()) {
                    correct += 1;
                }
                if a.label == truth.nuisance_label {
                    nuisance += 1;
                }
            }
        }
        let failures = batch
            .failures
            .iter()
            .filter(|f| f.pipeline == pipeline && f.gamma == gamma)
            .count();
        rows.push(SweepRow {
            k,
            pipeline,
            gamma,
            labeled,
            failures,
            accuracy: truth.map(|_| correct as f64 / neurons as f64),
            nuisance_rate: truth.map(|_| nuisance as f64 / neurons as f64),
            mean_abs_nuisance_overlap: gamma
                .and_then(|g| mean_abs_overlap(evidence, &inputs.embeddings, g)),
            mean_score: (labeled > 0).then(|| score_sum / labeled as f64),
        });
    }
    rows
}

pub const SWEEP_CSV_HEADER: [&str; 9] = [
    "k",
    "pipeline",
    "gamma",
    "labeled",
    "failures",
    "accuracy",
    "nuisance_rate",
    "mean_abs_nuisance_overlap",
    "mean_score",
];

pub fn sweep_csv_rows(table: &SweepTable) -> Vec<Vec<String>> {
    table
        .rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                r.pipeline.tag().to_string(),
                cell_opt(r.gamma),
                r.labeled.to_string(),
                r.failures.to_string(),
                cell_opt(r.accuracy),
                cell_opt(r.nuisance_rate),
                cell_opt(r.mean_abs_nuisance_overlap),
                cell_opt(r.mean_score),
            ]
        })
        .collect()
}

pub fn run(ctx: &Context, manifest_path: &Path, axis: SweepAxis) -> Result<RunOutcome, CliError> {
    let mut timings = Timings::new();
    timings.start("load");
    let manifest = ctx.load_manifest(manifest_path)?;
    let inputs = ctx.load_inputs(&manifest)?;
    if inputs.vocabulary.is_empty() {
        return Err(CliError::Data("vocabulary is empty".into()));
    }
    let truth = manifest
        .ground_truth
        .as_deref()
        .map(GroundTruth::load)
        .transpose()
        .map_err(neurolabel_core::Error::from)?;

    timings.start("sweep");
    let mut evidence_failures = 0usize;
    let table = match axis {
        SweepAxis::Gamma => {
            let evidence = build_evidence(
                &inputs.activations,
                &inputs.embeddings,
                manifest.k,
                manifest.fallback,
            )
            .map_err(neurolabel_core::Error::from)?;
            evidence_failures = evidence.failures.len();
            let mut rows = Vec::new();
            for gamma in gamma_grid() {
                rows.extend(rows_for_cells(
                    manifest.k,
                    &evidence,
                    &inputs,
                    &manifest,
                    &[gamma],
                    &[Pipeline::Csp],
                    truth.as_ref(),
                ));
            }
            SweepTable {
                axis: "gamma".into(),
                rows,
            }
        }
        SweepAxis::K => {
            let samples = inputs.activations.samples();
            let grid = k_grid();
            let max_k = *grid.last().expect("grid non-empty");
            if samples < max_k {
                return Err(CliError::Config(format!(
                    "k sweep needs at least {max_k} samples, got {samples}"
                )));
            }
            let gammas = manifest.canonical_gammas();
            let pipelines = manifest.canonical_pipelines();
            let mut rows = Vec::new();
            for k in grid {
                let evidence = build_evidence(
                    &inputs.activations,
                    &inputs.embeddings,
                    k,
                    manifest.fallback,
                )
                .map_err(neurolabel_core::Error::from)?;
                evidence_failures += evidence.failures.len();
                rows.extend(rows_for_cells(
                    k,
                    &evidence,
                    &inputs,
                    &manifest,
                    &gammas,
                    &pipelines,
                    truth.as_ref(),
                ));
            }
            SweepTable {
                axis: "k".into(),
                rows,
            }
        }
    };

    timings.start("write");
    let out = OutDir::create(&ctx.out)?;
    let name = match axis {
        SweepAxis::Gamma => "sweep_gamma",
        SweepAxis::K => "sweep_k",
    };
    out.write_json(&format!("{name}.json"), &table)?;
    if ctx.format.wants_csv() {
        out.write_csv(
            &format!("{name}.csv"),
            &SWEEP_CSV_HEADER,
            &sweep_csv_rows(&table),
        )?;
    }
    let details = Details {
        axis: table.axis.clone(),
        rows: table.rows.len(),
        evidence_failures,
        manifest,
    };
    out.write_json(
        "run_sweep.json",
        &RunSummary::new("sweep", details.manifest.seed, &details),
    )?;
    timings.write(&out, "sweep")?;
    Ok(if evidence_failures > 0 {
        RunOutcome::Partial
    } else {
        RunOutcome::Clean
    })
}
