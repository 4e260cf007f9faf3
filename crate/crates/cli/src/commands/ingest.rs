//! `ingest`: merge externally generated candidate labels (plus their
//! embeddings) into the manifest's vocabulary.

use std::path::Path;

use serde::Serialize;

use neurolabel_core::corpus::LabelVocabulary;
use neurolabel_core::prompts::{ingest_candidates, CandidateEmbeddings, CandidateResponses};

use crate::output::{OutDir, RunSummary, Timings};
use crate::{CliError, RunOutcome};

use super::Context;

#[derive(Serialize)]
struct Details {
    manifest: neurolabel_core::corpus::RunManifest,
    baseline_labels: usize,
    merged_labels: usize,
    added: usize,
}

pub const MERGED_VOCABULARY: &str = "vocabulary.json";
pub const MERGED_VOCABULARY_EMB: &str = "vocabulary_emb.emb1";

pub fn run(
    ctx: &Context,
    manifest_path: &Path,
    candidates_path: &Path,
    embeddings_path: &Path,
) -> Result<RunOutcome, CliError> {
    let mut timings = Timings::new();
    timings.start("load");
    let manifest = ctx.load_manifest(manifest_path)?;
    let base_vocab =
        LabelVocabulary::load(&manifest.vocabulary).map_err(neurolabel_core::Error::from)?;
    let responses =
        CandidateResponses::load(candidates_path).map_err(neurolabel_core::Error::from)?;
    let embeddings =
        CandidateEmbeddings::load(embeddings_path).map_err(neurolabel_core::Error::from)?;

    timings.start("merge");
    let (vocab, report) = ingest_candidates(&responses, &base_vocab, &embeddings)
        .map_err(neurolabel_core::Error::from)?;

    timings.start("write");
    let out = OutDir::create(&ctx.out)?;
    vocab
        .save(&out.path(MERGED_VOCABULARY), MERGED_VOCABULARY_EMB)
        .map_err(neurolabel_core::Error::from)?;
    out.write_json("ingest_report.json", &report)?;
    let details = Details {
        baseline_labels: base_vocab.len(),
        merged_labels: vocab.len(),
        added: report.added.len(),
        manifest,
    };
    out.write_json(
        "run_ingest.json",
        &RunSummary::new("ingest", details.manifest.seed, &details),
    )?;
    timings.write(&out, "ingest")?;
    Ok(RunOutcome::Clean)
}
