//! Regenerates the bundled fixtures under `fixtures/`.
//!
//! `fixtures/toy` is a 3-neuron corpus with every metric input wired up;
//! `fixtures/toy3` is the minimal 3-sample corpus used in docs and
//! tests. Both are deterministic, so re-running this binary must leave
//! the checked-in files byte-identical.
//!
//! Usage: cargo run -p neurolabel --example build_toy_fixtures

use std::path::{Path, PathBuf};

use neurolabel_core::canonical::write_canonical_json;
use neurolabel_core::corpus::{
    ActivationMatrix, EmbeddingMatrix, LabelVocabulary, MetricConfig, RunManifest, SourceTag,
};
use neurolabel_core::projection::Pipeline;
use neurolabel_core::retrieval::Fallback;
use neurolabel_core::rng::SplitMix64;
use serde::Serialize;

#[derive(Serialize)]
struct GeneratedFile {
    activations: String,
    entries: Vec<GeneratedEntry>,
}

#[derive(Serialize)]
struct GeneratedEntry {
    neuron_id: usize,
    label: String,
}

#[derive(Serialize)]
struct SimilarityFile {
    similarities: String,
    labels: Vec<String>,
}

fn fixtures_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn random_unit_rows(rng: &mut SplitMix64, rows: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..dim).map(|_| rng.next_gaussian()).collect())
        .collect()
}

fn build_toy(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    let mut rng = SplitMix64::new(0x70E1);
    let dim = 4;
    let samples = 12;
    let neurons = 3;

    let embeddings =
        EmbeddingMatrix::from_rows_f64(&random_unit_rows(&mut rng, samples, dim)).unwrap();
    embeddings.save(&dir.join("images.emb1")).unwrap();

    let act_rows: Vec<Vec<f64>> = (0..neurons)
        .map(|_| (0..samples).map(|_| rng.next_f64()).collect())
        .collect();
    let activations = ActivationMatrix::from_rows_f64(&act_rows).unwrap();
    activations.save(&dir.join("activations.emb1")).unwrap();

    let labels = [
        "tabby cat",
        "cardboard box",
        "spider web",
        "palm tree",
        "forest canopy",
    ];
    let tags = vec![
        SourceTag::Baseline,
        SourceTag::Baseline,
        SourceTag::PositiveAug,
        SourceTag::ContrastiveAug,
        SourceTag::Baseline,
    ];
    let vocab = LabelVocabulary::new(
        labels.iter().map(|s| s.to_string()).collect(),
        tags,
        EmbeddingMatrix::from_rows_f64(&random_unit_rows(&mut rng, labels.len(), dim)).unwrap(),
    )
    .unwrap();
    vocab
        .save(&dir.join("vocabulary.json"), "vocabulary_emb.emb1")
        .unwrap();

    // Generated activations: one row per (neuron, label) pair, 4 images.
    let mut entries = Vec::new();
    let mut gen_rows = Vec::new();
    for n in 0..neurons {
        for label in &labels {
            entries.push(GeneratedEntry {
                neuron_id: n,
                label: label.to_string(),
            });
            gen_rows.push((0..4).map(|_| rng.next_f64()).collect::<Vec<f64>>());
        }
    }
    ActivationMatrix::from_rows_f64(&gen_rows)
        .unwrap()
        .save(&dir.join("generated_acts.emb1"))
        .unwrap();
    write_canonical_json(
        &dir.join("generated.json"),
        &GeneratedFile {
            activations: "generated_acts.emb1".into(),
            entries,
        },
    )
    .unwrap();

    let rand_rows: Vec<Vec<f64>> = (0..neurons)
        .map(|_| (0..6).map(|_| rng.next_f64() * 0.8).collect())
        .collect();
    ActivationMatrix::from_rows_f64(&rand_rows)
        .unwrap()
        .save(&dir.join("random_acts.emb1"))
        .unwrap();

    let heldout = 8;
    let heldout_rows: Vec<Vec<f64>> = (0..neurons)
        .map(|_| (0..heldout).map(|_| rng.next_f64()).collect())
        .collect();
    ActivationMatrix::from_rows_f64(&heldout_rows)
        .unwrap()
        .save(&dir.join("heldout_acts.emb1"))
        .unwrap();
    let sim_rows: Vec<Vec<f64>> = (0..labels.len())
        .map(|_| (0..heldout).map(|_| rng.next_f64() * 2.0 - 1.0).collect())
        .collect();
    ActivationMatrix::from_rows_f64(&sim_rows)
        .unwrap()
        .save(&dir.join("heldout_sims.emb1"))
        .unwrap();
    write_canonical_json(
        &dir.join("heldout_sims.json"),
        &SimilarityFile {
            similarities: "heldout_sims.emb1".into(),
            labels: labels.iter().map(|s| s.to_string()).collect(),
        },
    )
    .unwrap();

    let manifest = RunManifest {
        embeddings: "images.emb1".into(),
        activations: "activations.emb1".into(),
        vocabulary: "vocabulary.json".into(),
        k: 3,
        gammas: vec![0.0, 0.5, 1.0],
        pipelines: Pipeline::ALL.to_vec(),
        seed: Some(7),
        fallback: Fallback::Error,
        top_n: 2,
        metrics: MetricConfig {
            tau: 1.0,
            random_negatives: Some("random_acts.emb1".into()),
            generated_activations: Some("generated.json".into()),
            heldout_activations: Some("heldout_acts.emb1".into()),
            heldout_similarities: Some("heldout_sims.json".into()),
            subsample_negatives: None,
        },
        ground_truth: None,
    };
    write_canonical_json(&dir.join("manifest.json"), &manifest).unwrap();
}

fn build_toy3(dir: &Path) {
    std::fs::create_dir_all(dir).unwrap();
    let second = (1.0f64 - 0.81).sqrt();
    let embeddings =
        EmbeddingMatrix::from_rows_f64(&[vec![1.0, 0.0], vec![0.9, second], vec![0.0, 1.0]])
            .unwrap();
    embeddings.save(&dir.join("images.emb1")).unwrap();
    ActivationMatrix::new(1, 3, vec![1.0, 0.1, 0.2], None)
        .unwrap()
        .save(&dir.join("activations.emb1"))
        .unwrap();
    let vocab = LabelVocabulary::new(
        vec!["first".into(), "second".into()],
        vec![SourceTag::Baseline, SourceTag::Baseline],
        EmbeddingMatrix::new(2, 2, vec![1.0, 0.0, 0.8, 0.6], None).unwrap(),
    )
    .unwrap();
    vocab
        .save(&dir.join("vocabulary.json"), "vocabulary_emb.emb1")
        .unwrap();
    let manifest = RunManifest {
        embeddings: "images.emb1".into(),
        activations: "activations.emb1".into(),
        vocabulary: "vocabulary.json".into(),
        k: 1,
        gammas: vec![0.0, 0.5, 1.0],
        pipelines: vec![Pipeline::SemanticLens, Pipeline::Csp],
        seed: Some(1),
        fallback: Fallback::Error,
        top_n: 1,
        metrics: MetricConfig::default(),
        ground_truth: None,
    };
    write_canonical_json(&dir.join("manifest.json"), &manifest).unwrap();
}

fn main() {
    let root = fixtures_root();
    build_toy(&root.join("toy"));
    build_toy3(&root.join("toy3"));
    println!("fixtures written under {}", root.display());
}
