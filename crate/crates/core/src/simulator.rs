//! Synthetic corpora from a linear concept model, used as the
//! ground-truth oracle for concept-recovery benchmarks.
//!
//! Each neuron owns a concept direction `c`; the world shares one
//! nuisance direction `f` with `⟨c, f⟩` pinned to a requested alignment
//! via Gram-Schmidt. Positive samples embed as `α·c + β·f + ε`,
//! contrastive samples as `β'·f + δ`. Activations are `α` on a neuron's
//! own positives and drawn strictly below the corpus mean everywhere
//! else, so the retrieval constraint is satisfiable by construction.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    ActivationMatrix, CorpusError, EmbeddingMatrix, LabelVocabulary, MetricConfig, RunManifest,
    SourceTag,
};
use crate::projection::{assign_all, csp_residual, Pipeline};
use crate::retrieval::{build_evidence, Fallback, RetrievalError};
use crate::rng::SplitMix64;
use crate::vecmath::{dot_f64, normalize_f64};

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("closed-form residual verification requires a noiseless world")]
    NoiselessRequired,
    #[error("could not sample distractor {index} within {attempts} attempts")]
    DistractorSampling { index: usize, attempts: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
}

/// World recipe. `alignment` is the exact inner product between every
/// concept direction and the shared nuisance direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldConfig {
    pub dim: usize,
    pub neurons: usize,
    /// Positive/contrastive pairs per neuron (the retrieval K).
    pub pairs_per_neuron: usize,
    /// ⟨c, f⟩, in [0, 1).
    pub alignment: f64,
    pub alpha_range: (f64, f64),
    pub beta_range: (f64, f64),
    /// Contrastive nuisance coefficient range; defaults to `beta_range`.
    #[serde(default)]
    pub beta_prime_range: Option<(f64, f64)>,
    /// Per-coordinate noise SD on positive embeddings.
    #[serde(default)]
    pub noise_positive: f64,
    /// Per-coordinate noise SD on contrastive embeddings.
    #[serde(default)]
    pub noise_contrastive: f64,
    #[serde(default = "default_distractors")]
    pub distractors: usize,
    pub seed: u64,
}

fn default_distractors() -> usize {
    10
}

/// Maximum |cosine| a distractor label may have to any concept or the
/// nuisance direction; keeps benchmark misses attributable to the
/// projection rather than vocabulary luck.
pub const DISTRACTOR_MAX_COS: f64 = 0.3;

const DISTRACTOR_ATTEMPTS: usize = 100_000;

impl WorldConfig {
    pub fn validate(&self) -> Result<(), SimulatorError> {
        let err = |m: String| Err(SimulatorError::InvalidConfig(m));
        if self.dim < 2 {
            return err(format!("dim must be at least 2, got {}", self.dim));
        }
        if self.neurons < 1 || self.pairs_per_neuron < 1 {
            return err("neurons and pairs_per_neuron must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.alignment) {
            return err(format!("alignment {} outside [0, 1)", self.alignment));
        }
        let range_ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !range_ok(self.alpha_range) || self.alpha_range.0 <= 0.0 {
            return err(format!(
                "alpha_range {:?} must be finite with a positive lower bound",
                self.alpha_range
            ));
        }
        if !range_ok(self.beta_range) || self.beta_range.0 < 0.0 {
            return err(format!(
                "beta_range {:?} must be finite and non-negative",
                self.beta_range
            ));
        }
        let bp = self.beta_prime();
        if !range_ok(bp) || bp.0 < 0.0 {
            return err(format!(
                "beta_prime_range {bp:?} must be finite and non-negative"
            ));
        }
        if self.noise_contrastive == 0.0 && bp.0 <= 0.0 {
            return err("noiseless contrastives need a positive beta_prime lower bound".into());
        }
        if self.noise_positive < 0.0 || self.noise_contrastive < 0.0 {
            return err("noise scales must be non-negative".into());
        }
        Ok(())
    }

    fn beta_prime(&self) -> (f64, f64) {
        self.beta_prime_range.unwrap_or(self.beta_range)
    }

    pub fn is_noiseless(&self) -> bool {
        self.noise_positive == 0.0 && self.noise_contrastive == 0.0
    }
}

/// Generating truth for one synthetic neuron.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeuronTruth {
    pub neuron_id: usize,
    pub concept_label: String,
    pub concept: Vec<f64>,
    pub positive_rows: Vec<usize>,
    pub contrastive_rows: Vec<usize>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub beta_prime: Vec<f64>,
}

/// Everything needed to check a benchmark run against the generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruth {
    pub alignment: f64,
    pub nuisance_label: String,
    pub nuisance: Vec<f64>,
    pub neurons: Vec<NeuronTruth>,
}

impl GroundTruth {
    pub fn concept_label(&self, neuron_id: usize) -> Option<&str> {
        self.neurons
            .get(neuron_id)
            .map(|n| n.concept_label.as_str())
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(CorpusError::from)
    }
}

/// A generated world: standard corpus tensors plus the generating truth
/// and the raw (pre-normalization, 64-bit) sample rows.
#[derive(Debug, Clone)]
pub struct LinearWorld {
    pub config: WorldConfig,
    pub embeddings: EmbeddingMatrix,
    pub activations: ActivationMatrix,
    pub vocabulary: LabelVocabulary,
    pub ground_truth: GroundTruth,
    /// Raw model rows, aligned with `embeddings` rows.
    pub raw_rows: Vec<Vec<f64>>,
}

fn random_unit(rng: &mut SplitMix64, dim: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.next_gaussian()).collect();
        if normalize_f64(&mut v) > 1e-6 {
            return v;
        }
    }
}

/// Unit vector orthogonal to `against` (one Gram-Schmidt step).
fn random_unit_orthogonal(rng: &mut SplitMix64, against: &[f64]) -> Vec<f64> {
    loop {
        let mut v = random_unit(rng, against.len());
        let overlap = dot_f64(&v, against);
        for (x, a) in v.iter_mut().zip(against) {
            *x -= overlap * a;
        }
        if normalize_f64(&mut v) > 1e-6 {
            return v;
        }
    }
}

pub fn generate_world(config: &WorldConfig) -> Result<LinearWorld, SimulatorError> {
    config.validate()?;
    let mut rng = SplitMix64::new(config.seed);
    let d = config.dim;
    let k = config.pairs_per_neuron;
    let n_samples = config.neurons * 2 * k;
    let g = config.alignment;

    let nuisance = random_unit(&mut rng, d);
    let mut concepts = Vec::with_capacity(config.neurons);
    for _ in 0..config.neurons {
        let e = random_unit_orthogonal(&mut rng, &nuisance);
        let c: Vec<f64> = nuisance
            .iter()
            .zip(&e)
            .map(|(f, e)| g * f + (1.0 - g * g).sqrt() * e)
            .collect();
        concepts.push(c);
    }

    let mut raw_rows: Vec<Vec<f64>> = Vec::with_capacity(n_samples);
    let mut neurons = Vec::with_capacity(config.neurons);
    let bp = config.beta_prime();
    for (i, concept) in concepts.iter().enumerate() {
        let positive_rows: Vec<usize> = (0..k).map(|j| raw_rows.len() + j).collect();
        let mut alpha = Vec::with_capacity(k);
        let mut beta = Vec::with_capacity(k);
        for _ in 0..k {
            let a = rng.next_in_range(config.alpha_range.0, config.alpha_range.1);
            let b = rng.next_in_range(config.beta_range.0, config.beta_range.1);
            let mut row: Vec<f64> = concept
                .iter()
                .zip(&nuisance)
                .map(|(c, f)| a * c + b * f)
                .collect();
            if config.noise_positive > 0.0 {
                for x in row.iter_mut() {
                    *x += config.noise_positive * rng.next_gaussian();
                }
            }
            raw_rows.push(row);
            alpha.push(a);
            beta.push(b);
        }
        let contrastive_rows: Vec<usize> = (0..k).map(|j| raw_rows.len() + j).collect();
        let mut beta_prime = Vec::with_capacity(k);
        for _ in 0..k {
            let b = rng.next_in_range(bp.0, bp.1);
            let mut row: Vec<f64> = nuisance.iter().map(|f| b * f).collect();
            if config.noise_contrastive > 0.0 {
                for x in row.iter_mut() {
                    *x += config.noise_contrastive * rng.next_gaussian();
                }
            }
            raw_rows.push(row);
            beta_prime.push(b);
        }
        neurons.push(NeuronTruth {
            neuron_id: i,
            concept_label: format!("concept_{i}"),
            concept: concept.clone(),
            positive_rows,
            contrastive_rows,
            alpha,
            beta,
            beta_prime,
        });
    }
    let embeddings = EmbeddingMatrix::from_rows_f64(&raw_rows)?;

    // Activations: α on a neuron's own positives, uniform draws below
    // half the guaranteed mean floor everywhere else, so every non-
    // positive sample sits strictly below the neuron mean.
    let low_cap = 0.5 * (k as f64 * config.alpha_range.0) / n_samples as f64;
    let mut act_rows: Vec<Vec<f64>> = Vec::with_capacity(config.neurons);
    for truth in &neurons {
        let mut row = vec![0.0f64; n_samples];
        for x in row.iter_mut() {
            *x = rng.next_in_range(0.0, low_cap);
        }
        for (j, &sample) in truth.positive_rows.iter().enumerate() {
            row[sample] = truth.alpha[j];
        }
        act_rows.push(row);
    }
    let activations = ActivationMatrix::from_rows_f64(&act_rows)?;

    let nuisance_label = "nuisance".to_string();
    let mut labels: Vec<String> = neurons.iter().map(|n| n.concept_label.clone()).collect();
    let mut label_rows: Vec<Vec<f64>> = concepts.clone();
    labels.push(nuisance_label.clone());
    label_rows.push(nuisance.clone());
    for idx in 0..config.distractors {
        let mut accepted = None;
        for _ in 0..DISTRACTOR_ATTEMPTS {
            let cand = random_unit(&mut rng, d);
            let mut ok = dot_f64(&cand, &nuisance).abs() <= DISTRACTOR_MAX_COS;
            if ok {
                for c in &concepts {
                    if dot_f64(&cand, c).abs() > DISTRACTOR_MAX_COS {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                accepted = Some(cand);
                break;
            }
        }
        let cand = accepted.ok_or(SimulatorError::DistractorSampling {
            index: idx,
            attempts: DISTRACTOR_ATTEMPTS,
        })?;
        labels.push(format!("distractor_{idx}"));
        label_rows.push(cand);
    }
    let vocab_embeddings = EmbeddingMatrix::from_rows_f64(&label_rows)?;
    let vocabulary = LabelVocabulary::new(
        labels,
        vec![SourceTag::Baseline; config.neurons + 1 + config.distractors],
        vocab_embeddings,
    )?;

    Ok(LinearWorld {
        config: config.clone(),
        embeddings,
        activations,
        vocabulary,
        ground_truth: GroundTruth {
            alignment: g,
            nuisance_label,
            nuisance,
            neurons,
        },
        raw_rows,
    })
}

/// Maximum elementwise deviation between the engine's contrastive
/// residual on the raw model vectors and the closed-form
/// `α·c + ((1−γ)·β − γ·α·⟨c,f⟩)·f`, over all pairs of a noiseless world.
pub fn verify_closed_form_residual(world: &LinearWorld, gamma: f64) -> Result<f64, SimulatorError> {
    if !world.config.is_noiseless() {
        return Err(SimulatorError::NoiselessRequired);
    }
    let truth = &world.ground_truth;
    let g = truth.alignment;
    let mut max_dev = 0.0f64;
    for neuron in &truth.neurons {
        for j in 0..neuron.alpha.len() {
            let a = neuron.alpha[j];
            let b = neuron.beta[j];
            let pos: Vec<f64> = neuron
                .concept
                .iter()
                .zip(&truth.nuisance)
                .map(|(c, f)| a * c + b * f)
                .collect();
            let engine = csp_residual(&pos, &truth.nuisance, gamma);
            let f_coef = (1.0 - gamma) * b - gamma * a * g;
            for (dim, e) in engine.iter().enumerate() {
                let closed = a * neuron.concept[dim] + f_coef * truth.nuisance[dim];
                max_dev = max_dev.max((e - closed).abs());
            }
        }
    }
    Ok(max_dev)
}

/// One benchmark cell: how often a pipeline's assignment is the
/// generating concept label, plus how often it is the nuisance label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub pipeline: Pipeline,
    pub gamma: Option<f64>,
    pub neurons: usize,
    /// Neurons that received any label at all.
    pub labeled: usize,
    /// Fraction assigned their generating concept label.
    pub accuracy: f64,
    /// Fraction assigned the shared nuisance label.
    pub nuisance_rate: f64,
}

/// Runs the full retrieval/assignment pipeline on a world and scores
/// each (pipeline, γ) cell against the generating truth.
pub fn concept_recovery_benchmark(
    world: &LinearWorld,
    gammas: &[f64],
    pipelines: &[Pipeline],
    top_n: usize,
) -> Result<Vec<BenchmarkRow>, SimulatorError> {
    let evidence = build_evidence(
        &world.activations,
        &world.embeddings,
        world.config.pairs_per_neuron,
        Fallback::Error,
    )?;
    let batch = assign_all(
        &evidence,
        &world.embeddings,
        &world.vocabulary,
        gammas,
        pipelines,
        top_n,
    );
    let truth = &world.ground_truth;
    let mut rows: Vec<BenchmarkRow> = Vec::new();
    let mut cells: Vec<(Pipeline, Option<f64>)> = batch
        .assignments
        .iter()
        .map(|a| (a.pipeline, a.gamma))
        .collect();
    cells.sort_by(|a, b| {
        let ka = (a.1.map(f64::to_bits), a.0.tag());
        let kb = (b.1.map(f64::to_bits), b.0.tag());
        ka.cmp(&kb)
    });
    cells.dedup();
    for (pipeline, gamma) in cells {
        let mut correct = 0usize;
        let mut nuisance = 0usize;
        let mut labeled = 0usize;
        for a in &batch.assignments {
            if a.pipeline != pipeline || a.gamma != gamma {
                continue;
            }
            labeled += 1;
            if truth.concept_label(a.neuron_id) == Some(a.label.as_str()) {
                correct += 1;
            }
            if a.label == truth.nuisance_label {
                nuisance += 1;
            }
        }
        let n = world.config.neurons;
        rows.push(BenchmarkRow {
            pipeline,
            gamma,
            neurons: n,
            labeled,
            accuracy: correct as f64 / n as f64,
            nuisance_rate: nuisance as f64 / n as f64,
        });
    }
    Ok(rows)
}

/// File names written by [`export_world`], relative to the output
/// directory.
pub const WORLD_EMBEDDINGS: &str = "embeddings.emb1";
pub const WORLD_ACTIVATIONS: &str = "activations.emb1";
pub const WORLD_VOCABULARY: &str = "vocabulary.json";
pub const WORLD_VOCABULARY_EMB: &str = "vocabulary_emb.emb1";
pub const WORLD_GROUND_TRUTH: &str = "ground_truth.json";
pub const WORLD_MANIFEST: &str = "manifest.json";

/// Exports a world as standard corpus files plus a ready-to-run
/// manifest, so benchmarks flow through the production pipeline.
pub fn export_world(
    world: &LinearWorld,
    dir: &Path,
    gammas: &[f64],
    pipelines: &[Pipeline],
) -> Result<PathBuf, SimulatorError> {
    let io = |source: std::io::Error, p: &Path| CorpusError::Io {
        path: p.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
    world.embeddings.save(&dir.join(WORLD_EMBEDDINGS))?;
    world.activations.save(&dir.join(WORLD_ACTIVATIONS))?;
    world
        .vocabulary
        .save(&dir.join(WORLD_VOCABULARY), WORLD_VOCABULARY_EMB)?;
    let gt_json = crate::canonical::to_canonical_json(&world.ground_truth)
        .map_err(|e| CorpusError::Manifest(e.to_string()))?;
    let gt_path = dir.join(WORLD_GROUND_TRUTH);
    std::fs::write(&gt_path, gt_json).map_err(|e| io(e, &gt_path))?;

    let manifest = RunManifest {
        embeddings: PathBuf::from(WORLD_EMBEDDINGS),
        activations: PathBuf::from(WORLD_ACTIVATIONS),
        vocabulary: PathBuf::from(WORLD_VOCABULARY),
        k: world.config.pairs_per_neuron,
        gammas: gammas.to_vec(),
        pipelines: pipelines.to_vec(),
        seed: Some(world.config.seed),
        fallback: Fallback::Error,
        top_n: 3,
        metrics: MetricConfig::default(),
        ground_truth: Some(PathBuf::from(WORLD_GROUND_TRUTH)),
    };
    let manifest_path = dir.join(WORLD_MANIFEST);
    let json = crate::canonical::to_canonical_json(&manifest)
        .map_err(|e| CorpusError::Manifest(e.to_string()))?;
    std::fs::write(&manifest_path, json).map_err(|e| io(e, &manifest_path))?;
    // Re-read through the validating loader to prove the export is a
    // well-formed run input.
    RunManifest::load(&manifest_path)?;
    Ok(manifest_path)
}
