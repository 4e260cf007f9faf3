//! Run manifests: one JSON document naming every input of a run plus the
//! retrieval, assignment and metric configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{peek_header, ActivationMatrix, CorpusError, EmbeddingMatrix, LabelVocabulary};
use crate::projection::Pipeline;
use crate::retrieval::Fallback;

/// Metric inputs and knobs. All file inputs are optional; a missing input
/// simply disables the metric that needs it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    /// Sigmoid temperature for simulation-correlation soft targets.
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Activations of every neuron on random background images.
    #[serde(default)]
    pub random_negatives: Option<PathBuf>,
    /// Join table of per-(neuron, label) activations on generated images.
    #[serde(default)]
    pub generated_activations: Option<PathBuf>,
    /// Activations of every neuron on a held-out image set.
    #[serde(default)]
    pub heldout_activations: Option<PathBuf>,
    /// Label-to-held-out-image similarity table.
    #[serde(default)]
    pub heldout_similarities: Option<PathBuf>,
    /// Seeded subsample size applied to the random-negative rows.
    #[serde(default)]
    pub subsample_negatives: Option<usize>,
}

fn default_tau() -> f64 {
    1.0
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            tau: default_tau(),
            random_negatives: None,
            generated_activations: None,
            heldout_activations: None,
            heldout_similarities: None,
            subsample_negatives: None,
        }
    }
}

fn default_top_n() -> usize {
    3
}

/// Parsed and validated run manifest. All paths are resolved relative to
/// the manifest file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub embeddings: PathBuf,
    pub activations: PathBuf,
    pub vocabulary: PathBuf,
    /// Positive-set size per neuron.
    pub k: usize,
    /// Projection strengths to evaluate, each in [0, 1].
    pub gammas: Vec<f64>,
    pub pipelines: Vec<Pipeline>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub fallback: Fallback,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    #[serde(default)]
    pub metrics: MetricConfig,
    /// Synthetic worlds carry their generating truth for benchmark tables.
    #[serde(default)]
    pub ground_truth: Option<PathBuf>,
}

fn err(msg: impl Into<String>) -> CorpusError {
    CorpusError::Manifest(msg.into())
}

impl RunManifest {
    /// Parses, resolves paths, validates ranges and cross-validates the
    /// referenced files (existence, kinds and matching counts).
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Self::load_with_seed(path, None)
    }

    /// Like [`RunManifest::load`], but with an external seed override
    /// applied before validation.
    pub fn load_with_seed(path: &Path, seed: Option<u64>) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut manifest: RunManifest = serde_json::from_str(&text)?;
        if seed.is_some() {
            manifest.seed = seed;
        }
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        manifest.resolve_paths(base);
        manifest.validate()?;
        manifest.cross_validate()?;
        Ok(manifest)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        resolve(&mut self.embeddings);
        resolve(&mut self.activations);
        resolve(&mut self.vocabulary);
        if let Some(p) = self.metrics.random_negatives.as_mut() {
            resolve(p);
        }
        if let Some(p) = self.metrics.generated_activations.as_mut() {
            resolve(p);
        }
        if let Some(p) = self.metrics.heldout_activations.as_mut() {
            resolve(p);
        }
        if let Some(p) = self.metrics.heldout_similarities.as_mut() {
            resolve(p);
        }
        if let Some(p) = self.ground_truth.as_mut() {
            resolve(p);
        }
    }

    /// Range and schema checks that need no file access.
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.k < 1 {
            return Err(err("k must be at least 1"));
        }
        for g in &self.gammas {
            if !(0.0..=1.0).contains(g) || !g.is_finite() {
                return Err(err(format!("gamma {g} outside [0, 1]")));
            }
        }
        if self.gammas.is_empty() && self.pipelines.contains(&Pipeline::Csp) {
            return Err(err("csp pipeline requested with an empty gamma list"));
        }
        if self.pipelines.is_empty() {
            return Err(err("pipeline list is empty"));
        }
        if self.top_n < 1 {
            return Err(err("top_n must be at least 1"));
        }
        if !self.metrics.tau.is_finite() || self.metrics.tau <= 0.0 {
            return Err(err(format!(
                "sigmoid temperature tau must be positive, got {}",
                self.metrics.tau
            )));
        }
        if let Some(n) = self.metrics.subsample_negatives {
            if n < 1 {
                return Err(err("subsample_negatives must be at least 1"));
            }
            if self.seed.is_none() {
                return Err(err(
                    "seed is required when subsample_negatives is requested",
                ));
            }
        }
        Ok(())
    }

    /// Requires a seed; stochastic stages call this before running.
    pub fn require_seed(&self) -> Result<u64, CorpusError> {
        self.seed
            .ok_or_else(|| err("seed is required for this operation"))
    }

    /// Gamma values in canonical (ascending, deduplicated) order.
    pub fn canonical_gammas(&self) -> Vec<f64> {
        let mut g = self.gammas.clone();
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }

    /// Pipelines in canonical (tag-sorted, deduplicated) order.
    pub fn canonical_pipelines(&self) -> Vec<Pipeline> {
        let mut p = self.pipelines.clone();
        p.sort_by_key(|p| p.tag());
        p.dedup();
        p
    }

    fn cross_validate(&self) -> Result<(), CorpusError> {
        let emb = peek_header(&self.embeddings)?;
        if emb.kind != 0 {
            return Err(err(format!(
                "{} is not an embedding tensor",
                self.embeddings.display()
            )));
        }
        let act = peek_header(&self.activations)?;
        if act.kind != 1 {
            return Err(err(format!(
                "{} is not an activation tensor",
                self.activations.display()
            )));
        }
        if act.cols != emb.rows {
            return Err(err(format!(
                "activation samples ({}) do not match embedding rows ({})",
                act.cols, emb.rows
            )));
        }
        if (self.k as u64) > act.cols {
            return Err(err(format!(
                "k = {} exceeds the {} probing samples",
                self.k, act.cols
            )));
        }
        let vocab = LabelVocabulary::load(&self.vocabulary)?;
        if !vocab.is_empty() && vocab.embeddings().dim() as u64 != emb.cols {
            return Err(err(format!(
                "vocabulary dimension ({}) does not match embedding dimension ({})",
                vocab.embeddings().dim(),
                emb.cols
            )));
        }
        if let Some(p) = &self.metrics.random_negatives {
            let h = peek_header(p)?;
            if h.kind != 1 {
                return Err(err(format!("{} is not an activation tensor", p.display())));
            }
            if h.rows != act.rows {
                return Err(err(format!(
                    "random-negative neurons ({}) do not match probing neurons ({})",
                    h.rows, act.rows
                )));
            }
        }
        if let Some(p) = &self.metrics.generated_activations {
            GeneratedActivations::peek(p, act.rows as usize)?;
        }
        let held = match &self.metrics.heldout_activations {
            Some(p) => {
                let h = peek_header(p)?;
                if h.kind != 1 {
                    return Err(err(format!("{} is not an activation tensor", p.display())));
                }
                if h.rows != act.rows {
                    return Err(err(format!(
                        "held-out neurons ({}) do not match probing neurons ({})",
                        h.rows, act.rows
                    )));
                }
                Some(h)
            }
            None => None,
        };
        if let Some(p) = &self.metrics.heldout_similarities {
            let cols = HeldoutSimilarities::peek(p)?;
            if let Some(h) = held {
                if cols != h.cols {
                    return Err(err(format!(
                        "similarity columns ({cols}) do not match held-out samples ({})",
                        h.cols
                    )));
                }
            }
        }
        if let Some(p) = &self.ground_truth {
            if !p.exists() {
                return Err(err(format!("ground truth file {} not found", p.display())));
            }
        }
        Ok(())
    }

    /// Fully loads every input named by the manifest.
    pub fn load_inputs(&self) -> Result<RunInputs, CorpusError> {
        Ok(RunInputs {
            embeddings: EmbeddingMatrix::load(&self.embeddings)?,
            activations: ActivationMatrix::load(&self.activations)?,
            vocabulary: LabelVocabulary::load(&self.vocabulary)?,
            random_negatives: self
                .metrics
                .random_negatives
                .as_deref()
                .map(ActivationMatrix::load)
                .transpose()?,
            generated_activations: self
                .metrics
                .generated_activations
                .as_deref()
                .map(GeneratedActivations::load)
                .transpose()?,
            heldout_activations: self
                .metrics
                .heldout_activations
                .as_deref()
                .map(ActivationMatrix::load)
                .transpose()?,
            heldout_similarities: self
                .metrics
                .heldout_similarities
                .as_deref()
                .map(HeldoutSimilarities::load)
                .transpose()?,
        })
    }
}

/// Everything a run needs, loaded and validated.
#[derive(Debug)]
pub struct RunInputs {
    pub embeddings: EmbeddingMatrix,
    pub activations: ActivationMatrix,
    pub vocabulary: LabelVocabulary,
    pub random_negatives: Option<ActivationMatrix>,
    pub generated_activations: Option<GeneratedActivations>,
    pub heldout_activations: Option<ActivationMatrix>,
    pub heldout_similarities: Option<HeldoutSimilarities>,
}

#[derive(Serialize, Deserialize)]
struct GeneratedFile {
    activations: String,
    entries: Vec<GeneratedEntry>,
}

#[derive(Serialize, Deserialize)]
struct GeneratedEntry {
    neuron_id: usize,
    label: String,
}

/// Per-(neuron, label) activations on label-conditioned generated images:
/// an activation tensor plus a JSON join table naming each row.
#[derive(Debug, Clone)]
pub struct GeneratedActivations {
    entries: BTreeMap<(usize, String), Vec<f64>>,
}

impl GeneratedActivations {
    pub fn from_entries(entries: impl IntoIterator<Item = ((usize, String), Vec<f64>)>) -> Self {
        Self {
            entries: entries.into_iter().collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let (file, matrix) = Self::read_parts(path)?;
        let mut entries = BTreeMap::new();
        for (row, entry) in file.entries.iter().enumerate() {
            let acts = matrix
                .row(row)
                .iter()
                .map(|v| *v as f64)
                .collect::<Vec<_>>();
            entries.insert((entry.neuron_id, entry.label.clone()), acts);
        }
        Ok(Self { entries })
    }

    fn read_parts(path: &Path) -> Result<(GeneratedFile, ActivationMatrix), CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: GeneratedFile =
            serde_json::from_str(&text).map_err(|e| err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let matrix = ActivationMatrix::load(&base.join(&file.activations))?;
        if matrix.neurons() != file.entries.len() {
            return Err(err(format!(
                "generated-activation join table has {} entries for {} tensor rows",
                file.entries.len(),
                matrix.neurons()
            )));
        }
        if matrix.samples() == 0 {
            return Err(err("generated-activation tensor has zero columns"));
        }
        Ok((file, matrix))
    }

    fn peek(path: &Path, neurons: usize) -> Result<(), CorpusError> {
        let (file, _) = Self::read_parts(path)?;
        for entry in &file.entries {
            if entry.neuron_id >= neurons {
                return Err(err(format!(
                    "generated-activation entry references neuron {} of {neurons}",
                    entry.neuron_id
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, neuron_id: usize, label: &str) -> Option<&[f64]> {
        self.entries
            .get(&(neuron_id, label.to_string()))
            .map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct SimilarityFile {
    similarities: String,
    labels: Vec<String>,
}

/// Cosine similarities between candidate labels (rows) and held-out
/// images (columns), computed by an external encoder.
#[derive(Debug, Clone)]
pub struct HeldoutSimilarities {
    label_rows: BTreeMap<String, usize>,
    matrix: ActivationMatrix,
}

impl HeldoutSimilarities {
    pub fn from_parts(labels: Vec<String>, matrix: ActivationMatrix) -> Result<Self, CorpusError> {
        if matrix.neurons() != labels.len() {
            return Err(err(format!(
                "{} labels for {} similarity rows",
                labels.len(),
                matrix.neurons()
            )));
        }
        let mut label_rows = BTreeMap::new();
        for (row, label) in labels.into_iter().enumerate() {
            label_rows.insert(label, row);
        }
        Ok(Self { label_rows, matrix })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let (file, matrix) = Self::read_parts(path)?;
        Self::from_parts(file.labels, matrix)
    }

    fn read_parts(path: &Path) -> Result<(SimilarityFile, ActivationMatrix), CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: SimilarityFile =
            serde_json::from_str(&text).map_err(|e| err(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let matrix = ActivationMatrix::load(&base.join(&file.similarities))?;
        if matrix.neurons() != file.labels.len() {
            return Err(err(format!(
                "similarity table has {} labels for {} tensor rows",
                file.labels.len(),
                matrix.neurons()
            )));
        }
        Ok((file, matrix))
    }

    fn peek(path: &Path) -> Result<u64, CorpusError> {
        let (_, matrix) = Self::read_parts(path)?;
        Ok(matrix.samples() as u64)
    }

    pub fn row(&self, label: &str) -> Option<&[f32]> {
        self.label_rows.get(label).map(|r| self.matrix.row(*r))
    }

    pub fn samples(&self) -> usize {
        self.matrix.samples()
    }
}

/// Convenience wrapper matching the operation name used elsewhere.
pub fn load_manifest(path: &Path) -> Result<RunManifest, CorpusError> {
    RunManifest::load(path)
}
