//! Positive/contrastive evidence retrieval.
//!
//! For each neuron the top-K activating samples form the positive set;
//! each positive is paired with the most semantically similar sample
//! whose activation falls below the neuron's mean. Similarity search is
//! exact (cosine equals the inner product on unit rows); the batch fans
//! out over neurons and merges in neuron-id order, so results are
//! independent of thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ActivationMatrix, EmbeddingMatrix};
use crate::vecmath::dot_f32;

/// What to do when no sample activates strictly below the neuron mean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fallback {
    /// Report the neuron as failed.
    #[default]
    #[serde(rename = "error")]
    Error,
    /// Relax the threshold to the 50th activation percentile, then fail.
    #[serde(rename = "quantile")]
    Quantile,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RetrievalError {
    #[error("k = {k} exceeds the {samples} available samples")]
    KExceedsSamples { k: usize, samples: usize },
    #[error("neuron {neuron_id}: no eligible contrastive sample below threshold {threshold}")]
    NoEligibleContrastive { neuron_id: usize, threshold: f64 },
    #[error("activation samples ({samples}) do not match embedding rows ({rows})")]
    SampleCountMismatch { samples: usize, rows: usize },
    #[error("neuron {neuron_id}: invalid evidence: {reason}")]
    InvalidEvidence { neuron_id: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositiveSample {
    pub index: usize,
    pub activation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveSample {
    pub index: usize,
    pub activation: f64,
    /// Inner product with the paired positive's embedding.
    pub similarity: f64,
}

/// Paired positive/contrastive evidence for one neuron. Positives are
/// activation-descending with index-ascending tie-break; entry `k` of
/// `contrastives` pairs with entry `k` of `positives`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronEvidence {
    pub neuron_id: usize,
    pub mean_activation: f64,
    pub positives: Vec<PositiveSample>,
    pub contrastives: Vec<ContrastiveSample>,
}

impl NeuronEvidence {
    pub fn k(&self) -> usize {
        self.positives.len()
    }

    /// Structural checks for evidence read back from a file: paired
    /// lengths, positive ordering, self-exclusion and index bounds.
    pub fn validate(&self, samples: usize) -> Result<(), RetrievalError> {
        let fail = |reason: String| {
            Err(RetrievalError::InvalidEvidence {
                neuron_id: self.neuron_id,
                reason,
            })
        };
        if self.positives.is_empty() {
            return fail("no positives".into());
        }
        if self.positives.len() != self.contrastives.len() {
            return fail(format!(
                "{} positives but {} contrastives",
                self.positives.len(),
                self.contrastives.len()
            ));
        }
        for pair in self.positives.windows(2) {
            let ordered = pair[0].activation > pair[1].activation
                || (pair[0].activation == pair[1].activation && pair[0].index < pair[1].index);
            if !ordered {
                return fail("positives not in activation-descending order".into());
            }
        }
        for (p, c) in self.positives.iter().zip(&self.contrastives) {
            if p.index == c.index {
                return fail(format!("sample {} paired with itself", p.index));
            }
            if p.index >= samples || c.index >= samples {
                return fail(format!("sample index out of range for {samples} samples"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronFailure {
    pub neuron_id: usize,
    pub error: String,
}

/// Evidence for every neuron that succeeded plus per-neuron failures;
/// a failed neuron never aborts the batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceBatch {
    pub k: usize,
    pub fallback: Fallback,
    pub evidence: Vec<NeuronEvidence>,
    pub failures: Vec<NeuronFailure>,
}

/// Top-K samples by activation, descending, ties broken by ascending
/// sample index.
pub fn select_positives(acts: &[f32], k: usize) -> Result<Vec<PositiveSample>, RetrievalError> {
    if k > acts.len() {
        return Err(RetrievalError::KExceedsSamples {
            k,
            samples: acts.len(),
        });
    }
    let mut order: Vec<usize> = (0..acts.len()).collect();
    order.sort_unstable_by(|&a, &b| acts[b].total_cmp(&acts[a]).then_with(|| a.cmp(&b)));
    Ok(order[..k]
        .iter()
        .map(|&index| PositiveSample {
            index,
            activation: acts[index] as f64,
        })
        .collect())
}

pub fn mean_activation(acts: &[f32]) -> f64 {
    if acts.is_empty() {
        return 0.0;
    }
    acts.iter().map(|v| *v as f64).sum::<f64>() / acts.len() as f64
}

/// 50th percentile with midpoint interpolation for even counts.
pub fn median_activation(acts: &[f32]) -> f64 {
    let mut sorted: Vec<f64> = acts.iter().map(|v| *v as f64).collect();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Exhaustive scan for the sample most similar to the positive among all
/// samples activating strictly below `threshold`, excluding the positive
/// itself. Ties break toward the lower index.
pub fn select_contrastive(
    neuron_id: usize,
    positive_index: usize,
    acts: &[f32],
    embeddings: &EmbeddingMatrix,
    threshold: f64,
) -> Result<ContrastiveSample, RetrievalError> {
    let positive_row = embeddings.row(positive_index);
    let mut best: Option<ContrastiveSample> = None;
    for (index, &act) in acts.iter().enumerate() {
        if index == positive_index {
            continue;
        }
        let activation = act as f64;
        if activation >= threshold {
            continue;
        }
        let similarity = dot_f32(positive_row, embeddings.row(index));
        let better = match &best {
            None => true,
            Some(b) => similarity > b.similarity,
        };
        if better {
            best = Some(ContrastiveSample {
                index,
                activation,
                similarity,
            });
        }
    }
    best.ok_or(RetrievalError::NoEligibleContrastive {
        neuron_id,
        threshold,
    })
}

fn evidence_for_neuron(
    neuron_id: usize,
    acts: &[f32],
    embeddings: &EmbeddingMatrix,
    k: usize,
    fallback: Fallback,
) -> Result<NeuronEvidence, RetrievalError> {
    let positives = select_positives(acts, k)?;
    let mean = mean_activation(acts);
    let mut median = None;
    let mut contrastives = Vec::with_capacity(k);
    for positive in &positives {
        let found = select_contrastive(neuron_id, positive.index, acts, embeddings, mean);
        let found = match (found, fallback) {
            (Err(RetrievalError::NoEligibleContrastive { .. }), Fallback::Quantile) => {
                let q = *median.get_or_insert_with(|| median_activation(acts));
                select_contrastive(neuron_id, positive.index, acts, embeddings, q)
            }
            (other, _) => other,
        }?;
        contrastives.push(found);
    }
    Ok(NeuronEvidence {
        neuron_id,
        mean_activation: mean,
        positives,
        contrastives,
    })
}

/// Builds evidence for every neuron, in parallel, merging results in
/// neuron-id order.
pub fn build_evidence(
    acts: &ActivationMatrix,
    embeddings: &EmbeddingMatrix,
    k: usize,
    fallback: Fallback,
) -> Result<EvidenceBatch, RetrievalError> {
    if acts.samples() != embeddings.rows() {
        return Err(RetrievalError::SampleCountMismatch {
            samples: acts.samples(),
            rows: embeddings.rows(),
        });
    }
    let results: Vec<Result<NeuronEvidence, RetrievalError>> = (0..acts.neurons())
        .into_par_iter()
        .map(|n| evidence_for_neuron(n, acts.row(n), embeddings, k, fallback))
        .collect();
    let mut evidence = Vec::new();
    let mut failures = Vec::new();
    for (neuron_id, result) in results.into_iter().enumerate() {
        match result {
            Ok(e) => evidence.push(e),
            Err(RetrievalError::KExceedsSamples { k, samples }) => {
                // Affects every neuron identically; abort instead of
                // emitting one failure per neuron.
                return Err(RetrievalError::KExceedsSamples { k, samples });
            }
            Err(e) => failures.push(NeuronFailure {
                neuron_id,
                error: e.to_string(),
            }),
        }
    }
    Ok(EvidenceBatch {
        k,
        fallback,
        evidence,
        failures,
    })
}
