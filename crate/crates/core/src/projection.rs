//! Neuron-embedding construction and label assignment.
//!
//! The contrastive pipeline subtracts, per evidence pair, the component
//! of the positive embedding that aligns with its contrastive sample
//! (`p − γ·⟨p,n⟩·n`), unit-normalizes each residual, sums them weighted
//! by the positive activations, and scores candidate labels by inner
//! product with the normalized sum. γ = 0 recovers plain positive
//! aggregation; γ = 1 projects fully onto the contrastive's orthogonal
//! complement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{EmbeddingMatrix, LabelVocabulary, SourceTag};
use crate::retrieval::{EvidenceBatch, NeuronEvidence};
use crate::vecmath::{dot_f64, dot_mixed, norm_f64, normalize_f64, widen};

/// Norm below which a vector carries no usable direction.
pub const DEGENERATE_NORM: f64 = 1e-10;

/// Label-assignment pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Pipeline {
    /// Normalized mean of the positive embeddings.
    #[serde(rename = "semanticlens")]
    SemanticLens,
    /// Contrastive semantic projection with strength γ.
    #[serde(rename = "csp")]
    Csp,
    /// Positive-minus-contrastive score difference.
    #[serde(rename = "score-diff")]
    ScoreDiff,
    /// Difference of the positive and contrastive mean embeddings.
    #[serde(rename = "embedding-diff")]
    EmbeddingDiff,
}

impl Pipeline {
    pub const ALL: [Pipeline; 4] = [
        Pipeline::SemanticLens,
        Pipeline::Csp,
        Pipeline::ScoreDiff,
        Pipeline::EmbeddingDiff,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Pipeline::SemanticLens => "semanticlens",
            Pipeline::Csp => "csp",
            Pipeline::ScoreDiff => "score-diff",
            Pipeline::EmbeddingDiff => "embedding-diff",
        }
    }

    /// Only the projection pipeline depends on γ; the others are emitted
    /// once per neuron with a null γ.
    pub fn gamma_dependent(&self) -> bool {
        matches!(self, Pipeline::Csp)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProjectionError {
    #[error("neuron {neuron_id}: evidence holds no positives")]
    EmptyEvidence { neuron_id: usize },
    #[error("neuron {neuron_id}: {context} norm {norm:.3e} below {DEGENERATE_NORM:e}")]
    DegenerateNeuronEmbedding {
        neuron_id: usize,
        context: &'static str,
        norm: f64,
    },
    #[error("vocabulary is empty")]
    EmptyVocabulary,
    #[error("neuron {neuron_id}: {positives} positives but {residuals} residuals")]
    ResidualCountMismatch {
        neuron_id: usize,
        positives: usize,
        residuals: usize,
    },
}

/// A unit-normalized semantic direction for one neuron.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronEmbedding {
    pub neuron_id: usize,
    pub vector: Vec<f64>,
    pub gamma: Option<f64>,
    pub pipeline: Pipeline,
}

impl NeuronEmbedding {
    /// Normalizes `vector`; fails when the pre-normalization norm is
    /// below [`DEGENERATE_NORM`].
    pub fn new(
        neuron_id: usize,
        mut vector: Vec<f64>,
        gamma: Option<f64>,
        pipeline: Pipeline,
    ) -> Result<Self, ProjectionError> {
        let norm = normalize_f64(&mut vector);
        if norm < DEGENERATE_NORM {
            return Err(ProjectionError::DegenerateNeuronEmbedding {
                neuron_id,
                context: "neuron embedding",
                norm,
            });
        }
        Ok(Self {
            neuron_id,
            vector,
            gamma,
            pipeline,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredLabel {
    pub label: String,
    pub score: f64,
}

/// The argmax label for one (neuron, pipeline, γ) cell plus runner-up
/// alternatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelAssignment {
    pub neuron_id: usize,
    pub pipeline: Pipeline,
    pub gamma: Option<f64>,
    pub label: String,
    pub score: f64,
    pub source_tag: SourceTag,
    pub alternatives: Vec<ScoredLabel>,
}

/// Mean of the embeddings at `indices` (no normalization here).
fn mean_embedding(embeddings: &EmbeddingMatrix, indices: &[usize]) -> Vec<f64> {
    let dim = embeddings.dim();
    let mut sum = vec![0.0f64; dim];
    for &i in indices {
        for (s, v) in sum.iter_mut().zip(embeddings.row(i)) {
            *s += *v as f64;
        }
    }
    let inv = 1.0 / indices.len() as f64;
    for s in sum.iter_mut() {
        *s *= inv;
    }
    sum
}

/// Arithmetic mean of the positive embeddings.
pub fn positive_embedding(
    evidence: &NeuronEvidence,
    embeddings: &EmbeddingMatrix,
) -> Result<Vec<f64>, ProjectionError> {
    if evidence.positives.is_empty() {
        return Err(ProjectionError::EmptyEvidence {
            neuron_id: evidence.neuron_id,
        });
    }
    let indices: Vec<usize> = evidence.positives.iter().map(|p| p.index).collect();
    Ok(mean_embedding(embeddings, &indices))
}

/// Arithmetic mean of the contrastive embeddings, the mirror of
/// [`positive_embedding`].
pub fn contrastive_embedding(
    evidence: &NeuronEvidence,
    embeddings: &EmbeddingMatrix,
) -> Result<Vec<f64>, ProjectionError> {
    if evidence.contrastives.is_empty() {
        return Err(ProjectionError::EmptyEvidence {
            neuron_id: evidence.neuron_id,
        });
    }
    let indices: Vec<usize> = evidence.contrastives.iter().map(|c| c.index).collect();
    Ok(mean_embedding(embeddings, &indices))
}

/// Contrastively adjusted embedding `p − γ·⟨p,n⟩·n`. Total on valid
/// inputs; a fully overlapping pair at γ = 1 yields the zero vector,
/// which downstream normalization rejects.
pub fn csp_residual(pos: &[f64], neg: &[f64], gamma: f64) -> Vec<f64> {
    if gamma == 0.0 {
        return pos.to_vec();
    }
    let overlap = dot_f64(pos, neg);
    pos.iter()
        .zip(neg)
        .map(|(p, n)| p - gamma * overlap * n)
        .collect()
}

/// Result of the activation-weighted residual aggregation.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedAggregate {
    /// Unit-normalized weighted sum.
    pub vector: Vec<f64>,
    /// Pair indices whose residual norm fell below [`DEGENERATE_NORM`].
    pub dropped_pairs: Vec<usize>,
}

/// Unit-normalizes each residual, weights it by its positive's
/// activation, sums, and normalizes the sum. Degenerate residuals are
/// dropped rather than zero-padded; if every pair drops the neuron is
/// unlabelable at this γ.
pub fn aggregate_weighted(
    evidence: &NeuronEvidence,
    residuals: &[Vec<f64>],
) -> Result<WeightedAggregate, ProjectionError> {
    if evidence.positives.is_empty() {
        return Err(ProjectionError::EmptyEvidence {
            neuron_id: evidence.neuron_id,
        });
    }
    if residuals.len() != evidence.positives.len() {
        return Err(ProjectionError::ResidualCountMismatch {
            neuron_id: evidence.neuron_id,
            positives: evidence.positives.len(),
            residuals: residuals.len(),
        });
    }
    let dim = residuals[0].len();
    let mut sum = vec![0.0f64; dim];
    let mut dropped = Vec::new();
    for (k, residual) in residuals.iter().enumerate() {
        let norm = norm_f64(residual);
        if norm < DEGENERATE_NORM {
            dropped.push(k);
            continue;
        }
        let weight = evidence.positives[k].activation / norm;
        for (s, v) in sum.iter_mut().zip(residual) {
            *s += weight * v;
        }
    }
    if dropped.len() == residuals.len() {
        return Err(ProjectionError::DegenerateNeuronEmbedding {
            neuron_id: evidence.neuron_id,
            context: "all residuals degenerate; weighted sum",
            norm: 0.0,
        });
    }
    let norm = normalize_f64(&mut sum);
    if norm < DEGENERATE_NORM {
        return Err(ProjectionError::DegenerateNeuronEmbedding {
            neuron_id: evidence.neuron_id,
            context: "weighted residual sum",
            norm,
        });
    }
    Ok(WeightedAggregate {
        vector: sum,
        dropped_pairs: dropped,
    })
}

/// Inner product of a neuron embedding with one label embedding.
pub fn score_label(embedding: &NeuronEmbedding, label_vec: &[f32]) -> f64 {
    dot_mixed(&embedding.vector, label_vec)
}

/// Maximum-score label with ascending-vocabulary-index tie-break, plus
/// the `top_n` next-best alternatives.
pub fn assign_label(
    embedding: &NeuronEmbedding,
    vocab: &LabelVocabulary,
    top_n: usize,
) -> Result<LabelAssignment, ProjectionError> {
    let scores: Vec<f64> = (0..vocab.len())
        .map(|i| score_label(embedding, vocab.embedding(i)))
        .collect();
    assignment_from_scores(
        embedding.neuron_id,
        embedding.pipeline,
        embedding.gamma,
        &scores,
        vocab,
        top_n,
    )
}

fn assignment_from_scores(
    neuron_id: usize,
    pipeline: Pipeline,
    gamma: Option<f64>,
    scores: &[f64],
    vocab: &LabelVocabulary,
    top_n: usize,
) -> Result<LabelAssignment, ProjectionError> {
    if vocab.is_empty() {
        return Err(ProjectionError::EmptyVocabulary);
    }
    let mut best = 0usize;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let alternatives = order
        .into_iter()
        .filter(|&i| i != best)
        .take(top_n)
        .map(|i| ScoredLabel {
            label: vocab.label(i).to_string(),
            score: scores[i],
        })
        .collect();
    Ok(LabelAssignment {
        neuron_id,
        pipeline,
        gamma,
        label: vocab.label(best).to_string(),
        score: scores[best],
        source_tag: vocab.source_tag(best),
        alternatives,
    })
}

/// Plain positive aggregation: normalized mean of the positive
/// embeddings, then argmax scoring.
pub fn assign_semanticlens(
    evidence: &NeuronEvidence,
    embeddings: &EmbeddingMatrix,
    vocab: &LabelVocabulary,
    top_n: usize,
) -> Result<LabelAssignment, ProjectionError> {
    let mean = positive_embedding(evidence, embeddings)?;
    let embedding = NeuronEmbedding::new(evidence.neuron_id, mean, None, Pipeline::SemanticLens)?;
    assign_label(&embedding, vocab, top_n)
}

/// Contrastive semantic projection at strength γ. Also returns the pair
/// indices dropped for degenerate residuals.
pub fn assign_csp(
    evidence: &NeuronEvidence,
    embeddings: &EmbeddingMatrix,
    vocab: &LabelVocabulary,
    gamma: f64,
    top_n: usize,
) -> Result<(LabelAssignment, Vec<usize>), ProjectionError> {
    let embedding = csp_embedding(evidence, embeddings, gamma)?;
    let assignment = assign_label(&embedding.0, vocab, top_n)?;
    Ok((assignment, embedding.1))
}

/// Builds the projected neuron embedding without scoring it.
pub fn csp_embedding(
    evidence: &NeuronEvidence,
    embeddings: &EmbeddingMatrix,
    gamma: f64,
) -> Result<(NeuronEmbedding, Vec<usize>), ProjectionError> {
    if evidence.positives.is_empty() {
        return Err(ProjectionError::EmptyEvidence {
            neuron_id: evidence.neuron_id,
        });
    }
    let residuals: Vec<Vec<f64>> = evidence
        .positives
        .iter()
        .zip(&evidence.contrastives)
        .map(|(p, c)| {
            let pos = widen(embeddings.row(p.index));
            let neg = widen(embeddings.row(c.index));
            csp_residual(&pos, &neg, gamma)
        })
        .collect();
    let aggregate = aggregate_weighted(evidence, &residuals)?;
    let embedding = NeuronEmbedding {
        neuron_id: evidence.neuron_id,
        vector: aggregate.vector,
        gamma: Some(gamma),
        pipeline: Pipeline::Csp,
    };
    Ok((embedding, aggregate.dropped_pairs))
}

fn normalized_mean(
    neuron_id: usize,
    mean: Vec<f64>,
    context: &'static str,
) -> Result<Vec<f64>, ProjectionError> {
    let mut v = mean;
    let norm = normalize_f64(&mut v);
    if norm < DEGENERATE_NORM {
        return Err(ProjectionError::DegenerateNeuronEmbedding {
            neuron_id,
            context,
            norm,
        });
    }
    Ok(v)
}

/// Argmax of the positive-minus-contrastive score difference, both sides
/// scored from their normalized mean embeddings.
pub fn assign_score_diff(
    evidence: &NeuronEvidence,
    embeddings: &EmbeddingMatrix,
    vocab: &LabelVocabulary,
    top_n: usize,
) -> Result<LabelAssignment, ProjectionError> {
    if vocab.is_empty() {
        return Err(ProjectionError::EmptyVocabulary);
    }
    let pos = normalized_mean(
        evidence.neuron_id,
        positive_embedding(evidence, embeddings)?,
        "positive mean",
    )?;
    let neg = normalized_mean(
        evidence.neuron_id,
        contrastive_embedding(evidence, embeddings)?,
        "contrastive mean",
    )?;
    let scores: Vec<f64> = (0..vocab.len())
        .map(|i| {
            let t = vocab.embedding(i);
            dot_mixed(&pos, t) - dot_mixed(&neg, t)
        })
        .collect();
    assignment_from_scores(
        evidence.neuron_id,
        Pipeline::ScoreDiff,
        None,
        &scores,
        vocab,
        top_n,
    )
}

/// Argmax over the normalized difference of the positive and contrastive
/// mean embeddings.
pub fn assign_embedding_diff(
    evidence: &NeuronEvidence,
    embeddings: &EmbeddingMatrix,
    vocab: &LabelVocabulary,
    top_n: usize,
) -> Result<LabelAssignment, ProjectionError> {
    let pos = normalized_mean(
        evidence.neuron_id,
        positive_embedding(evidence, embeddings)?,
        "positive mean",
    )?;
    let neg = normalized_mean(
        evidence.neuron_id,
        contrastive_embedding(evidence, embeddings)?,
        "contrastive mean",
    )?;
    let diff: Vec<f64> = pos.iter().zip(&neg).map(|(p, n)| p - n).collect();
    let embedding = NeuronEmbedding::new(evidence.neuron_id, diff, None, Pipeline::EmbeddingDiff)?;
    assign_label(&embedding, vocab, top_n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentFailure {
    pub neuron_id: usize,
    pub pipeline: Pipeline,
    pub gamma: Option<f64>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedResiduals {
    pub neuron_id: usize,
    pub gamma: f64,
    pub pair_indices: Vec<usize>,
}

/// Every assignment of a batch run plus per-cell failures and residual
/// drop diagnostics, in canonical order (neuron id, then γ with null
/// first, then pipeline tag).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentBatch {
    pub assignments: Vec<LabelAssignment>,
    pub failures: Vec<AssignmentFailure>,
    pub dropped_residuals: Vec<DroppedResiduals>,
}

/// Runs every requested (pipeline, γ) cell for every neuron in the
/// evidence batch. γ-independent pipelines run once per neuron.
pub fn assign_all(
    batch: &EvidenceBatch,
    embeddings: &EmbeddingMatrix,
    vocab: &LabelVocabulary,
    gammas: &[f64],
    pipelines: &[Pipeline],
    top_n: usize,
) -> AssignmentBatch {
    let mut jobs: Vec<(Pipeline, Option<f64>)> = Vec::new();
    let mut independent: Vec<&Pipeline> =
        pipelines.iter().filter(|p| !p.gamma_dependent()).collect();
    independent.sort_by_key(|p| p.tag());
    for p in independent {
        jobs.push((*p, None));
    }
    let mut sorted_gammas = gammas.to_vec();
    sorted_gammas.sort_by(f64::total_cmp);
    sorted_gammas.dedup();
    let mut dependent: Vec<&Pipeline> = pipelines.iter().filter(|p| p.gamma_dependent()).collect();
    dependent.sort_by_key(|p| p.tag());
    for g in &sorted_gammas {
        for p in &dependent {
            jobs.push((**p, Some(*g)));
        }
    }

    let per_neuron: Vec<(
        Vec<LabelAssignment>,
        Vec<AssignmentFailure>,
        Vec<DroppedResiduals>,
    )> = batch
        .evidence
        .par_iter()
        .map(|evidence| {
            let mut assignments = Vec::new();
            let mut failures = Vec::new();
            let mut dropped = Vec::new();
            for (pipeline, gamma) in &jobs {
                let result = match (pipeline, gamma) {
                    (Pipeline::SemanticLens, _) => {
                        assign_semanticlens(evidence, embeddings, vocab, top_n)
                    }
                    (Pipeline::ScoreDiff, _) => {
                        assign_score_diff(evidence, embeddings, vocab, top_n)
                    }
                    (Pipeline::EmbeddingDiff, _) => {
                        assign_embedding_diff(evidence, embeddings, vocab, top_n)
                    }
                    (Pipeline::Csp, Some(g)) => assign_csp(evidence, embeddings, vocab, *g, top_n)
                        .map(|(assignment, pairs)| {
                            if !pairs.is_empty() {
                                dropped.push(DroppedResiduals {
                                    neuron_id: evidence.neuron_id,
                                    gamma: *g,
                                    pair_indices: pairs,
                                });
                            }
                            assignment
                        }),
                    (Pipeline::Csp, None) => unreachable!("csp jobs carry a gamma"),
                };
                match result {
                    Ok(a) => assignments.push(a),
                    Err(e) => failures.push(AssignmentFailure {
                        neuron_id: evidence.neuron_id,
                        pipeline: *pipeline,
                        gamma: *gamma,
                        error: e.to_string(),
                    }),
                }
            }
            (assignments, failures, dropped)
        })
        .collect();

    let mut out = AssignmentBatch {
        assignments: Vec::new(),
        failures: Vec::new(),
        dropped_residuals: Vec::new(),
    };
    for (a, f, d) in per_neuron {
        out.assignments.extend(a);
        out.failures.extend(f);
        out.dropped_residuals.extend(d);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ActivationMatrix;
    use crate::retrieval::{build_evidence, ContrastiveSample, Fallback, PositiveSample};
    use crate::rng::SplitMix64;

    fn evidence_with(
        positives: Vec<(usize, f64)>,
        contrastives: Vec<(usize, f64, f64)>,
    ) -> NeuronEvidence {
        NeuronEvidence {
            neuron_id: 0,
            mean_activation: 0.0,
            positives: positives
                .into_iter()
                .map(|(index, activation)| PositiveSample { index, activation })
                .collect(),
            contrastives: contrastives
                .into_iter()
                .map(|(index, activation, similarity)| ContrastiveSample {
                    index,
                    activation,
                    similarity,
                })
                .collect(),
        }
    }

    fn vocab2() -> LabelVocabulary {
        let emb = EmbeddingMatrix::new(2, 2, vec![1.0, 0.0, 0.8, 0.6], None).unwrap();
        LabelVocabulary::new(
            vec!["first".into(), "second".into()],
            vec![SourceTag::Baseline, SourceTag::Baseline],
            emb,
        )
        .unwrap()
    }

    #[test]
    fn positive_mean_of_orthonormal_rows() {
        let emb = EmbeddingMatrix::from_rows_f64(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let e = evidence_with(vec![(0, 1.0), (1, 1.0)], vec![]);
        let mean = positive_embedding(&e, &emb).unwrap();
        assert_eq!(mean, vec![0.5, 0.5]);
    }

    #[test]
    fn positive_mean_of_single_row_is_the_row() {
        let emb = EmbeddingMatrix::from_rows_f64(&[vec![0.6, 0.8]]).unwrap();
        let e = evidence_with(vec![(0, 1.0)], vec![]);
        let mean = positive_embedding(&e, &emb).unwrap();
        for (m, v) in mean.iter().zip(emb.row(0)) {
            assert!((m - *v as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn positive_mean_matches_naive_sum_oracle() {
        let mut rng = SplitMix64::new(42);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..12).map(|_| rng.next_gaussian()).collect())
            .collect();
        let emb = EmbeddingMatrix::from_rows_f64(&rows).unwrap();
        let e = evidence_with((0..30).map(|i| (i, 1.0)).collect(), vec![]);
        let mean = positive_embedding(&e, &emb).unwrap();
        for d in 0..12 {
            let mut sum = 0.0f64;
            for i in 0..30 {
                sum += emb.row(i)[d] as f64;
            }
            assert!((mean[d] - sum / 30.0).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_with_orthogonal_contrastive_is_identity() {
        let v = csp_residual(&[1.0, 0.0], &[0.0, 1.0], 1.0);
        assert_eq!(v, vec![1.0, 0.0]);
    }

    #[test]
    fn residual_with_full_overlap_annihilates() {
        let v = csp_residual(&[1.0, 0.0], &[1.0, 0.0], 1.0);
        assert_eq!(v, vec![0.0, 0.0]);
    }

    #[test]
    fn residual_hand_arithmetic() {
        // overlap 0.6, so the adjusted vector is (0.6, 0.8) − 0.3·(1, 0).
        let v = csp_residual(&[0.6, 0.8], &[1.0, 0.0], 0.5);
        assert!((v[0] - 0.3).abs() < 1e-15);
        assert!((v[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn gamma_zero_returns_positive_unchanged() {
        let pos = vec![0.3, -0.4, 0.8660254];
        assert_eq!(csp_residual(&pos, &[0.0, 1.0, 0.0], 0.0), pos);
    }

    #[test]
    fn aggregate_single_pair_hand_example() {
        let e = evidence_with(vec![(0, 2.0)], vec![(1, 0.0, 0.0)]);
        let agg = aggregate_weighted(&e, &[vec![0.3, 0.4]]).unwrap();
        assert!((agg.vector[0] - 0.6).abs() < 1e-12);
        assert!((agg.vector[1] - 0.8).abs() < 1e-12);
        assert!(agg.dropped_pairs.is_empty());
    }

    #[test]
    fn aggregate_uniform_weights_matches_mean_direction() {
        let mut rng = SplitMix64::new(4);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                let mut r: Vec<f64> = (0..6).map(|_| rng.next_gaussian()).collect();
                normalize_f64(&mut r);
                r
            })
            .collect();
        let e = evidence_with((0..5).map(|i| (i, 1.5)).collect(), vec![]);
        let agg = aggregate_weighted(&e, &rows).unwrap();
        let mut mean = vec![0.0f64; 6];
        for r in &rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        normalize_f64(&mut mean);
        for (a, m) in agg.vector.iter().zip(&mean) {
            assert!((a - m).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_drops_degenerate_residuals() {
        let e = evidence_with(vec![(0, 1.0), (1, 1.0)], vec![(2, 0.0, 0.0), (3, 0.0, 0.0)]);
        let agg = aggregate_weighted(&e, &[vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(agg.dropped_pairs, vec![0]);
        assert!((agg.vector[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aggregate_fails_when_all_residuals_degenerate() {
        let e = evidence_with(vec![(0, 1.0)], vec![(1, 0.0, 0.0)]);
        let err = aggregate_weighted(&e, &[vec![0.0, 0.0]]).unwrap_err();
        assert!(matches!(
            err,
            ProjectionError::DegenerateNeuronEmbedding { .. }
        ));
    }

    #[test]
    fn score_is_inner_product() {
        let emb = NeuronEmbedding::new(0, vec![1.0, 0.0], None, Pipeline::SemanticLens).unwrap();
        assert_eq!(score_label(&emb, &[1.0, 0.0]), 1.0);
        assert_eq!(score_label(&emb, &[0.0, 1.0]), 0.0);
    }

    #[test]
    fn score_matches_naive_dot_oracle() {
        let mut rng = SplitMix64::new(8);
        for _ in 0..50 {
            let mut v: Vec<f64> = (0..16).map(|_| rng.next_gaussian()).collect();
            normalize_f64(&mut v);
            let t: Vec<f32> = (0..16).map(|_| rng.next_gaussian() as f32).collect();
            let emb = NeuronEmbedding::new(0, v.clone(), None, Pipeline::Csp).unwrap();
            let mut oracle = 0.0f64;
            for i in 0..16 {
                oracle += emb.vector[i] * t[i] as f64;
            }
            assert!((score_label(&emb, &t) - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn assignment_picks_max_score() {
        let emb = NeuronEmbedding::new(0, vec![1.0, 0.0], None, Pipeline::SemanticLens).unwrap();
        let a = assign_label(&emb, &vocab2(), 1).unwrap();
        assert_eq!(a.label, "first");
        assert!((a.score - 1.0).abs() < 1e-9);
        assert_eq!(a.alternatives.len(), 1);
        assert_eq!(a.alternatives[0].label, "second");
    }

    #[test]
    fn singleton_vocabulary_assigns_its_label() {
        let emb_m = EmbeddingMatrix::new(1, 2, vec![0.0, 1.0], None).unwrap();
        let vocab =
            LabelVocabulary::new(vec!["only".into()], vec![SourceTag::Baseline], emb_m).unwrap();
        let emb = NeuronEmbedding::new(0, vec![1.0, 0.0], None, Pipeline::SemanticLens).unwrap();
        assert_eq!(assign_label(&emb, &vocab, 3).unwrap().label, "only");
    }

    #[test]
    fn large_vocabulary_matches_exhaustive_scan() {
        let mut rng = SplitMix64::new(77);
        let rows: Vec<Vec<f64>> = (0..10_000)
            .map(|_| (0..8).map(|_| rng.next_gaussian()).collect())
            .collect();
        let vocab_emb = EmbeddingMatrix::from_rows_f64(&rows).unwrap();
        let labels: Vec<String> = (0..10_000).map(|i| format!("label_{i}")).collect();
        let vocab =
            LabelVocabulary::new(labels, vec![SourceTag::Baseline; 10_000], vocab_emb).unwrap();
        let mut v: Vec<f64> = (0..8).map(|_| rng.next_gaussian()).collect();
        normalize_f64(&mut v);
        let emb = NeuronEmbedding::new(0, v, None, Pipeline::Csp).unwrap();
        let a = assign_label(&emb, &vocab, 2).unwrap();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for i in 0..vocab.len() {
            let s = dot_mixed(&emb.vector, vocab.embedding(i));
            if s > best_score {
                best_score = s;
                best = i;
            }
        }
        assert_eq!(a.label, vocab.label(best));
        assert!((a.score - best_score).abs() < 1e-15);
    }

    #[test]
    fn empty_vocabulary_errors() {
        let emb_m = EmbeddingMatrix::new(0, 2, vec![], None).unwrap();
        let vocab = LabelVocabulary::new(vec![], vec![], emb_m).unwrap();
        let emb = NeuronEmbedding::new(0, vec![1.0, 0.0], None, Pipeline::SemanticLens).unwrap();
        assert!(matches!(
            assign_label(&emb, &vocab, 1),
            Err(ProjectionError::EmptyVocabulary)
        ));
    }

    #[test]
    fn assignment_score_recomputable_from_embedding() {
        let mut rng = SplitMix64::new(13);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..6).map(|_| rng.next_gaussian()).collect())
            .collect();
        let vocab_emb = EmbeddingMatrix::from_rows_f64(&rows).unwrap();
        let vocab = LabelVocabulary::new(
            (0..20).map(|i| format!("l{i}")).collect(),
            vec![SourceTag::Baseline; 20],
            vocab_emb,
        )
        .unwrap();
        let mut v: Vec<f64> = (0..6).map(|_| rng.next_gaussian()).collect();
        normalize_f64(&mut v);
        let emb = NeuronEmbedding::new(3, v, Some(0.5), Pipeline::Csp).unwrap();
        let a = assign_label(&emb, &vocab, 1).unwrap();
        let idx = vocab.labels().iter().position(|l| *l == a.label).unwrap();
        let recomputed = score_label(&emb, vocab.embedding(idx));
        assert!((a.score - recomputed).abs() < 1e-9);
    }

    #[test]
    fn score_diff_hand_example() {
        let emb = EmbeddingMatrix::from_rows_f64(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let e = evidence_with(vec![(0, 1.0)], vec![(1, 0.0, 0.0)]);
        let a = assign_score_diff(&e, &emb, &vocab2(), 1).unwrap();
        assert_eq!(a.label, "first");
        assert!((a.score - 1.0).abs() < 1e-9);
        assert!((a.alternatives[0].score - 0.2).abs() < 1e-6);
    }

    #[test]
    fn score_diff_symmetric_cancellation_ties_to_index_zero() {
        let emb = EmbeddingMatrix::from_rows_f64(&[vec![1.0, 0.0]]).unwrap();
        let e = evidence_with(vec![(0, 1.0)], vec![(0, 0.0, 1.0)]);
        let a = assign_score_diff(&e, &emb, &vocab2(), 1).unwrap();
        assert_eq!(a.label, "first");
        assert!(a.score.abs() < 1e-12);
    }

    #[test]
    fn score_diff_matches_brute_force() {
        let mut rng = SplitMix64::new(31);
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|_| (0..5).map(|_| rng.next_gaussian()).collect())
            .collect();
        let emb = EmbeddingMatrix::from_rows_f64(&rows).unwrap();
        let vrows: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..5).map(|_| rng.next_gaussian()).collect())
            .collect();
        let vocab = LabelVocabulary::new(
            (0..100).map(|i| format!("v{i}")).collect(),
            vec![SourceTag::Baseline; 100],
            EmbeddingMatrix::from_rows_f64(&vrows).unwrap(),
        )
        .unwrap();
        let e = evidence_with(
            vec![(0, 1.0), (1, 2.0), (2, 0.5)],
            vec![(3, 0.0, 0.0), (4, 0.0, 0.0), (5, 0.0, 0.0)],
        );
        let a = assign_score_diff(&e, &emb, &vocab, 1).unwrap();
        let mut pos = positive_embedding(&e, &emb).unwrap();
        let mut neg = contrastive_embedding(&e, &emb).unwrap();
        normalize_f64(&mut pos);
        normalize_f64(&mut neg);
        let mut best = (0, f64::NEG_INFINITY);
        for i in 0..vocab.len() {
            let t = vocab.embedding(i);
            let s = dot_mixed(&pos, t) - dot_mixed(&neg, t);
            if s > best.1 {
                best = (i, s);
            }
        }
        assert_eq!(a.label, vocab.label(best.0));
    }

    #[test]
    fn embedding_diff_hand_example() {
        let emb = EmbeddingMatrix::from_rows_f64(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let e = evidence_with(vec![(0, 1.0)], vec![(1, 0.0, 0.0)]);
        let a = assign_embedding_diff(&e, &emb, &vocab2(), 1).unwrap();
        assert_eq!(a.label, "first");
        assert!((a.score - 1.0 / 2.0f64.sqrt()).abs() < 1e-6);
        assert!((a.alternatives[0].score - 0.2 / 2.0f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn embedding_diff_equal_means_error() {
        let emb = EmbeddingMatrix::from_rows_f64(&[vec![1.0, 0.0]]).unwrap();
        let e = evidence_with(vec![(0, 1.0)], vec![(0, 0.0, 1.0)]);
        assert!(matches!(
            assign_embedding_diff(&e, &emb, &vocab2(), 1),
            Err(ProjectionError::DegenerateNeuronEmbedding { .. })
        ));
    }

    #[test]
    fn semanticlens_equals_csp_gamma_zero_with_uniform_activations() {
        let mut rng = SplitMix64::new(60);
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|_| (0..7).map(|_| rng.next_gaussian()).collect())
            .collect();
        let emb = EmbeddingMatrix::from_rows_f64(&rows).unwrap();
        let vrows: Vec<Vec<f64>> = (0..9)
            .map(|_| (0..7).map(|_| rng.next_gaussian()).collect())
            .collect();
        let vocab = LabelVocabulary::new(
            (0..9).map(|i| format!("v{i}")).collect(),
            vec![SourceTag::Baseline; 9],
            EmbeddingMatrix::from_rows_f64(&vrows).unwrap(),
        )
        .unwrap();
        let e = evidence_with(
            vec![(0, 3.0), (1, 3.0), (2, 3.0)],
            vec![(3, 0.0, 0.0), (4, 0.0, 0.0), (5, 0.0, 0.0)],
        );
        let sl = assign_semanticlens(&e, &emb, &vocab, 1).unwrap();
        let (csp, _) = assign_csp(&e, &emb, &vocab, 0.0, 1).unwrap();
        assert_eq!(sl.label, csp.label);
    }

    #[test]
    fn batch_emits_gamma_independent_rows_once() {
        let mut rng = SplitMix64::new(90);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..4).map(|_| rng.next_gaussian()).collect())
            .collect();
        let emb = EmbeddingMatrix::from_rows_f64(&rows).unwrap();
        let data: Vec<f32> = (0..2 * 20).map(|_| rng.next_f64() as f32).collect();
        let acts = ActivationMatrix::new(2, 20, data, None).unwrap();
        let evidence = build_evidence(&acts, &emb, 3, Fallback::Error).unwrap();
        let vrows: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..4).map(|_| rng.next_gaussian()).collect())
            .collect();
        let vocab = LabelVocabulary::new(
            (0..5).map(|i| format!("v{i}")).collect(),
            vec![SourceTag::Baseline; 5],
            EmbeddingMatrix::from_rows_f64(&vrows).unwrap(),
        )
        .unwrap();
        let out = assign_all(
            &evidence,
            &emb,
            &vocab,
            &[0.0, 0.5, 1.0],
            &[Pipeline::SemanticLens, Pipeline::Csp],
            1,
        );
        // 1 semanticlens row + 3 csp rows per neuron.
        assert_eq!(out.assignments.len(), 2 * 4);
        let nulls = out.assignments.iter().filter(|a| a.gamma.is_none()).count();
        assert_eq!(nulls, 2);
        // Canonical order within a neuron: null-γ rows, then γ ascending.
        let first_four: Vec<Option<f64>> = out.assignments[..4].iter().map(|a| a.gamma).collect();
        assert_eq!(first_four, vec![None, Some(0.0), Some(0.5), Some(1.0)]);
    }
}
