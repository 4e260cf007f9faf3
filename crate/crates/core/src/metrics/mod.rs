//! Faithfulness metrics and their aggregation.
//!
//! Three per-neuron scores: mean activation on label-conditioned
//! generated images normalized by the probe maximum (DMA), rank-based
//! separation of generated from random activations (AUC), and the
//! Pearson correlation between activations and sigmoid-squashed
//! image-label similarities (SCS).

mod wilcoxon;

pub use wilcoxon::{wilcoxon_paired, WilcoxonResult};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    ActivationMatrix, EmbeddingMatrix, GeneratedActivations, HeldoutSimilarities, SourceTag,
};
use crate::projection::{LabelAssignment, Pipeline};
use crate::rng::SplitMix64;
use crate::vecmath::dot_f32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("probe maximum {0} is not positive; normalization undefined")]
    NonPositiveProbeMax(f64),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least two paired observations, got {0}")]
    TooShort(usize),
    #[error("{0} vector has zero variance")]
    ZeroVariance(&'static str),
    #[error("all paired differences are zero")]
    AllZeroDifferences,
    #[error("aligned sets have mismatched lengths: {0}")]
    MisalignedSets(String),
}

/// Mean activation on generated images, normalized by the probe-set
/// maximum. May exceed 1 when generated images out-activate the probe.
pub fn dma(gen_acts: &[f64], probe_max: f64) -> Result<f64, MetricError> {
    if gen_acts.is_empty() {
        return Err(MetricError::EmptyInput("generated activations"));
    }
    if probe_max <= 0.0 || !probe_max.is_finite() {
        return Err(MetricError::NonPositiveProbeMax(probe_max));
    }
    let mean = gen_acts.iter().sum::<f64>() / gen_acts.len() as f64;
    Ok(mean / probe_max)
}

/// Exact pairwise rank statistic: wins plus half-credit ties over all
/// positive/negative pairs. Quadratic; used when |pos|·|neg| is small.
pub fn auc_exact_pairwise(pos: &[f64], neg: &[f64]) -> Result<f64, MetricError> {
    if pos.is_empty() {
        return Err(MetricError::EmptyInput("positive scores"));
    }
    if neg.is_empty() {
        return Err(MetricError::EmptyInput("negative scores"));
    }
    let mut wins: u64 = 0;
    let mut ties: u64 = 0;
    for p in pos {
        for n in neg {
            if p > n {
                wins += 1;
            } else if p == n {
                ties += 1;
            }
        }
    }
    let pairs = pos.len() as u64 * neg.len() as u64;
    Ok((2 * wins + ties) as f64 / (2 * pairs) as f64)
}

/// Rank-based computation with average ranks for ties; O(n log n).
pub fn auc_rank_based(pos: &[f64], neg: &[f64]) -> Result<f64, MetricError> {
    if pos.is_empty() {
        return Err(MetricError::EmptyInput("positive scores"));
    }
    if neg.is_empty() {
        return Err(MetricError::EmptyInput("negative scores"));
    }
    let mut all: Vec<(f64, bool)> = pos
        .iter()
        .map(|&s| (s, true))
        .chain(neg.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = all.len();
    let mut pos_rank_sum = 0.0f64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && all[j].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for item in &all[i..j] {
            if item.1 {
                pos_rank_sum += avg_rank;
            }
        }
        i = j;
    }
    let np = pos.len() as f64;
    let nn = neg.len() as f64;
    Ok((pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

/// Pair budget below which the exact pairwise route runs.
pub const AUC_EXACT_PAIR_LIMIT: u64 = 1_000_000;

/// Probability that a random positive outranks a random negative, with
/// half credit for ties. Dispatches between the exact and rank-based
/// routes on the pair budget; the two agree to 1e-12 everywhere.
pub fn auc(pos: &[f64], neg: &[f64]) -> Result<f64, MetricError> {
    let pairs = (pos.len() as u64).saturating_mul(neg.len() as u64);
    if pairs <= AUC_EXACT_PAIR_LIMIT {
        auc_exact_pairwise(pos, neg)
    } else {
        auc_rank_based(pos, neg)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Two-pass Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(MetricError::TooShort(x.len()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(MetricError::ZeroVariance("first"));
    }
    if syy == 0.0 {
        return Err(MetricError::ZeroVariance("second"));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Simulation correlation score: Pearson correlation between activations
/// and soft targets `sigmoid(similarity / tau)`.
pub fn scs(acts: &[f64], sims: &[f64], tau: f64) -> Result<f64, MetricError> {
    if acts.len() != sims.len() {
        return Err(MetricError::LengthMismatch {
            left: acts.len(),
            right: sims.len(),
        });
    }
    let soft: Vec<f64> = sims.iter().map(|s| sigmoid(s / tau)).collect();
    pearson(acts, &soft)
}

/// Mean and standard error of the mean (sample standard deviation over
/// √n); singleton groups report no SEM.
pub fn mean_and_sem(values: &[f64]) -> Option<(f64, Option<f64>)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return Some((mean, None));
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Some((mean, Some((var / n).sqrt())))
}

/// Seeded subsample without replacement (partial Fisher-Yates); returns
/// the input unchanged when `count` covers it.
pub fn subsample_seeded(values: &[f64], count: usize, seed: u64) -> Vec<f64> {
    if count >= values.len() {
        return values.to_vec();
    }
    let mut rng = SplitMix64::new(seed);
    let mut indices: Vec<usize> = (0..values.len()).collect();
    for i in 0..count {
        let j = i + rng.next_usize(values.len() - i);
        indices.swap(i, j);
    }
    indices[..count].iter().map(|&i| values[i]).collect()
}

/// Descriptiveness/discriminativeness statistics for a candidate-label
/// set: character lengths, distinct strings, and mean cosine of each
/// label to its positive and contrastive image sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelQualityStats {
    pub candidate_count: usize,
    pub unique_count: usize,
    pub mean_chars: f64,
    pub sem_chars: Option<f64>,
    pub mean_positive_alignment: Option<f64>,
    pub mean_contrastive_alignment: Option<f64>,
    /// Positive minus contrastive alignment.
    pub alignment_gap: Option<f64>,
}

pub fn label_quality(
    candidates: &[String],
    label_embeddings: &EmbeddingMatrix,
    positive_sets: &[Vec<usize>],
    contrastive_sets: &[Vec<usize>],
    image_embeddings: &EmbeddingMatrix,
) -> Result<LabelQualityStats, MetricError> {
    if candidates.is_empty() {
        return Err(MetricError::EmptyInput("candidate labels"));
    }
    if candidates.len() != label_embeddings.rows()
        || candidates.len() != positive_sets.len()
        || candidates.len() != contrastive_sets.len()
    {
        return Err(MetricError::MisalignedSets(format!(
            "{} candidates, {} embedding rows, {} positive sets, {} contrastive sets",
            candidates.len(),
            label_embeddings.rows(),
            positive_sets.len(),
            contrastive_sets.len()
        )));
    }
    let lengths: Vec<f64> = candidates
        .iter()
        .map(|c| c.chars().count() as f64)
        .collect();
    let (mean_chars, sem_chars) = mean_and_sem(&lengths).expect("non-empty");
    let mut unique: Vec<&String> = candidates.iter().collect();
    unique.sort();
    unique.dedup();

    let set_alignment = |sets: &[Vec<usize>]| -> Option<f64> {
        let mut per_label = Vec::new();
        for (i, set) in sets.iter().enumerate() {
            if set.is_empty() {
                continue;
            }
            let label_row = label_embeddings.row(i);
            let mean = set
                .iter()
                .map(|&j| dot_f32(label_row, image_embeddings.row(j)))
                .sum::<f64>()
                / set.len() as f64;
            per_label.push(mean);
        }
        mean_and_sem(&per_label).map(|(m, _)| m)
    };
    let mean_positive_alignment = set_alignment(positive_sets);
    let mean_contrastive_alignment = set_alignment(contrastive_sets);
    let alignment_gap = match (mean_positive_alignment, mean_contrastive_alignment) {
        (Some(p), Some(c)) => Some(p - c),
        _ => None,
    };
    Ok(LabelQualityStats {
        candidate_count: candidates.len(),
        unique_count: unique.len(),
        mean_chars,
        sem_chars,
        mean_positive_alignment,
        mean_contrastive_alignment,
        alignment_gap,
    })
}

/// Per-assignment metric values; absent metrics were either not
/// requested or recorded as diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronMetricsRecord {
    pub neuron_id: usize,
    pub pipeline: Pipeline,
    pub gamma: Option<f64>,
    pub label: String,
    pub source_tag: SourceTag,
    pub dma: Option<f64>,
    pub auc: Option<f64>,
    pub scs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRecord {
    pub pipeline: Pipeline,
    pub gamma: Option<f64>,
    pub metric: String,
    pub count: usize,
    pub mean: f64,
    pub sem: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTagCounts {
    pub pipeline: Pipeline,
    pub gamma: Option<f64>,
    pub baseline: usize,
    pub positive_aug: usize,
    pub contrastive_aug: usize,
}

/// Per-neuron metric records with mean ± SEM aggregates per
/// (pipeline, γ, metric) and per-tag assignment counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaithfulnessReport {
    pub tau: f64,
    pub per_neuron: Vec<NeuronMetricsRecord>,
    pub aggregates: Vec<AggregateRecord>,
    pub source_tag_counts: Vec<SourceTagCounts>,
    /// Expected degradations: whole metric inputs that were not supplied.
    pub notes: Vec<String>,
    /// Per-neuron problems: entries that could not be scored.
    pub diagnostics: Vec<String>,
}

/// Everything `evaluate` may consume. Optional inputs disable their
/// metric; the report's diagnostics say what was skipped and why.
pub struct EvaluationContext<'a> {
    pub probe_activations: &'a ActivationMatrix,
    pub generated: Option<&'a GeneratedActivations>,
    pub random_negatives: Option<&'a ActivationMatrix>,
    pub heldout_activations: Option<&'a ActivationMatrix>,
    pub heldout_similarities: Option<&'a HeldoutSimilarities>,
    pub tau: f64,
    pub subsample_negatives: Option<usize>,
    pub seed: Option<u64>,
}

fn gamma_key(gamma: Option<f64>) -> Option<u64> {
    gamma.map(f64::to_bits)
}

pub fn evaluate(assignments: &[LabelAssignment], ctx: &EvaluationContext) -> FaithfulnessReport {
    let mut notes: Vec<String> = Vec::new();
    let mut diagnostics: Vec<String> = Vec::new();
    if ctx.generated.is_none() {
        notes.push("generated activations not supplied; dma and auc skipped".into());
    } else if ctx.random_negatives.is_none() {
        notes.push("random negatives not supplied; auc skipped".into());
    }
    if ctx.heldout_activations.is_none() || ctx.heldout_similarities.is_none() {
        notes.push("held-out activations or similarities not supplied; scs skipped".into());
    }

    let mut per_neuron = Vec::with_capacity(assignments.len());
    for a in assignments {
        let cell = format!(
            "neuron {} {}{}",
            a.neuron_id,
            a.pipeline.tag(),
            a.gamma.map(|g| format!(" gamma={g}")).unwrap_or_default()
        );
        let probe_row = ctx.probe_activations.row(a.neuron_id);
        let probe_max = probe_row
            .iter()
            .fold(f64::NEG_INFINITY, |m, v| m.max(*v as f64));

        let gen_acts = ctx.generated.and_then(|g| {
            let found = g.get(a.neuron_id, &a.label);
            if found.is_none() {
                diagnostics.push(format!(
                    "{cell}: no generated activations for label {:?}",
                    a.label
                ));
            }
            found
        });

        let dma_value = gen_acts.and_then(|gen| match dma(gen, probe_max) {
            Ok(v) => Some(v),
            Err(e) => {
                diagnostics.push(format!("{cell}: dma skipped: {e}"));
                None
            }
        });

        let auc_value = match (gen_acts, ctx.random_negatives) {
            (Some(gen), Some(negs)) => {
                let neg_row: Vec<f64> = negs.row(a.neuron_id).iter().map(|v| *v as f64).collect();
                let neg_row = match (ctx.subsample_negatives, ctx.seed) {
                    (Some(count), Some(seed)) => subsample_seeded(
                        &neg_row,
                        count,
                        SplitMix64::substream(seed, a.neuron_id as u64).next_u64(),
                    ),
                    _ => neg_row,
                };
                match auc(gen, &neg_row) {
                    Ok(v) => Some(v),
                    Err(e) => {
                        diagnostics.push(format!("{cell}: auc skipped: {e}"));
                        None
                    }
                }
            }
            _ => None,
        };

        let scs_value = match (ctx.heldout_activations, ctx.heldout_similarities) {
            (Some(held), Some(sims)) => match sims.row(&a.label) {
                Some(sim_row) => {
                    let acts: Vec<f64> = held.row(a.neuron_id).iter().map(|v| *v as f64).collect();
                    let sims_f64: Vec<f64> = sim_row.iter().map(|v| *v as f64).collect();
                    match scs(&acts, &sims_f64, ctx.tau) {
                        Ok(v) => Some(v),
                        Err(e) => {
                            diagnostics.push(format!("{cell}: scs skipped: {e}"));
                            None
                        }
                    }
                }
                None => {
                    diagnostics.push(format!("{cell}: no similarity row for label {:?}", a.label));
                    None
                }
            },
            _ => None,
        };

        per_neuron.push(NeuronMetricsRecord {
            neuron_id: a.neuron_id,
            pipeline: a.pipeline,
            gamma: a.gamma,
            label: a.label.clone(),
            source_tag: a.source_tag,
            dma: dma_value,
            auc: auc_value,
            scs: scs_value,
        });
    }

    let mut groups: BTreeMap<(&'static str, Option<u64>), [Vec<f64>; 3]> = BTreeMap::new();
    let mut tag_counts: BTreeMap<(&'static str, Option<u64>), [usize; 3]> = BTreeMap::new();
    let mut gamma_of: BTreeMap<(&'static str, Option<u64>), Option<f64>> = BTreeMap::new();
    let mut pipeline_of: BTreeMap<&'static str, Pipeline> = BTreeMap::new();
    for r in &per_neuron {
        let key = (r.pipeline.tag(), gamma_key(r.gamma));
        gamma_of.insert(key, r.gamma);
        pipeline_of.insert(r.pipeline.tag(), r.pipeline);
        let entry = groups.entry(key).or_default();
        if let Some(v) = r.dma {
            entry[0].push(v);
        }
        if let Some(v) = r.auc {
            entry[1].push(v);
        }
        if let Some(v) = r.scs {
            entry[2].push(v);
        }
        let counts = tag_counts.entry(key).or_default();
        match r.source_tag {
            SourceTag::Baseline => counts[0] += 1,
            SourceTag::PositiveAug => counts[1] += 1,
            SourceTag::ContrastiveAug => counts[2] += 1,
        }
    }

    let mut aggregates = Vec::new();
    for (key, values) in &groups {
        for (metric, vals) in ["dma", "auc", "scs"].iter().zip(values) {
            if let Some((mean, sem)) = mean_and_sem(vals) {
                aggregates.push(AggregateRecord {
                    pipeline: pipeline_of[key.0],
                    gamma: gamma_of[key],
                    metric: metric.to_string(),
                    count: vals.len(),
                    mean,
                    sem,
                });
            }
        }
    }
    let source_tag_counts = tag_counts
        .iter()
        .map(|(key, counts)| SourceTagCounts {
            pipeline: pipeline_of[key.0],
            gamma: gamma_of[key],
            baseline: counts[0],
            positive_aug: counts[1],
            contrastive_aug: counts[2],
        })
        .collect();

    FaithfulnessReport {
        tau: ctx.tau,
        per_neuron,
        aggregates,
        source_tag_counts,
        notes,
        diagnostics,
    }
}
