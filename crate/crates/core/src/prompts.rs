//! VLM-facing boundary: exports contrastive prompt packs and ingests
//! externally generated candidate labels back into the vocabulary.
//!
//! The engine never calls a model; packs are written out as files and
//! candidate lists (with externally computed embeddings) are read back.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, EmbeddingMatrix, LabelVocabulary, SourceTag};
use crate::retrieval::NeuronEvidence;

/// Prompt for a single positive grid. Fixed bytes; a golden test pins
/// them.
pub const POSITIVE_PROMPT: &str = "Find three visual concepts that are shared by all images.\n\
-- Concepts may describe an object class, property, style, or action.\n\
-- Use at most 4 words per concept.\n\
-- Output EXACTLY three concepts, separated by commas.\n\
Answer with the three concepts only.\n\
\n\
Examples (format only):\n\
German Shepherd, red background, black color\n\
\n\
The three concepts that are present in all images are:\n";

/// Prompt for a positive grid paired with a contrastive grid. Fixed
/// bytes; a golden test pins them.
pub const CONTRASTIVE_PROMPT: &str = "You are shown two sets of images:\n\
-- Image-1: images of interest (positives)\n\
-- Image-2: contrastive images (negatives)\n\
\n\
Find three shared visual concepts that are present in all Image-1 images and absent from Image-2 images.\n\
-- Concepts may describe an object class, property, style, or action.\n\
-- Use at most 4 words per concept.\n\
-- Output EXACTLY three concepts, separated by commas.\n\
Answer with the three concepts only.\n\
\n\
Examples (format only):\n\
German Shepherd, red background, black color\n\
The three concepts present in Image-1 but missing in Image-2 are:\n";

/// Expected number of candidate labels per neuron response.
pub const CANDIDATES_PER_NEURON: usize = 3;

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("neuron {neuron_id}: grid needs {needed} samples, evidence has {available}")]
    InsufficientEvidence {
        neuron_id: usize,
        needed: usize,
        available: usize,
    },
    #[error("grid dimensions must be positive, got {rows}x{cols}")]
    EmptyGrid { rows: usize, cols: usize },
    #[error("no embedding supplied for new label {label:?}")]
    MissingLabelEmbedding { label: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptMode {
    #[serde(rename = "positive")]
    Positive,
    #[serde(rename = "contrastive")]
    Contrastive,
}

impl PromptMode {
    pub fn source_tag(&self) -> SourceTag {
        match self {
            PromptMode::Positive => SourceTag::PositiveAug,
            PromptMode::Contrastive => SourceTag::ContrastiveAug,
        }
    }
}

/// An m×n image grid given as ordered sample indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub cells: Vec<usize>,
}

/// One neuron's prompt text plus its grid(s). Contrastive packs carry
/// exactly two grids, positive packs exactly one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptPack {
    pub neuron_id: usize,
    pub mode: PromptMode,
    pub prompt: String,
    pub positive_grid: GridSpec,
    pub contrastive_grid: Option<GridSpec>,
}

/// Builds the prompt pack for one neuron. Grid cells follow the
/// positive activation ranking; the contrastive grid mirrors its paired
/// positives' order.
pub fn export_prompt(
    evidence: &NeuronEvidence,
    mode: PromptMode,
    rows: usize,
    cols: usize,
) -> Result<PromptPack, PromptError> {
    if rows == 0 || cols == 0 {
        return Err(PromptError::EmptyGrid { rows, cols });
    }
    let needed = rows * cols;
    if evidence.positives.len() < needed {
        return Err(PromptError::InsufficientEvidence {
            neuron_id: evidence.neuron_id,
            needed,
            available: evidence.positives.len(),
        });
    }
    let positive_grid = GridSpec {
        rows,
        cols,
        cells: evidence.positives[..needed]
            .iter()
            .map(|p| p.index)
            .collect(),
    };
    let contrastive_grid = match mode {
        PromptMode::Positive => None,
        PromptMode::Contrastive => {
            if evidence.contrastives.len() < needed {
                return Err(PromptError::InsufficientEvidence {
                    neuron_id: evidence.neuron_id,
                    needed,
                    available: evidence.contrastives.len(),
                });
            }
            Some(GridSpec {
                rows,
                cols,
                cells: evidence.contrastives[..needed]
                    .iter()
                    .map(|c| c.index)
                    .collect(),
            })
        }
    };
    Ok(PromptPack {
        neuron_id: evidence.neuron_id,
        mode,
        prompt: match mode {
            PromptMode::Positive => POSITIVE_PROMPT.to_string(),
            PromptMode::Contrastive => CONTRASTIVE_PROMPT.to_string(),
        },
        positive_grid,
        contrastive_grid,
    })
}

/// Case-fold and collapse whitespace so trivially restyled duplicates
/// merge during vocabulary augmentation.
pub fn normalize_label(label: &str) -> String {
    label
        .split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Candidate labels returned for one neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronCandidates {
    pub neuron_id: usize,
    pub labels: Vec<String>,
}

/// A whole response file: which prompt mode produced it and the
/// per-neuron label lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResponses {
    pub mode: PromptMode,
    pub responses: Vec<NeuronCandidates>,
}

impl CandidateResponses {
    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| CorpusError::Manifest(e.to_string()).into())
    }
}

/// Embeddings for new candidate labels: a label-order list aligned with
/// an embedding tensor.
#[derive(Debug, Clone)]
pub struct CandidateEmbeddings {
    labels: BTreeMap<String, usize>,
    matrix: EmbeddingMatrix,
}

#[derive(Serialize, Deserialize)]
struct CandidateEmbeddingFile {
    labels: Vec<String>,
    embeddings: String,
}

impl CandidateEmbeddings {
    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: CandidateEmbeddingFile =
            serde_json::from_str(&text).map_err(|e| CorpusError::Manifest(e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let matrix = EmbeddingMatrix::load(&base.join(&file.embeddings))?;
        if matrix.rows() != file.labels.len() {
            return Err(CorpusError::Manifest(format!(
                "label order file has {} labels for {} embedding rows",
                file.labels.len(),
                matrix.rows()
            ))
            .into());
        }
        let mut labels = BTreeMap::new();
        for (i, label) in file.labels.into_iter().enumerate() {
            labels.insert(label, i);
        }
        Ok(Self { labels, matrix })
    }

    pub fn from_parts(labels: Vec<String>, matrix: EmbeddingMatrix) -> Result<Self, PromptError> {
        if matrix.rows() != labels.len() {
            return Err(CorpusError::Manifest(format!(
                "{} labels for {} embedding rows",
                labels.len(),
                matrix.rows()
            ))
            .into());
        }
        let mut map = BTreeMap::new();
        for (i, label) in labels.into_iter().enumerate() {
            map.insert(label, i);
        }
        Ok(Self {
            labels: map,
            matrix,
        })
    }

    fn row(&self, label: &str) -> Option<&[f32]> {
        self.labels.get(label).map(|i| self.matrix.row(*i))
    }

    fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// What `ingest_candidates` did, for the run diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub mode: PromptMode,
    /// Labels added to the vocabulary, in insertion order.
    pub added: Vec<String>,
    /// Candidate strings dropped as duplicates (of the baseline or of an
    /// earlier candidate under the same tag).
    pub dropped_duplicates: Vec<String>,
    /// Neurons whose response did not carry exactly three candidates.
    pub neurons_with_unexpected_counts: Vec<usize>,
    /// Neurons that returned no candidates at all.
    pub empty_responses: Vec<usize>,
    /// Distinct candidate strings across all responses.
    pub unique_candidates: usize,
    pub mean_candidate_chars: Option<f64>,
    /// Which neurons proposed each added label.
    pub provenance: BTreeMap<String, Vec<usize>>,
}

/// Pools candidate labels into the vocabulary under the mode's source
/// tag. Duplicates of baseline entries are dropped (baseline wins);
/// within the new tag, the first occurrence wins. Every genuinely new
/// label must have an embedding row.
pub fn ingest_candidates(
    responses: &CandidateResponses,
    base_vocab: &LabelVocabulary,
    label_embs: &CandidateEmbeddings,
) -> Result<(LabelVocabulary, IngestReport), PromptError> {
    let tag = responses.mode.source_tag();
    let mut labels: Vec<String> = base_vocab.labels().to_vec();
    let mut tags: Vec<SourceTag> = base_vocab.source_tags().to_vec();
    let mut rows: Vec<Vec<f64>> = (0..base_vocab.len())
        .map(|i| base_vocab.embedding(i).iter().map(|v| *v as f64).collect())
        .collect();
    if !base_vocab.is_empty()
        && !label_embs.labels.is_empty()
        && label_embs.dim() != base_vocab.embeddings().dim()
    {
        return Err(CorpusError::Manifest(format!(
            "candidate embedding dimension ({}) does not match vocabulary ({})",
            label_embs.dim(),
            base_vocab.embeddings().dim()
        ))
        .into());
    }

    let existing: Vec<(String, SourceTag)> = labels
        .iter()
        .zip(&tags)
        .map(|(l, t)| (normalize_label(l), *t))
        .collect();
    let blocks = |normalized: &str, existing: &[(String, SourceTag)]| {
        existing
            .iter()
            .any(|(l, t)| l == normalized && (*t == SourceTag::Baseline || *t == tag))
    };

    let mut report = IngestReport {
        mode: responses.mode,
        added: Vec::new(),
        dropped_duplicates: Vec::new(),
        neurons_with_unexpected_counts: Vec::new(),
        empty_responses: Vec::new(),
        unique_candidates: 0,
        mean_candidate_chars: None,
        provenance: BTreeMap::new(),
    };

    let mut all_candidates: Vec<&String> = Vec::new();
    let mut merged = existing;
    let mut sorted_responses: Vec<&NeuronCandidates> = responses.responses.iter().collect();
    sorted_responses.sort_by_key(|r| r.neuron_id);
    for response in sorted_responses {
        if response.labels.is_empty() {
            report.empty_responses.push(response.neuron_id);
            continue;
        }
        if response.labels.len() != CANDIDATES_PER_NEURON {
            report
                .neurons_with_unexpected_counts
                .push(response.neuron_id);
        }
        for label in &response.labels {
            all_candidates.push(label);
            let normalized = normalize_label(label);
            if normalized.is_empty() {
                report.dropped_duplicates.push(label.clone());
                continue;
            }
            if blocks(&normalized, &merged) {
                report.dropped_duplicates.push(label.clone());
                // Still record which neuron proposed an already-known label.
                if let Some(neurons) = report.provenance.get_mut(&normalized) {
                    if !neurons.contains(&response.neuron_id) {
                        neurons.push(response.neuron_id);
                    }
                }
                continue;
            }
            let row = label_embs
                .row(label)
                .ok_or_else(|| PromptError::MissingLabelEmbedding {
                    label: label.clone(),
                })?;
            labels.push(label.clone());
            tags.push(tag);
            rows.push(row.iter().map(|v| *v as f64).collect());
            merged.push((normalized.clone(), tag));
            report.added.push(label.clone());
            report
                .provenance
                .insert(normalized, vec![response.neuron_id]);
        }
    }

    let mut unique: Vec<&&String> = all_candidates.iter().collect();
    unique.sort();
    unique.dedup();
    report.unique_candidates = unique.len();
    if !all_candidates.is_empty() {
        let lengths: Vec<f64> = all_candidates
            .iter()
            .map(|c| c.chars().count() as f64)
            .collect();
        report.mean_candidate_chars = crate::metrics::mean_and_sem(&lengths).map(|(m, _)| m);
    }

    let dim = rows.first().map_or(label_embs.dim(), Vec::len);
    let embeddings = if rows.is_empty() {
        EmbeddingMatrix::new(0, dim, vec![], None).map_err(PromptError::from)?
    } else {
        EmbeddingMatrix::from_rows_f64(&rows).map_err(PromptError::from)?
    };
    let vocab = LabelVocabulary::new(labels, tags, embeddings)?;
    Ok((vocab, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::{ContrastiveSample, PositiveSample};

    fn evidence(k: usize) -> NeuronEvidence {
        NeuronEvidence {
            neuron_id: 7,
            mean_activation: 0.5,
            positives: (0..k)
                .map(|i| PositiveSample {
                    index: 10 + i,
                    activation: (k - i) as f64,
                })
                .collect(),
            contrastives: (0..k)
                .map(|i| ContrastiveSample {
                    index: 100 + i,
                    activation: 0.1,
                    similarity: 0.9,
                })
                .collect(),
        }
    }

    #[test]
    fn contrastive_prompt_contains_pinned_answer_line() {
        let pack = export_prompt(&evidence(9), PromptMode::Contrastive, 3, 3).unwrap();
        assert!(pack
            .prompt
            .contains("The three concepts present in Image-1 but missing in Image-2 are:"));
        assert_eq!(pack.contrastive_grid.as_ref().unwrap().cells.len(), 9);
    }

    #[test]
    fn positive_prompt_contains_pinned_answer_line() {
        let pack = export_prompt(&evidence(9), PromptMode::Positive, 3, 3).unwrap();
        assert!(pack
            .prompt
            .contains("The three concepts that are present in all images are:"));
        assert!(pack.contrastive_grid.is_none());
    }

    #[test]
    fn grid_cells_follow_positive_ranking() {
        let pack = export_prompt(&evidence(9), PromptMode::Contrastive, 3, 3).unwrap();
        assert_eq!(pack.positive_grid.cells, (10..19).collect::<Vec<_>>());
        assert_eq!(
            pack.contrastive_grid.unwrap().cells,
            (100..109).collect::<Vec<_>>()
        );
    }

    #[test]
    fn insufficient_evidence_errors() {
        let err = export_prompt(&evidence(4), PromptMode::Positive, 3, 3).unwrap_err();
        assert!(matches!(
            err,
            PromptError::InsufficientEvidence {
                neuron_id: 7,
                needed: 9,
                available: 4
            }
        ));
    }

    #[test]
    fn label_normalization_folds_case_and_whitespace() {
        assert_eq!(normalize_label("  Cat  in\tCarton "), "cat in carton");
        assert_eq!(normalize_label("CAT"), "cat");
    }

    fn base_vocab() -> LabelVocabulary {
        let emb = EmbeddingMatrix::new(1, 2, vec![1.0, 0.0], None).unwrap();
        LabelVocabulary::new(vec!["cat".into()], vec![SourceTag::Baseline], emb).unwrap()
    }

    fn candidate_embs(labels: &[&str]) -> CandidateEmbeddings {
        let rows: Vec<Vec<f64>> = (0..labels.len())
            .map(|i| {
                let angle = (i + 1) as f64 * 0.7;
                vec![angle.cos(), angle.sin()]
            })
            .collect();
        CandidateEmbeddings::from_parts(
            labels.iter().map(|s| s.to_string()).collect(),
            EmbeddingMatrix::from_rows_f64(&rows).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn ingest_merges_with_baseline_winning() {
        let responses = CandidateResponses {
            mode: PromptMode::Contrastive,
            responses: vec![NeuronCandidates {
                neuron_id: 0,
                labels: vec!["cat".into(), "cat in carton".into(), "carton".into()],
            }],
        };
        let embs = candidate_embs(&["cat", "cat in carton", "carton"]);
        let (vocab, report) = ingest_candidates(&responses, &base_vocab(), &embs).unwrap();
        assert_eq!(
            vocab.labels(),
            &["cat".to_string(), "cat in carton".into(), "carton".into()]
        );
        assert_eq!(vocab.source_tag(0), SourceTag::Baseline);
        assert_eq!(vocab.source_tag(1), SourceTag::ContrastiveAug);
        assert_eq!(report.dropped_duplicates, vec!["cat".to_string()]);
        assert_eq!(report.added.len(), 2);
    }

    #[test]
    fn empty_response_leaves_vocabulary_unchanged() {
        let responses = CandidateResponses {
            mode: PromptMode::Positive,
            responses: vec![NeuronCandidates {
                neuron_id: 3,
                labels: vec![],
            }],
        };
        let embs = candidate_embs(&[]);
        let (vocab, report) = ingest_candidates(&responses, &base_vocab(), &embs).unwrap();
        assert_eq!(vocab.labels(), base_vocab().labels());
        assert_eq!(report.empty_responses, vec![3]);
    }

    #[test]
    fn missing_embedding_errors() {
        let responses = CandidateResponses {
            mode: PromptMode::Positive,
            responses: vec![NeuronCandidates {
                neuron_id: 0,
                labels: vec!["new thing".into(), "a".into(), "b".into()],
            }],
        };
        let embs = candidate_embs(&["a", "b"]);
        let err = ingest_candidates(&responses, &base_vocab(), &embs).unwrap_err();
        assert!(matches!(
            err,
            PromptError::MissingLabelEmbedding { label } if label == "new thing"
        ));
    }

    #[test]
    fn unique_count_matches_set_oracle() {
        let mut responses = Vec::new();
        let mut labels: Vec<&str> = Vec::new();
        let pool = ["red", "blue", "green", "striped", "dotted", "plain"];
        for n in 0..200 {
            let picks = vec![pool[n % 6], pool[(n / 2) % 6], pool[(n / 3) % 6]];
            responses.push(NeuronCandidates {
                neuron_id: n,
                labels: picks.iter().map(|s| s.to_string()).collect(),
            });
            labels.extend(&picks);
        }
        let embs = candidate_embs(&pool);
        let responses = CandidateResponses {
            mode: PromptMode::Contrastive,
            responses,
        };
        let (_, report) = ingest_candidates(&responses, &base_vocab(), &embs).unwrap();
        let mut oracle: Vec<&str> = labels.clone();
        oracle.sort();
        oracle.dedup();
        assert_eq!(report.unique_candidates, oracle.len());
        // Merged size is baseline plus new uniques.
        let (vocab, _) = ingest_candidates(&responses, &base_vocab(), &embs).unwrap();
        assert_eq!(vocab.len(), 1 + oracle.len());
    }

    #[test]
    fn unexpected_candidate_counts_are_flagged() {
        let responses = CandidateResponses {
            mode: PromptMode::Positive,
            responses: vec![NeuronCandidates {
                neuron_id: 5,
                labels: vec!["only one".into()],
            }],
        };
        let embs = candidate_embs(&["only one"]);
        let (_, report) = ingest_candidates(&responses, &base_vocab(), &embs).unwrap();
        assert_eq!(report.neurons_with_unexpected_counts, vec![5]);
    }
}
