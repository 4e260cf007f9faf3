//! Candidate label vocabulary: strings, provenance tags and their
//! embedding rows.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CorpusError, EmbeddingMatrix};

/// Where a vocabulary entry came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceTag {
    #[serde(rename = "baseline")]
    Baseline,
    #[serde(rename = "positive-aug")]
    PositiveAug,
    #[serde(rename = "contrastive-aug")]
    ContrastiveAug,
}

impl SourceTag {
    pub fn tag(&self) -> &'static str {
        match self {
            SourceTag::Baseline => "baseline",
            SourceTag::PositiveAug => "positive-aug",
            SourceTag::ContrastiveAug => "contrastive-aug",
        }
    }
}

/// Candidate labels with one embedding row per label. The same string may
/// appear under different source tags, never twice under the same tag.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVocabulary {
    labels: Vec<String>,
    source_tags: Vec<SourceTag>,
    embeddings: EmbeddingMatrix,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    labels: Vec<String>,
    #[serde(default)]
    source_tags: Option<Vec<SourceTag>>,
    embeddings: String,
}

impl LabelVocabulary {
    pub fn new(
        labels: Vec<String>,
        source_tags: Vec<SourceTag>,
        embeddings: EmbeddingMatrix,
    ) -> Result<Self, CorpusError> {
        if labels.len() != embeddings.rows() {
            return Err(CorpusError::Vocabulary(format!(
                "{} labels but {} embedding rows",
                labels.len(),
                embeddings.rows()
            )));
        }
        if labels.len() != source_tags.len() {
            return Err(CorpusError::Vocabulary(format!(
                "{} labels but {} source tags",
                labels.len(),
                source_tags.len()
            )));
        }
        for (i, label) in labels.iter().enumerate() {
            if label.is_empty() {
                return Err(CorpusError::Vocabulary(format!("label {i} is empty")));
            }
        }
        let mut seen: Vec<(&String, SourceTag)> = Vec::with_capacity(labels.len());
        for (label, tag) in labels.iter().zip(&source_tags) {
            if seen.contains(&(label, *tag)) {
                return Err(CorpusError::Vocabulary(format!(
                    "duplicate label {label:?} under source tag {}",
                    tag.tag()
                )));
            }
            seen.push((label, *tag));
        }
        Ok(Self {
            labels,
            source_tags,
            embeddings,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn source_tags(&self) -> &[SourceTag] {
        &self.source_tags
    }

    pub fn embeddings(&self) -> &EmbeddingMatrix {
        &self.embeddings
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn source_tag(&self, i: usize) -> SourceTag {
        self.source_tags[i]
    }

    pub fn embedding(&self, i: usize) -> &[f32] {
        self.embeddings.row(i)
    }

    /// Reads the vocabulary JSON; the embedding path inside it resolves
    /// relative to the JSON file's directory.
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let file: VocabularyFile = serde_json::from_str(&text)
            .map_err(|e| CorpusError::Vocabulary(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let emb_path = base.join(&file.embeddings);
        let embeddings = EmbeddingMatrix::load(&emb_path)?;
        let tags = file
            .source_tags
            .unwrap_or_else(|| vec![SourceTag::Baseline; file.labels.len()]);
        Self::new(file.labels, tags, embeddings)
    }

    /// Writes `<path>` (JSON) plus the embedding matrix under
    /// `embedding_file` next to it.
    pub fn save(&self, path: &Path, embedding_file: &str) -> Result<(), CorpusError> {
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        self.embeddings.save(&base.join(embedding_file))?;
        let file = VocabularyFile {
            labels: self.labels.clone(),
            source_tags: Some(self.source_tags.clone()),
            embeddings: embedding_file.to_string(),
        };
        let json = crate::canonical::to_canonical_json(&file)
            .map_err(|e| CorpusError::Vocabulary(e.to_string()))?;
        std::fs::write(path, json).map_err(|source| CorpusError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}
