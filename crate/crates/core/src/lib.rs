//! Model-agnostic neuron labeling with contrastive evidence.
//!
//! The engine ingests precomputed activations and embeddings, retrieves
//! per-neuron positive/contrastive sample pairs, builds contrastively
//! projected neuron embeddings, scores candidate labels, and evaluates
//! label faithfulness. A built-in linear-model simulator provides
//! ground-truth worlds for desk-scale verification.
//!
//! No network, encoder or generative model is ever invoked; everything
//! crosses the boundary as files.

pub mod canonical;
pub mod corpus;
pub mod metrics;
pub mod projection;
pub mod prompts;
pub mod retrieval;
pub mod rng;
pub mod simulator;
pub mod vecmath;

use thiserror::Error;

/// Umbrella error for callers that drive whole stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Retrieval(#[from] retrieval::RetrievalError),
    #[error(transparent)]
    Projection(#[from] projection::ProjectionError),
    #[error(transparent)]
    Metrics(#[from] metrics::MetricError),
    #[error(transparent)]
    Simulator(#[from] simulator::SimulatorError),
    #[error(transparent)]
    Prompts(#[from] prompts::PromptError),
    #[error(transparent)]
    Canonical(#[from] canonical::CanonicalError),
}

impl Error {
    /// Configuration mistakes (bad manifest, bad config) versus data
    /// errors (unreadable or inconsistent inputs); command-line exit
    /// codes distinguish the two.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Corpus(e) => e.is_config(),
            Error::Simulator(simulator::SimulatorError::InvalidConfig(_)) => true,
            Error::Simulator(simulator::SimulatorError::Corpus(e)) => e.is_config(),
            _ => false,
        }
    }
}
