//! Corpus-to-knowledge pipeline: dependency-parse ingestion, unsupervised
//! triplet extraction, knowledge-graph construction with heuristic filters,
//! verb-anchored event segmentation and BM25 retrieval over verbalized
//! triplets, plus the classification metrics used to score the downstream
//! classifier.
//!
//! The pipeline stages compose as
//! `conllu -> extract -> kg -> events -> bm25 -> augment`,
//! each stage reading and writing JSON Lines so intermediate artifacts stay
//! inspectable and diffable.

pub mod augment;
pub mod bm25;
pub mod conllu;
pub mod events;
pub mod extract;
pub mod kg;
pub mod metrics;
pub mod pairs;
pub mod stopwords;

pub use augment::{AugmentedExample, PairEvent, SentenceSide};
pub use bm25::{build_index, verbalize_triplet, Bm25Index, Bm25Params, RetrievedSet};
pub use conllu::{parse_conllu, parse_conllu_str, sentence_to_conllu, ParsedSentence, Token, Upos};
pub use events::{render_event_query, segment_events, Event};
pub use extract::{
    extract_argument_chunk, extract_triplets, locate_predicates, Chunk, TripletCandidate,
};
pub use kg::{
    build_skg, filter_low_frequency, filter_meaningless, sample_audit, strip_stopwords,
    KnowledgeGraph, LambdaMode, SkgTriplet,
};
pub use metrics::{evaluate, ClassMetrics, EvalReport};
pub use pairs::{load_labeled_pairs, Label, LabeledPair};

/// Errors raised by the pipeline stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Structurally malformed input (wrong column count, missing field, bad number).
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    /// Well-formed input that violates a contract, e.g. a cyclic head chain.
    #[error("validation error ({context}): {message}")]
    Validation { context: String, message: String },

    /// Input bytes are not valid UTF-8.
    #[error("encoding error: {message}")]
    Encoding { message: String },

    /// A caller-supplied argument is out of range or inconsistent.
    #[error("invalid argument: {message}")]
    Argument { message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn format(line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            line,
            message: message.into(),
        }
    }

    pub fn validation(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            context: context.into(),
            message: message.into(),
        }
    }

    pub fn argument(message: impl Into<String>) -> Self {
        Error::Argument {
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
