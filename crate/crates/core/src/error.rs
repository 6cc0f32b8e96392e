//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoreError {
    /// A record or config failed a structural invariant.
    Invalid(String),
    /// Token id at or above the vocabulary size.
    TokenOutOfRange { id: u32, vocab_size: u32 },
    /// Vector dimensions disagree.
    DimMismatch { left: usize, right: usize },
    /// A similarity score overflowed to a non-finite value.
    NonFiniteScore,
    /// Loss became non-finite; the training run must abort.
    NonFiniteLoss,
    /// Record index past the end of a store or source.
    IndexOutOfRange { index: usize, len: usize },
    /// Index spec string outside the supported grammar.
    BadIndexSpec(String),
    /// PQ requires the dimension to split evenly into subspaces.
    PqSubspace { d: usize, m: usize },
    /// Not enough vectors to train the requested number of centroids.
    PqTooFewPoints { centroids: usize, points: usize },
    /// Same docid seen twice across a corpus or its shards.
    DuplicateDocid(String),
    /// Shards disagree on dimension or query count.
    InconsistentShards(String),
    /// A run file query has no entry in the qrels.
    MissingQrel(String),
    /// A docid referenced by a run has no corpus text.
    MissingCorpusText(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::Invalid(msg) => write!(f, "{msg}"),
            CoreError::TokenOutOfRange { id, vocab_size } => {
                write!(f, "token id {id} out of range for vocab size {vocab_size}")
            }
            CoreError::DimMismatch { left, right } => {
                write!(f, "dimension mismatch: {left} vs {right}")
            }
            CoreError::NonFiniteScore => write!(f, "non-finite similarity score"),
            CoreError::NonFiniteLoss => write!(f, "non-finite loss"),
            CoreError::IndexOutOfRange { index, len } => {
                write!(f, "index {index} out of range for length {len}")
            }
            CoreError::BadIndexSpec(spec) => write!(f, "unrecognized index spec `{spec}`"),
            CoreError::PqSubspace { d, m } => {
                write!(f, "PQ subspace count {m} does not divide dimension {d}")
            }
            CoreError::PqTooFewPoints { centroids, points } => write!(
                f,
                "PQ needs at least {centroids} vectors to train {centroids} centroids \
                 (corpus has {points}); use a smaller nbits"
            ),
            CoreError::DuplicateDocid(id) => write!(f, "duplicate docid `{id}`"),
            CoreError::InconsistentShards(msg) => write!(f, "inconsistent shards: {msg}"),
            CoreError::MissingQrel(qid) => write!(f, "query `{qid}` missing from qrels"),
            CoreError::MissingCorpusText(docid) => {
                write!(f, "docid `{docid}` has no corpus text")
            }
        }
    }
}

impl core::error::Error for CoreError {}
