//! Desk-scale dense retrieval: file formats, data loading, and the
//! `deskret` command-line pipeline on top of the `deskret-core` math.
//!
//! This crate owns everything that touches the filesystem — JSONL
//! ingestion, the memory-mapped token store, model checkpoints, embedding
//! shards, run files, qrels — plus the asynchronous training-data
//! prefetcher and the CLI drivers. All formats are little-endian and
//! round-trip bit-exactly.

pub mod checkpoint;
pub mod cli;
pub mod embfile;
pub mod error;
pub mod globpat;
pub mod jsonl;
pub mod prefetch;
pub mod qrels;
pub mod runfile;
pub mod store;

pub use error::{Error, Result};
