//! Desk-scale dense retrieval core.
//!
//! Everything algorithmic lives here: the hashing tokenizer, the bi-encoder
//! with exact analytic gradients, contrastive training steps (full-batch,
//! gradient-cached, and simulated multi-worker negative sharing), exact and
//! approximate inner-product search, and retrieval metrics.
//!
//! The crate is `no_std` + `alloc`; file formats, memory-mapped stores, and
//! the CLI live in the `deskret` companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod data;
pub mod embed;
pub mod error;
pub mod index;
pub mod loss;
pub mod mat;
pub mod metrics;
pub mod mining;
pub mod model;
pub mod optim;
pub mod rng;
pub mod sharding;
pub mod synth;
pub mod tokenizer;
pub mod trainer;

pub use error::CoreError;
pub use mat::Mat;

pub type Result<T> = core::result::Result<T, CoreError>;
