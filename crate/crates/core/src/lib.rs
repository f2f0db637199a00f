//! Topical phrase mining.
//!
//! The pipeline turns raw text into ranked topical phrases:
//!
//! 1. [`corpus`] tokenizes, filters stop words and splits documents into chunks;
//! 2. [`miner`] counts every frequent contiguous phrase;
//! 3. [`segment`] partitions each document into a bag of phrases by greedy
//!    significance-guided merging;
//! 4. [`lda`] runs a collapsed Gibbs sampler in which every phrase takes a
//!    single topic;
//! 5. [`ranking`] lists phrases per topic by topical frequency;
//! 6. [`eval`] measures held-out perplexity and stage run times.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod lda;
pub mod miner;
pub mod pipeline;
pub mod ranking;
pub mod segment;
pub mod synth;

pub use error::{Error, Result};
