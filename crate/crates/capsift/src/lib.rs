//! capsift learns which low-level technical terms indicate high-level software
//! capabilities, by reading a corpus of programming Q&A documents, and then
//! infers the capabilities of unknown binaries from their printable strings.
//!
//! The pipeline has three phases:
//!
//! 1. **Ingest** ([`corpus`], [`index`]): parse StackExchange-style XML dumps
//!    or plain JSONL corpora into normalized documents and build a field-aware
//!    inverted index over title/tags/body.
//! 2. **Learn** ([`capability`]): for each configured capability, run its
//!    boolean retrieval query, and for every term in the matching documents
//!    estimate `P(capability | term)` with a Beta-smoothed ratio of
//!    document counts. The result is a three-column term/capability/probability
//!    matrix stored as TSV.
//! 3. **Scan** ([`strings`], [`inference`]): extract printable strings from a
//!    binary, tokenize them with the same tokenizer used for documents, look
//!    the terms up in the matrix, and combine the per-term probabilities with
//!    a noisy-OR gate into one probability per capability, with optional
//!    per-term evidence traced back to corpus posts.
//!
//! [`eval`] adds the measurement half: confusion counts, TPR/FPR, normalized
//! precision, f-scores, threshold sweeps, and a deterministic synthetic
//! benchmark generator for end-to-end validation.

pub mod capability;
pub mod corpus;
mod error;
pub mod eval;
pub mod index;
pub mod inference;
pub mod strings;

pub use error::{Error, Result};
