//! Token-pair encoding layered on byte-level BPE.
//!
//! The pipeline mines frequent base-token N-grams from a target corpus
//! ([`mining`]), swaps the least useful base tokens for the best composite
//! tokens while keeping every merge dependency intact ([`surgery`]), encodes
//! text losslessly through both layers ([`codec`]) and seeds embeddings for
//! the new tokens ([`embeddings`]). [`eval`] measures compression and
//! [`synth`] generates seeded test corpora.

pub mod bpe;
pub mod codec;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod eval;
mod json;
pub mod mining;
pub mod surgery;
pub mod synth;

pub use bpe::{BaseTokenizer, MergeRule, Vocabulary};
pub use codec::{reference_encode, tpe_decode, tpe_encode, EncodedSequence};
pub use error::{Error, Result};
pub use mining::{CandidateTable, MiningConfig, TpeCandidate};
pub use surgery::TpeVocabulary;

/// Index into a vocabulary.
pub type TokenId = u32;
