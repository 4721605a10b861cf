//! Shared domain types and pure functions for the knowledge-bank system:
//! keys, vectors, embedding entries, feature records, checkpoints, the
//! shard-assignment hash, and the byte-level encodings used on the wire
//! and in files.
//!
//! Everything in this crate is an immutable value type or a pure function;
//! all of it is safe to copy between threads and deterministic across
//! processes.

pub mod checkpoint;
pub mod error;
pub mod key;
pub mod matrix;
pub mod shard;
pub mod types;
pub mod vector;
pub mod wire;

pub use checkpoint::Checkpoint;
pub use error::CoreError;
pub use key::KnowledgeKey;
pub use matrix::Matrix;
pub use shard::{fnv1a64, key_hash64, shard_of};
pub use types::{EmbeddingEntry, FeatureRecord, GradientDelta};
pub use vector::{cosine, l2sq, Vector};
