//! The knowledge bank: a sharded in-memory store serving feature lookup,
//! embedding lookup/update with lazy gradient aggregation, and exact
//! k-nearest-neighbor search.
//!
//! Writes of gradients are cached per key and folded into the stored
//! embedding only on the next lookup of that key or on an expiry tick
//! (the lazy update). Each shard serializes its mutations behind a lock;
//! different shards proceed in parallel. Shard assignment is
//! [`kb_core::shard_of`], so any client can compute placement locally.

pub mod bank;
pub mod config;
pub mod conn;
pub mod error;
pub mod knn;
mod shard;
pub mod snapshot;

pub use bank::{BankStats, KnowledgeBank, LookupResult, ShardStats};
pub use config::{DefaultInit, NamespaceConfig, NamespaceKind};
pub use conn::{BankConn, LocalConn};
pub use error::{BankError, ClientError};
pub use knn::{KnnHit, KnnResult, Metric};
