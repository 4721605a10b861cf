use std::sync::Arc;

use kb_core::{FeatureRecord, KnowledgeKey, Vector};

use crate::bank::{BankStats, KnowledgeBank, LookupResult};
use crate::knn::{KnnResult, Metric};
use crate::ClientError;

/// Uniform client surface over the bank, implemented both by the
/// in-process bank (deterministic mode) and by the remote client (wire
/// mode). Trainers and makers program against this trait only.
pub trait BankConn {
    fn lookup_embeddings(&mut self, keys: &[KnowledgeKey]) -> Result<Vec<LookupResult>, ClientError>;

    fn set_embedding(
        &mut self,
        key: &KnowledgeKey,
        vector: Vector,
        version: u64,
    ) -> Result<(), ClientError>;

    fn update_gradient(
        &mut self,
        key: &KnowledgeKey,
        gradient: &Vector,
        learning_rate: f32,
        source: &str,
    ) -> Result<(), ClientError>;

    fn lookup_features(
        &mut self,
        keys: &[KnowledgeKey],
    ) -> Result<Vec<Option<FeatureRecord>>, ClientError>;

    fn set_features(&mut self, key: &KnowledgeKey, record: FeatureRecord) -> Result<(), ClientError>;

    fn knn_search(
        &mut self,
        namespace: &str,
        query: &Vector,
        k: usize,
        metric: Metric,
    ) -> Result<KnnResult, ClientError>;

    fn tick_expiry(&mut self) -> Result<u64, ClientError>;

    fn stats(&mut self) -> Result<BankStats, ClientError>;
}

/// Direct in-process connection; shares the bank by Arc.
#[derive(Clone)]
pub struct LocalConn {
    bank: Arc<KnowledgeBank>,
}

impl LocalConn {
    pub fn new(bank: Arc<KnowledgeBank>) -> Self {
        LocalConn { bank }
    }

    pub fn bank(&self) -> &Arc<KnowledgeBank> {
        &self.bank
    }
}

impl BankConn for LocalConn {
    fn lookup_embeddings(&mut self, keys: &[KnowledgeKey]) -> Result<Vec<LookupResult>, ClientError> {
        Ok(self.bank.lookup_embeddings(keys)?)
    }

    fn set_embedding(
        &mut self,
        key: &KnowledgeKey,
        vector: Vector,
        version: u64,
    ) -> Result<(), ClientError> {
        Ok(self.bank.set_embedding(key, vector, version)?)
    }

    fn update_gradient(
        &mut self,
        key: &KnowledgeKey,
        gradient: &Vector,
        learning_rate: f32,
        source: &str,
    ) -> Result<(), ClientError> {
        Ok(self.bank.update_gradient(key, gradient, learning_rate, source)?)
    }

    fn lookup_features(
        &mut self,
        keys: &[KnowledgeKey],
    ) -> Result<Vec<Option<FeatureRecord>>, ClientError> {
        Ok(self.bank.lookup_features(keys)?)
    }

    fn set_features(&mut self, key: &KnowledgeKey, record: FeatureRecord) -> Result<(), ClientError> {
        Ok(self.bank.set_features(key, record)?)
    }

    fn knn_search(
        &mut self,
        namespace: &str,
        query: &Vector,
        k: usize,
        metric: Metric,
    ) -> Result<KnnResult, ClientError> {
        Ok(self.bank.knn_search(namespace, query, k, metric)?)
    }

    fn tick_expiry(&mut self) -> Result<u64, ClientError> {
        Ok(self.bank.tick_expiry() as u64)
    }

    fn stats(&mut self) -> Result<BankStats, ClientError> {
        Ok(self.bank.stats())
    }
}
