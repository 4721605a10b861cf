use std::collections::HashMap;

use kb_core::{shard_of, EmbeddingEntry, FeatureRecord, GradientDelta, KnowledgeKey, Vector};
use parking_lot::Mutex;

use crate::config::{NamespaceConfig, NamespaceKind};
use crate::knn::{select_top_k, KnnHit, KnnResult, Metric};
use crate::shard::Shard;
use crate::BankError;

/// An embedding returned by lookup, with a flag telling whether the key
/// was first-touched by this lookup (entry created from the namespace
/// default).
#[derive(Clone, PartialEq, Debug)]
pub struct LookupResult {
    pub entry: EmbeddingEntry,
    pub created: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct ShardStats {
    pub index: usize,
    pub embedding_entries: u64,
    pub feature_records: u64,
    pub pending_keys: u64,
    pub pending_deltas: u64,
    pub clock: u64,
    pub approx_bytes: u64,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct BankStats {
    pub shards: Vec<ShardStats>,
}

impl BankStats {
    pub fn total_embedding_entries(&self) -> u64 {
        self.shards.iter().map(|s| s.embedding_entries).sum()
    }

    pub fn total_pending_keys(&self) -> u64 {
        self.shards.iter().map(|s| s.pending_keys).sum()
    }
}

/// The sharded store. Safe for concurrent access by many clients: each
/// shard serializes its mutations behind its own lock, and a request
/// touching one key locks only that key's shard.
pub struct KnowledgeBank {
    shards: Vec<Mutex<Shard>>,
    namespaces: HashMap<String, NamespaceConfig>,
    /// Deterministic mode flushes pending gradients for scanned keys
    /// before a knn scan; networked serving scans stored values as-is.
    scan_flush: bool,
}

impl KnowledgeBank {
    pub fn new(
        num_shards: usize,
        configs: impl IntoIterator<Item = NamespaceConfig>,
    ) -> Result<Self, BankError> {
        assert!(num_shards >= 1, "need at least one shard");
        let mut namespaces = HashMap::new();
        for cfg in configs {
            if cfg.kind == NamespaceKind::Embeddings && cfg.dim == 0 {
                return Err(BankError::MalformedRecord(format!(
                    "embedding namespace '{}' needs dim >= 1",
                    cfg.name
                )));
            }
            if namespaces.insert(cfg.name.clone(), cfg).is_some() {
                return Err(BankError::MalformedRecord("duplicate namespace".into()));
            }
        }
        Ok(KnowledgeBank {
            shards: (0..num_shards).map(|i| Mutex::new(Shard::new(i))).collect(),
            namespaces,
            scan_flush: false,
        })
    }

    /// Enable deterministic-mode scanning (flush pending deltas for keys
    /// before they are scored by knn).
    pub fn with_scan_flush(mut self, on: bool) -> Self {
        self.scan_flush = on;
        self
    }

    pub fn num_shards(&self) -> usize {
        self.shards.len()
    }

    pub fn namespace(&self, name: &str) -> Option<&NamespaceConfig> {
        self.namespaces.get(name)
    }

    pub fn namespaces(&self) -> impl Iterator<Item = &NamespaceConfig> {
        self.namespaces.values()
    }

    fn embeddings_ns(&self, name: &str) -> Result<&NamespaceConfig, BankError> {
        match self.namespaces.get(name) {
            Some(cfg) if cfg.kind == NamespaceKind::Embeddings => Ok(cfg),
            Some(_) => Err(BankError::UnknownNamespace(format!(
                "'{name}' is not an embeddings namespace"
            ))),
            None => Err(BankError::UnknownNamespace(name.into())),
        }
    }

    fn features_ns(&self, name: &str) -> Result<&NamespaceConfig, BankError> {
        match self.namespaces.get(name) {
            Some(cfg) if cfg.kind == NamespaceKind::Features => Ok(cfg),
            Some(_) => Err(BankError::UnknownNamespace(format!(
                "'{name}' is not a features namespace"
            ))),
            None => Err(BankError::UnknownNamespace(name.into())),
        }
    }

    fn shard_for(&self, key: &KnowledgeKey) -> &Mutex<Shard> {
        &self.shards[shard_of(key, self.shards.len())]
    }

    /// Overwrite an entry with a fresh value. The stored version is the
    /// max of the existing and given versions; pending gradients for the
    /// key are discarded, since they were computed against a value this
    /// write supersedes.
    pub fn set_embedding(
        &self,
        key: &KnowledgeKey,
        vector: Vector,
        version: u64,
    ) -> Result<(), BankError> {
        let cfg = self.embeddings_ns(key.namespace())?;
        cfg.check_dim(vector.dim())?;
        let mut shard = self.shard_for(key).lock();
        shard.pending.remove(key);
        let ltime = shard.next_ltime();
        let entry = shard
            .embeddings
            .entry(key.clone())
            .or_insert_with(|| EmbeddingEntry {
                vector: Vector::zeros(cfg.dim),
                version: 0,
                ltime,
            });
        entry.vector = vector;
        entry.version = entry.version.max(version);
        entry.ltime = ltime;
        Ok(())
    }

    /// Look up entries, flushing any cached gradients first. Missing keys
    /// are created from the namespace default with version 0.
    pub fn lookup_embeddings(
        &self,
        keys: &[KnowledgeKey],
    ) -> Result<Vec<LookupResult>, BankError> {
        let mut out = Vec::with_capacity(keys.len());
        for key in keys {
            let cfg = self.embeddings_ns(key.namespace())?;
            let mut shard = self.shard_for(key).lock();
            let existed = shard.embeddings.contains_key(key);
            shard.flush_key(cfg, key);
            let entry = if let Some(entry) = shard.embeddings.get(key) {
                entry.clone()
            } else {
                let ltime = shard.next_ltime();
                let entry = EmbeddingEntry {
                    vector: cfg.default_vector(key),
                    version: 0,
                    ltime,
                };
                shard.embeddings.insert(key.clone(), entry.clone());
                entry
            };
            out.push(LookupResult {
                entry,
                created: !existed,
            });
        }
        Ok(out)
    }

    /// Cache a scaled gradient (learning_rate x gradient) for a key. The
    /// stored entry is not touched until the next lookup or expiry tick.
    pub fn update_gradient(
        &self,
        key: &KnowledgeKey,
        gradient: &Vector,
        learning_rate: f32,
        source: &str,
    ) -> Result<(), BankError> {
        let cfg = self.embeddings_ns(key.namespace())?;
        cfg.check_dim(gradient.dim())?;
        if !learning_rate.is_finite() || learning_rate <= 0.0 {
            return Err(BankError::NonFinite("learning rate".into()));
        }
        let scaled: Vec<f32> = gradient.iter().map(|&g| learning_rate * g).collect();
        let delta = Vector::new(scaled).map_err(|_| BankError::NonFinite("scaled gradient".into()))?;
        let mut shard = self.shard_for(key).lock();
        let ltime = shard.next_ltime();
        shard.pending.entry(key.clone()).or_default().push(GradientDelta {
            delta,
            source: source.into(),
            ltime,
        });
        Ok(())
    }

    /// Force the lazy flush for one key. Returns the mean delta applied,
    /// or None if nothing was pending.
    pub fn flush_key(&self, key: &KnowledgeKey) -> Result<Option<Vector>, BankError> {
        let cfg = self.embeddings_ns(key.namespace())?;
        Ok(self.shard_for(key).lock().flush_key(cfg, key))
    }

    /// Flush every key whose oldest pending delta has reached its
    /// namespace's expiry age. Returns the number of keys flushed.
    pub fn tick_expiry(&self) -> usize {
        let mut flushed = 0;
        for shard in &self.shards {
            let mut shard = shard.lock();
            let due: Vec<KnowledgeKey> = shard
                .pending
                .keys()
                .filter(|key| {
                    let Some(cfg) = self.namespaces.get(key.namespace()) else {
                        return false;
                    };
                    shard
                        .oldest_pending_age(key)
                        .is_some_and(|age| age >= cfg.flush_expiry_ticks)
                })
                .cloned()
                .collect();
            for key in due {
                let cfg = &self.namespaces[key.namespace()];
                if shard.flush_key(cfg, &key).is_some() {
                    flushed += 1;
                }
            }
        }
        flushed
    }

    /// Overwrite a feature record.
    pub fn set_features(&self, key: &KnowledgeKey, record: FeatureRecord) -> Result<(), BankError> {
        self.features_ns(key.namespace())?;
        record
            .validate()
            .map_err(|e| BankError::MalformedRecord(e.to_string()))?;
        let mut shard = self.shard_for(key).lock();
        shard.next_ltime();
        shard.features.insert(key.clone(), record);
        Ok(())
    }

    /// Fetch feature records; a missing key yields None (absence is data,
    /// not an error, and features are never default-created).
    pub fn lookup_features(
        &self,
        keys: &[KnowledgeKey],
    ) -> Result<Vec<Option<FeatureRecord>>, BankError> {
        let mut out = Vec::with_capacity(keys.len());
        for key in keys {
            self.features_ns(key.namespace())?;
            out.push(self.shard_for(key).lock().features.get(key).cloned());
        }
        Ok(out)
    }

    /// Exact top-k over the namespace: each shard scans its entries, the
    /// coordinator merges per-shard results. Ties break by ascending key
    /// bytes, so the merged order equals a single-process brute force.
    pub fn knn_search(
        &self,
        namespace: &str,
        query: &Vector,
        k: usize,
        metric: Metric,
    ) -> Result<KnnResult, BankError> {
        let cfg = self.embeddings_ns(namespace)?;
        cfg.check_dim(query.dim())?;
        assert!(k >= 1, "k must be >= 1");
        let mut merged: Vec<KnnHit> = Vec::new();
        for shard in &self.shards {
            let mut shard = shard.lock();
            if self.scan_flush {
                let due: Vec<KnowledgeKey> = shard
                    .pending
                    .keys()
                    .filter(|key| key.namespace() == namespace)
                    .cloned()
                    .collect();
                for key in due {
                    shard.flush_key(cfg, &key);
                }
            }
            let hits: Vec<KnnHit> = shard
                .embeddings
                .iter()
                .filter(|(key, _)| key.namespace() == namespace)
                .map(|(key, entry)| KnnHit {
                    key: key.clone(),
                    score: metric.score(query, &entry.vector),
                })
                .collect();
            merged.extend(select_top_k(hits, k));
        }
        Ok(KnnResult {
            hits: select_top_k(merged, k),
        })
    }

    /// Read-only snapshot of per-shard counters.
    pub fn stats(&self) -> BankStats {
        let shards = self
            .shards
            .iter()
            .map(|shard| {
                let shard = shard.lock();
                let approx_bytes = shard
                    .embeddings
                    .iter()
                    .map(|(k, e)| (k.id().len() + 4 * e.vector.dim() + 24) as u64)
                    .sum::<u64>()
                    + shard
                        .features
                        .iter()
                        .map(|(k, r)| (k.id().len() + 16 * r.neighbors.len() + 24) as u64)
                        .sum::<u64>()
                    + shard
                        .pending
                        .values()
                        .flatten()
                        .map(|d| (4 * d.delta.dim() + 24) as u64)
                        .sum::<u64>();
                ShardStats {
                    index: shard.index,
                    embedding_entries: shard.embeddings.len() as u64,
                    feature_records: shard.features.len() as u64,
                    pending_keys: shard.pending.len() as u64,
                    pending_deltas: shard.pending.values().map(|v| v.len() as u64).sum(),
                    clock: shard.clock,
                    approx_bytes,
                }
            })
            .collect();
        BankStats { shards }
    }

    /// Iterate every embedding entry (snapshots, state comparison in
    /// tests). Order is deterministic: shard index, then key order.
    pub fn export_embeddings(&self) -> Vec<(KnowledgeKey, EmbeddingEntry)> {
        let mut out = Vec::new();
        for shard in &self.shards {
            let shard = shard.lock();
            out.extend(shard.embeddings.iter().map(|(k, e)| (k.clone(), e.clone())));
        }
        out
    }

    pub fn export_features(&self) -> Vec<(KnowledgeKey, FeatureRecord)> {
        let mut out = Vec::new();
        for shard in &self.shards {
            let shard = shard.lock();
            out.extend(shard.features.iter().map(|(k, r)| (k.clone(), r.clone())));
        }
        out
    }

    pub(crate) fn shards(&self) -> &[Mutex<Shard>] {
        &self.shards
    }

    pub(crate) fn namespace_map(&self) -> &HashMap<String, NamespaceConfig> {
        &self.namespaces
    }

    pub(crate) fn restore_shard(&self, shard: Shard) {
        let index = shard.index;
        *self.shards[index].lock() = shard;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::DefaultInit;

    fn bank(shards: usize) -> KnowledgeBank {
        KnowledgeBank::new(
            shards,
            [
                NamespaceConfig::embeddings("emb", 2),
                NamespaceConfig::features("feat"),
            ],
        )
        .unwrap()
    }

    fn key(id: &str) -> KnowledgeKey {
        KnowledgeKey::new("emb", id)
    }

    fn vec2(a: f32, b: f32) -> Vector {
        Vector::new(vec![a, b]).unwrap()
    }

    #[test]
    fn set_then_lookup_returns_same_bits() {
        let bank = bank(4);
        bank.set_embedding(&key("a"), vec2(0.25, -1.5), 3).unwrap();
        let got = bank.lookup_embeddings(&[key("a")]).unwrap();
        assert_eq!(got[0].entry.vector, vec2(0.25, -1.5));
        assert_eq!(got[0].entry.version, 3);
        assert!(!got[0].created);
    }

    #[test]
    fn version_is_monotone_under_overwrites() {
        let bank = bank(1);
        bank.set_embedding(&key("a"), vec2(1.0, 0.0), 9).unwrap();
        bank.set_embedding(&key("a"), vec2(2.0, 0.0), 5).unwrap();
        let got = bank.lookup_embeddings(&[key("a")]).unwrap();
        assert_eq!(got[0].entry.version, 9);
        assert_eq!(got[0].entry.vector, vec2(2.0, 0.0));
    }

    #[test]
    fn missing_key_created_from_default() {
        let bank = bank(2);
        let got = bank.lookup_embeddings(&[key("ghost")]).unwrap();
        assert!(got[0].created);
        assert_eq!(got[0].entry.version, 0);
        assert_eq!(got[0].entry.vector, vec2(0.0, 0.0));
        // Second lookup sees the now-stored entry.
        let again = bank.lookup_embeddings(&[key("ghost")]).unwrap();
        assert!(!again[0].created);
        assert_eq!(again[0].entry, got[0].entry);
    }

    #[test]
    fn gradient_applies_on_lookup_only() {
        let bank = bank(1);
        bank.set_embedding(&key("a"), vec2(0.0, 0.0), 1).unwrap();
        bank.update_gradient(&key("a"), &vec2(1.0, 0.0), 0.1, "t0").unwrap();
        assert_eq!(bank.stats().total_pending_keys(), 1);
        let got = bank.lookup_embeddings(&[key("a")]).unwrap();
        assert!((got[0].entry.vector[0] - -0.1).abs() < 1e-7);
        assert_eq!(bank.stats().total_pending_keys(), 0);
        // Idempotent reads: no further change.
        let again = bank.lookup_embeddings(&[key("a")]).unwrap();
        assert_eq!(again[0].entry.vector, got[0].entry.vector);
    }

    #[test]
    fn two_sources_average_on_flush() {
        let bank = bank(1);
        bank.set_embedding(&key("a"), vec2(0.0, 0.0), 1).unwrap();
        bank.update_gradient(&key("a"), &vec2(1.0, 0.0), 1.0, "t0").unwrap();
        bank.update_gradient(&key("a"), &vec2(0.0, 1.0), 1.0, "t1").unwrap();
        let got = bank.lookup_embeddings(&[key("a")]).unwrap();
        assert_eq!(got[0].entry.vector, vec2(-0.5, -0.5));
    }

    #[test]
    fn set_discards_pending() {
        let bank = bank(1);
        bank.set_embedding(&key("a"), vec2(0.0, 0.0), 1).unwrap();
        bank.update_gradient(&key("a"), &vec2(5.0, 5.0), 1.0, "t0").unwrap();
        bank.set_embedding(&key("a"), vec2(7.0, 7.0), 2).unwrap();
        let got = bank.lookup_embeddings(&[key("a")]).unwrap();
        assert_eq!(got[0].entry.vector, vec2(7.0, 7.0));
        assert_eq!(bank.stats().total_pending_keys(), 0);
    }

    #[test]
    fn non_finite_gradient_rejected_pending_unchanged() {
        let bank = bank(1);
        let bad = Vector::new(vec![1.0, 2.0]).unwrap();
        // A NaN cannot be built into a Vector, so the rejection path that
        // matters is a non-finite scaled product (overflow) and a bad lr.
        assert!(bank.update_gradient(&key("a"), &bad, f32::NAN, "t").is_err());
        let huge = vec2(f32::MAX, 0.0);
        assert!(bank.update_gradient(&key("a"), &huge, 1e30, "t").is_err());
        assert_eq!(bank.stats().total_pending_keys(), 0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let bank = bank(1);
        let v3 = Vector::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            bank.set_embedding(&key("a"), v3.clone(), 0),
            Err(BankError::DimensionMismatch { .. })
        ));
        assert!(bank.update_gradient(&key("a"), &v3, 0.1, "t").is_err());
        assert!(bank.knn_search("emb", &v3, 1, Metric::Cosine).is_err());
    }

    #[test]
    fn unknown_and_wrong_kind_namespaces_rejected() {
        let bank = bank(1);
        let k = KnowledgeKey::new("nope", "a");
        assert!(matches!(
            bank.lookup_embeddings(&[k]),
            Err(BankError::UnknownNamespace(_))
        ));
        let k = KnowledgeKey::new("feat", "a");
        assert!(matches!(
            bank.set_embedding(&k, vec2(0.0, 0.0), 0),
            Err(BankError::UnknownNamespace(_))
        ));
        let k = KnowledgeKey::new("emb", "a");
        assert!(bank.set_features(&k, FeatureRecord::default()).is_err());
    }

    #[test]
    fn features_round_trip_and_absence() {
        let bank = bank(4);
        let k = KnowledgeKey::new("feat", "x");
        let rec = FeatureRecord {
            neighbors: vec![(KnowledgeKey::new("feat", "y"), 1.0)],
            label_dist: Some(vec![0.5, 0.5]),
            raw_features: None,
            provenance: None,
        };
        bank.set_features(&k, rec.clone()).unwrap();
        let got = bank.lookup_features(&[k, KnowledgeKey::new("feat", "absent")]).unwrap();
        assert_eq!(got[0], Some(rec));
        assert_eq!(got[1], None);
    }

    #[test]
    fn malformed_label_dist_rejected() {
        let bank = bank(1);
        let mut rec = FeatureRecord::default();
        rec.label_dist = Some(vec![0.5, 0.6]);
        assert!(matches!(
            bank.set_features(&KnowledgeKey::new("feat", "x"), rec),
            Err(BankError::MalformedRecord(_))
        ));
    }

    #[test]
    fn expiry_zero_flushes_on_next_tick() {
        let bank = bank(2);
        bank.update_gradient(&key("a"), &vec2(1.0, 0.0), 0.5, "t").unwrap();
        assert_eq!(bank.tick_expiry(), 1);
        assert_eq!(bank.stats().total_pending_keys(), 0);
        assert_eq!(bank.tick_expiry(), 0);
        let got = bank.lookup_embeddings(&[key("a")]).unwrap();
        assert_eq!(got[0].entry.vector, vec2(-0.5, 0.0));
    }

    #[test]
    fn large_expiry_defers_until_age_reached() {
        let bank = KnowledgeBank::new(
            1,
            [NamespaceConfig::embeddings("emb", 2).with_expiry(5)],
        )
        .unwrap();
        bank.set_embedding(&key("a"), vec2(0.0, 0.0), 0).unwrap(); // clock 0 -> 1
        bank.update_gradient(&key("a"), &vec2(1.0, 0.0), 1.0, "t").unwrap(); // ltime 1, clock 2
        assert_eq!(bank.tick_expiry(), 0); // age 1 < 5
        for i in 0..4 {
            // Unrelated mutations advance the clock.
            bank.set_embedding(&key("other"), vec2(0.0, 0.0), i).unwrap();
        }
        // clock 6, age 5 -> due.
        assert_eq!(bank.tick_expiry(), 1);
    }

    #[test]
    fn knn_basics() {
        let bank = bank(4);
        bank.set_embedding(&key("a"), vec2(1.0, 0.0), 0).unwrap();
        bank.set_embedding(&key("b"), vec2(0.0, 1.0), 0).unwrap();
        bank.set_embedding(&key("c"), vec2(0.7, 0.7), 0).unwrap();
        let res = bank.knn_search("emb", &vec2(1.0, 0.0), 2, Metric::Cosine).unwrap();
        assert_eq!(res.hits.len(), 2);
        assert_eq!(res.hits[0].key.id(), b"a");
        assert!((res.hits[0].score - 1.0).abs() < 1e-6);
        assert_eq!(res.hits[1].key.id(), b"c");
        assert!((res.hits[1].score - 0.70710677).abs() < 1e-4);
        // k larger than the store: everything, sorted.
        let all = bank.knn_search("emb", &vec2(1.0, 0.0), 10, Metric::Cosine).unwrap();
        assert_eq!(all.hits.len(), 3);
    }

    #[test]
    fn stats_count_and_clock_are_monotone() {
        let bank = bank(2);
        let empty = bank.stats();
        assert_eq!(empty.total_embedding_entries(), 0);
        assert!(empty.shards.iter().all(|s| s.clock == 0));
        bank.set_embedding(&key("a"), vec2(1.0, 0.0), 0).unwrap();
        let one = bank.stats();
        assert_eq!(one.total_embedding_entries(), 1);
        let on_shards: Vec<_> = one.shards.iter().filter(|s| s.embedding_entries > 0).collect();
        assert_eq!(on_shards.len(), 1);
        let mut prev = one;
        for i in 0..10 {
            bank.update_gradient(&key("a"), &vec2(1.0, 1.0), 0.1, "t").unwrap();
            if i % 3 == 0 {
                bank.lookup_embeddings(&[key("a")]).unwrap();
            }
            let now = bank.stats();
            for (p, n) in prev.shards.iter().zip(&now.shards) {
                assert!(n.clock >= p.clock);
                assert!(n.embedding_entries >= p.embedding_entries);
            }
            prev = now;
        }
    }

    #[test]
    fn uniform_default_observed_identically_by_racing_clients() {
        let cfg = NamespaceConfig::embeddings("emb", 4)
            .with_init(DefaultInit::Uniform { scale: 0.1 })
            .with_seed(3);
        let bank_a = KnowledgeBank::new(1, [cfg.clone()]).unwrap();
        let bank_b = KnowledgeBank::new(8, [cfg]).unwrap();
        let k = KnowledgeKey::new("emb", "first-touch");
        let a = bank_a.lookup_embeddings(std::slice::from_ref(&k)).unwrap();
        let b = bank_b.lookup_embeddings(std::slice::from_ref(&k)).unwrap();
        assert_eq!(a[0].entry.vector, b[0].entry.vector);
    }
}
