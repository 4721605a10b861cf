use kb_core::{key_hash64, KnowledgeKey, Vector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::BankError;

/// What a namespace stores.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NamespaceKind {
    Features,
    Embeddings,
}

/// Initialization for embedding keys first touched by a lookup.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum DefaultInit {
    Zeros,
    /// Uniform in [-scale, scale], derived deterministically from the
    /// namespace seed and the key bytes so every process observes the
    /// same default for a given key.
    Uniform { scale: f32 },
}

/// Per-namespace storage policy. `dim` is fixed for the namespace
/// lifetime and is 0 for feature namespaces.
#[derive(Clone, PartialEq, Debug)]
pub struct NamespaceConfig {
    pub name: String,
    pub kind: NamespaceKind,
    pub dim: usize,
    pub default_init: DefaultInit,
    /// A pending gradient older than this many logical ticks is flushed
    /// by the next expiry sweep. 0 means flush on every tick.
    pub flush_expiry_ticks: u64,
    /// Cached deltas with L2 norm above `outlier_factor x median norm`
    /// are dropped before averaging (only when 3+ deltas are cached).
    pub outlier_factor: f32,
    pub seed: u64,
}

impl NamespaceConfig {
    pub fn embeddings(name: impl Into<String>, dim: usize) -> Self {
        assert!(dim >= 1, "embedding namespace needs dim >= 1");
        NamespaceConfig {
            name: name.into(),
            kind: NamespaceKind::Embeddings,
            dim,
            default_init: DefaultInit::Zeros,
            flush_expiry_ticks: 0,
            outlier_factor: 3.0,
            seed: 0,
        }
    }

    pub fn features(name: impl Into<String>) -> Self {
        NamespaceConfig {
            name: name.into(),
            kind: NamespaceKind::Features,
            dim: 0,
            default_init: DefaultInit::Zeros,
            flush_expiry_ticks: 0,
            outlier_factor: 3.0,
            seed: 0,
        }
    }

    pub fn with_init(mut self, init: DefaultInit) -> Self {
        self.default_init = init;
        self
    }

    pub fn with_expiry(mut self, ticks: u64) -> Self {
        self.flush_expiry_ticks = ticks;
        self
    }

    pub fn with_outlier_factor(mut self, factor: f32) -> Self {
        assert!(factor > 0.0);
        self.outlier_factor = factor;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The deterministic default vector for a first-touched key.
    pub fn default_vector(&self, key: &KnowledgeKey) -> Vector {
        match self.default_init {
            DefaultInit::Zeros => Vector::zeros(self.dim),
            DefaultInit::Uniform { scale } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ key_hash64(key));
                let values = (0..self.dim)
                    .map(|_| rng.gen_range(-scale..=scale))
                    .collect();
                Vector::new(values).expect("uniform init is finite")
            }
        }
    }

    pub(crate) fn check_dim(&self, got: usize) -> Result<(), BankError> {
        if got != self.dim {
            return Err(BankError::DimensionMismatch {
                namespace: self.name.clone(),
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_vector_is_deterministic_per_key() {
        let cfg = NamespaceConfig::embeddings("emb", 8)
            .with_init(DefaultInit::Uniform { scale: 0.5 })
            .with_seed(7);
        let k1 = KnowledgeKey::new("emb", "a");
        let k2 = KnowledgeKey::new("emb", "b");
        assert_eq!(cfg.default_vector(&k1), cfg.default_vector(&k1));
        assert_ne!(cfg.default_vector(&k1), cfg.default_vector(&k2));
        assert!(cfg.default_vector(&k1).iter().all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn zeros_init() {
        let cfg = NamespaceConfig::embeddings("emb", 3);
        let k = KnowledgeKey::new("emb", "a");
        assert_eq!(cfg.default_vector(&k).as_slice(), &[0.0, 0.0, 0.0]);
    }
}
