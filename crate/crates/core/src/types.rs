use crate::{CoreError, KnowledgeKey, Vector};

/// Allowed drift when validating that a label distribution sums to 1.
pub const LABEL_DIST_TOLERANCE: f32 = 1e-6;

/// A stored embedding: the vector plus the producer step that wrote it
/// (`version`) and the logical timestamp of the last mutation (`ltime`).
///
/// `version` is monotonically non-decreasing across value-writes of a key;
/// `ltime` strictly increases on every mutation and is shard-local
/// bookkeeping (it is not comparable across shards).
#[derive(Clone, PartialEq, Debug)]
pub struct EmbeddingEntry {
    pub vector: Vector,
    pub version: u64,
    pub ltime: u64,
}

/// Per-key structured payload: graph neighbors with edge weights, an
/// optional label distribution, optional raw features, and an optional
/// provenance tag (e.g. "inferred" for labels propagated from neighbors).
#[derive(Clone, PartialEq, Debug, Default)]
pub struct FeatureRecord {
    pub neighbors: Vec<(KnowledgeKey, f32)>,
    pub label_dist: Option<Vec<f32>>,
    pub raw_features: Option<Vector>,
    pub provenance: Option<String>,
}

impl FeatureRecord {
    /// Neighbor weights must be finite and non-negative; a label
    /// distribution must be finite, non-negative, and sum to 1 ± 1e-6.
    pub fn validate(&self) -> Result<(), CoreError> {
        for (_, w) in &self.neighbors {
            if !w.is_finite() {
                return Err(CoreError::NonFinite("neighbor weight"));
            }
            if *w < 0.0 {
                return Err(CoreError::malformed("negative neighbor weight"));
            }
        }
        if let Some(dist) = &self.label_dist {
            let mut sum = 0f64;
            for &p in dist {
                if !p.is_finite() {
                    return Err(CoreError::NonFinite("label distribution"));
                }
                if p < 0.0 {
                    return Err(CoreError::malformed("negative label probability"));
                }
                sum += p as f64;
            }
            if (sum - 1.0).abs() > LABEL_DIST_TOLERANCE as f64 {
                return Err(CoreError::malformed(format!(
                    "label distribution sums to {sum}, expected 1"
                )));
            }
        }
        Ok(())
    }

    pub fn with_neighbors(neighbors: Vec<(KnowledgeKey, f32)>) -> Self {
        FeatureRecord {
            neighbors,
            ..Default::default()
        }
    }
}

/// A pending, already-scaled gradient (learning_rate × gradient) cached on
/// a shard until the next lookup of its key or an expiry tick.
#[derive(Clone, PartialEq, Debug)]
pub struct GradientDelta {
    pub delta: Vector,
    pub source: String,
    pub ltime: u64,
}

/// One-hot distribution over `classes` with mass on `label`.
pub fn one_hot(label: usize, classes: usize) -> Vec<f32> {
    let mut dist = vec![0.0; classes];
    dist[label] = 1.0;
    dist
}
