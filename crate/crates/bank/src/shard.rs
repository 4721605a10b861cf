//! Per-shard state and the lazy-update flush rule.

use std::collections::BTreeMap;

use kb_core::{EmbeddingEntry, FeatureRecord, GradientDelta, KnowledgeKey, Vector};

use crate::config::NamespaceConfig;

/// One shard's state. All access goes through the owning lock in
/// [`crate::KnowledgeBank`]; keys stored here satisfy
/// `shard_of(key, num_shards) == index`.
///
/// BTreeMaps keep iteration order deterministic, which snapshots, expiry
/// sweeps, and scans rely on.
pub(crate) struct Shard {
    pub index: usize,
    pub embeddings: BTreeMap<KnowledgeKey, EmbeddingEntry>,
    pub features: BTreeMap<KnowledgeKey, FeatureRecord>,
    pub pending: BTreeMap<KnowledgeKey, Vec<GradientDelta>>,
    pub clock: u64,
}

impl Shard {
    pub fn new(index: usize) -> Self {
        Shard {
            index,
            embeddings: BTreeMap::new(),
            features: BTreeMap::new(),
            pending: BTreeMap::new(),
            clock: 0,
        }
    }

    /// Consume one logical tick. Called on every mutation, so the clock
    /// strictly increases across mutating requests.
    pub fn next_ltime(&mut self) -> u64 {
        let t = self.clock;
        self.clock += 1;
        t
    }

    /// Apply all cached deltas for `key` to its entry and clear the
    /// cache. Creates the entry from the namespace default if the key has
    /// pending deltas but no stored value yet.
    ///
    /// Returns the mean delta that was subtracted, or None if nothing was
    /// pending (in which case the entry and the clock are untouched).
    pub fn flush_key(&mut self, cfg: &NamespaceConfig, key: &KnowledgeKey) -> Option<Vector> {
        let deltas = self.pending.remove(key)?;
        if deltas.is_empty() {
            return None;
        }
        let mean = mean_surviving_delta(&deltas, cfg.outlier_factor, cfg.dim);
        let ltime = self.next_ltime();
        let entry = self
            .embeddings
            .entry(key.clone())
            .or_insert_with(|| EmbeddingEntry {
                vector: cfg.default_vector(key),
                version: 0,
                ltime,
            });
        let updated: Vec<f32> = entry
            .vector
            .iter()
            .zip(&mean)
            .map(|(&e, &m)| clamp_to_f32(e as f64 - m))
            .collect();
        entry.vector = Vector::new(updated).expect("clamped values are finite");
        entry.ltime = ltime;
        Some(Vector::new(mean.iter().map(|&m| clamp_to_f32(m)).collect()).unwrap())
    }

    /// Age of the oldest pending delta for expiry checks.
    pub fn oldest_pending_age(&self, key: &KnowledgeKey) -> Option<u64> {
        let deltas = self.pending.get(key)?;
        let oldest = deltas.iter().map(|d| d.ltime).min()?;
        Some(self.clock.saturating_sub(oldest))
    }
}

/// The cached-gradient combination rule.
///
/// With 3 or more cached deltas, deltas whose L2 norm exceeds
/// `outlier_factor x median(norms)` are dropped (skipped entirely when
/// the median is 0, where the filter would be meaningless). The survivors
/// are averaged elementwise with f64 accumulation.
fn mean_surviving_delta(deltas: &[GradientDelta], outlier_factor: f32, dim: usize) -> Vec<f64> {
    let survivors: Vec<&GradientDelta> = if deltas.len() >= 3 {
        let mut norms: Vec<f64> = deltas.iter().map(|d| d.delta.norm()).collect();
        norms.sort_by(f64::total_cmp);
        let median = median_of_sorted(&norms);
        if median > 0.0 {
            let cutoff = outlier_factor as f64 * median;
            deltas.iter().filter(|d| d.delta.norm() <= cutoff).collect()
        } else {
            deltas.iter().collect()
        }
    } else {
        deltas.iter().collect()
    };
    // The median element always survives its own filter, so this is
    // never empty.
    let n = survivors.len() as f64;
    let mut mean = vec![0f64; dim];
    for d in &survivors {
        for (acc, &v) in mean.iter_mut().zip(d.delta.iter()) {
            *acc += v as f64;
        }
    }
    for acc in &mut mean {
        *acc /= n;
    }
    mean
}

fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// f64 -> f32 with saturation, so an extreme accumulated update can never
/// smuggle an infinity into the store.
fn clamp_to_f32(v: f64) -> f32 {
    v.clamp(f32::MIN as f64, f32::MAX as f64) as f32
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta(values: Vec<f32>, ltime: u64) -> GradientDelta {
        GradientDelta {
            delta: Vector::new(values).unwrap(),
            source: "t".into(),
            ltime,
        }
    }

    // Median/outlier/mean rule worked by hand: norms 1, 1, 100 with
    // factor 3 -> median 1, the 100-norm delta dropped, mean (1, 0).
    #[test]
    fn outlier_is_dropped_before_averaging() {
        let deltas = vec![
            delta(vec![1.0, 0.0], 0),
            delta(vec![1.0, 0.0], 1),
            delta(vec![100.0, 0.0], 2),
        ];
        assert_eq!(mean_surviving_delta(&deltas, 3.0, 2), vec![1.0, 0.0]);
    }

    #[test]
    fn fewer_than_three_deltas_skip_the_filter() {
        let deltas = vec![delta(vec![1.0], 0), delta(vec![101.0], 1)];
        assert_eq!(mean_surviving_delta(&deltas, 3.0, 1), vec![51.0]);
    }

    #[test]
    fn zero_median_skips_the_filter() {
        let deltas = vec![
            delta(vec![0.0], 0),
            delta(vec![0.0], 1),
            delta(vec![6.0], 2),
        ];
        // median norm 0 -> no filtering -> mean 2.
        assert_eq!(mean_surviving_delta(&deltas, 3.0, 1), vec![2.0]);
    }

    #[test]
    fn even_count_median_interpolates() {
        // norms 1, 1, 4, 10 -> median 2.5, cutoff 7.5 -> the 10 dropped.
        let deltas = vec![
            delta(vec![1.0], 0),
            delta(vec![1.0], 1),
            delta(vec![4.0], 2),
            delta(vec![10.0], 3),
        ];
        assert_eq!(mean_surviving_delta(&deltas, 3.0, 1), vec![2.0]);
    }
}
