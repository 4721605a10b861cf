use kb_core::{cosine, l2sq, KnowledgeKey, Vector};

/// Similarity used for nearest-neighbor scoring. Higher is closer under
/// both (NegL2 is the negated squared distance).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Metric {
    Cosine,
    NegL2,
}

impl Metric {
    /// Score of a stored vector against the query. Dims are validated by
    /// the caller against the namespace config.
    pub fn score(self, query: &Vector, stored: &Vector) -> f32 {
        match self {
            Metric::Cosine => cosine(query, stored).expect("dims checked by caller"),
            Metric::NegL2 => -l2sq(query, stored).expect("dims checked by caller"),
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct KnnHit {
    pub key: KnowledgeKey,
    pub score: f32,
}

/// Top-k hits sorted by score descending, ties broken by ascending key
/// bytes. Scores are the metric evaluated against stored vectors at serve
/// time.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct KnnResult {
    pub hits: Vec<KnnHit>,
}

/// Order hits by (score desc, key asc) and keep the best k. Used both by
/// per-shard scans and by the cross-shard merge, so the merged order is
/// identical to a single-process scan.
pub fn select_top_k(mut hits: Vec<KnnHit>, k: usize) -> Vec<KnnHit> {
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.key.cmp(&b.key)));
    hits.truncate(k);
    hits
}
