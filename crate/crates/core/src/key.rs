use std::fmt;

/// Namespaced identifier of an instance, node, or item. The unit of
/// sharding: equal keys always land on the same shard.
///
/// Equality and ordering are byte-wise on `(namespace, id)`; the ordering
/// is what knn tie-breaking and deterministic iteration rely on.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KnowledgeKey {
    namespace: String,
    id: Vec<u8>,
}

impl KnowledgeKey {
    /// Build a key. The id must be non-empty.
    ///
    /// Panics on an empty id; use [`KnowledgeKey::try_new`] for untrusted
    /// input.
    pub fn new(namespace: impl Into<String>, id: impl Into<Vec<u8>>) -> Self {
        Self::try_new(namespace, id).expect("knowledge key id must be non-empty")
    }

    pub fn try_new(
        namespace: impl Into<String>,
        id: impl Into<Vec<u8>>,
    ) -> Result<Self, crate::CoreError> {
        let namespace = namespace.into();
        let id = id.into();
        if id.is_empty() {
            return Err(crate::CoreError::malformed("empty key id"));
        }
        Ok(KnowledgeKey { namespace, id })
    }

    pub fn namespace(&self) -> &str {
        &self.namespace
    }

    pub fn id(&self) -> &[u8] {
        &self.id
    }

    /// The same key under a different namespace (same id). Used when an
    /// item's embedding and its feature record live in sibling namespaces.
    pub fn in_namespace(&self, namespace: impl Into<String>) -> Self {
        KnowledgeKey {
            namespace: namespace.into(),
            id: self.id.clone(),
        }
    }
}

impl fmt::Debug for KnowledgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.namespace, String::from_utf8_lossy(&self.id))
    }
}

impl fmt::Display for KnowledgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}
