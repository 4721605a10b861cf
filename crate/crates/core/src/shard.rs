use crate::KnowledgeKey;

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// FNV-1a 64-bit over a byte stream.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

fn fnv1a64_parts(parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for part in parts {
        for &b in *part {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// FNV-1a 64 of `namespace bytes ++ 0x00 ++ id bytes`. The 0x00 separator
/// keeps `("ab","c")` and `("a","bc")` distinct.
pub fn key_hash64(key: &KnowledgeKey) -> u64 {
    fnv1a64_parts(&[key.namespace().as_bytes(), &[0u8], key.id()])
}

/// Shard assignment for a key: [`key_hash64`] modulo `num_shards`.
///
/// Pure and deterministic across processes; every client and every shard
/// must agree on this function.
pub fn shard_of(key: &KnowledgeKey, num_shards: usize) -> usize {
    assert!(num_shards >= 1, "num_shards must be >= 1");
    (key_hash64(key) % num_shards as u64) as usize
}
