//! Byte-level encodings. Conventions, shared by every format in the
//! system: integers little-endian, strings length-prefixed with u16,
//! lists (and byte strings) length-prefixed with u32, reals 32-bit
//! IEEE-754.
//!
//! `decode_*` functions reject truncated input and non-finite reals with
//! [`CoreError::MalformedPayload`]; round-tripping any valid value is
//! bit-exact.

use crate::{CoreError, EmbeddingEntry, FeatureRecord, GradientDelta, KnowledgeKey, Vector};

pub fn put_u8(out: &mut Vec<u8>, v: u8) {
    out.push(v);
}

pub fn put_u16(out: &mut Vec<u8>, v: u16) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_f32(out: &mut Vec<u8>, v: f32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn put_str(out: &mut Vec<u8>, s: &str) {
    debug_assert!(s.len() <= u16::MAX as usize, "string too long for u16 prefix");
    put_u16(out, s.len() as u16);
    out.extend_from_slice(s.as_bytes());
}

pub fn put_bytes(out: &mut Vec<u8>, b: &[u8]) {
    put_u32(out, b.len() as u32);
    out.extend_from_slice(b);
}

/// Cursor over a received payload. Every read checks bounds.
pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn is_empty(&self) -> bool {
        self.remaining() == 0
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CoreError> {
        if self.remaining() < n {
            return Err(CoreError::malformed(format!(
                "truncated: need {n} bytes, have {}",
                self.remaining()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, CoreError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, CoreError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32, CoreError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64, CoreError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Result<f32, CoreError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    /// Finite f32; NaN/Inf are a malformed payload, per the store's
    /// no-non-finite rule.
    pub fn f32_finite(&mut self) -> Result<f32, CoreError> {
        let v = self.f32()?;
        if !v.is_finite() {
            return Err(CoreError::malformed("non-finite real"));
        }
        Ok(v)
    }

    pub fn str(&mut self) -> Result<String, CoreError> {
        let len = self.u16()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| CoreError::malformed("invalid utf-8 string"))
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>, CoreError> {
        let len = self.u32()? as usize;
        Ok(self.take(len)?.to_vec())
    }

    /// List length prefix, sanity-bounded against the remaining bytes so a
    /// hostile length cannot trigger a huge allocation.
    pub fn list_len(&mut self, min_elem_bytes: usize) -> Result<usize, CoreError> {
        let len = self.u32()? as usize;
        if min_elem_bytes > 0 && len > self.remaining() / min_elem_bytes {
            return Err(CoreError::malformed(format!(
                "list length {len} exceeds remaining payload"
            )));
        }
        Ok(len)
    }

    pub fn expect_end(&self) -> Result<(), CoreError> {
        if !self.is_empty() {
            return Err(CoreError::malformed(format!(
                "{} trailing bytes",
                self.remaining()
            )));
        }
        Ok(())
    }
}

// --- Vector: u32 dim, then dim little-endian IEEE-754 f32s ---

pub fn encode_vector(v: &Vector) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + 4 * v.dim());
    put_vector(&mut out, v);
    out
}

pub fn put_vector(out: &mut Vec<u8>, v: &Vector) {
    put_u32(out, v.dim() as u32);
    for &x in v.as_slice() {
        put_f32(out, x);
    }
}

pub fn decode_vector(bytes: &[u8]) -> Result<Vector, CoreError> {
    let mut r = Reader::new(bytes);
    let v = read_vector(&mut r)?;
    r.expect_end()?;
    Ok(v)
}

pub fn read_vector(r: &mut Reader) -> Result<Vector, CoreError> {
    let dim = r.list_len(4)?;
    let mut values = Vec::with_capacity(dim);
    for _ in 0..dim {
        values.push(r.f32_finite()?);
    }
    Ok(Vector::new(values).expect("elements already checked finite"))
}

// --- KnowledgeKey: u16 namespace, u32 id bytes ---

pub fn put_key(out: &mut Vec<u8>, key: &KnowledgeKey) {
    put_str(out, key.namespace());
    put_bytes(out, key.id());
}

pub fn read_key(r: &mut Reader) -> Result<KnowledgeKey, CoreError> {
    let ns = r.str()?;
    let id = r.bytes()?;
    KnowledgeKey::try_new(ns, id)
}

// --- EmbeddingEntry: vector, u64 version, u64 ltime ---

pub fn put_entry(out: &mut Vec<u8>, e: &EmbeddingEntry) {
    put_vector(out, &e.vector);
    put_u64(out, e.version);
    put_u64(out, e.ltime);
}

pub fn read_entry(r: &mut Reader) -> Result<EmbeddingEntry, CoreError> {
    Ok(EmbeddingEntry {
        vector: read_vector(r)?,
        version: r.u64()?,
        ltime: r.u64()?,
    })
}

// --- FeatureRecord ---
// neighbors: u32 count, each (key, f32 weight)
// label_dist: u8 flag, then u32 count + f32s
// raw_features: u8 flag, then vector
// provenance: u8 flag, then string

pub fn put_record(out: &mut Vec<u8>, rec: &FeatureRecord) {
    put_u32(out, rec.neighbors.len() as u32);
    for (key, weight) in &rec.neighbors {
        put_key(out, key);
        put_f32(out, *weight);
    }
    match &rec.label_dist {
        Some(dist) => {
            put_u8(out, 1);
            put_u32(out, dist.len() as u32);
            for &p in dist {
                put_f32(out, p);
            }
        }
        None => put_u8(out, 0),
    }
    match &rec.raw_features {
        Some(v) => {
            put_u8(out, 1);
            put_vector(out, v);
        }
        None => put_u8(out, 0),
    }
    match &rec.provenance {
        Some(p) => {
            put_u8(out, 1);
            put_str(out, p);
        }
        None => put_u8(out, 0),
    }
}

pub fn read_record(r: &mut Reader) -> Result<FeatureRecord, CoreError> {
    let n = r.list_len(11)?; // key >= 7 bytes + f32 weight
    let mut neighbors = Vec::with_capacity(n);
    for _ in 0..n {
        let key = read_key(r)?;
        let weight = r.f32_finite()?;
        neighbors.push((key, weight));
    }
    let label_dist = if r.u8()? != 0 {
        let c = r.list_len(4)?;
        let mut dist = Vec::with_capacity(c);
        for _ in 0..c {
            dist.push(r.f32_finite()?);
        }
        Some(dist)
    } else {
        None
    };
    let raw_features = if r.u8()? != 0 {
        Some(read_vector(r)?)
    } else {
        None
    };
    let provenance = if r.u8()? != 0 { Some(r.str()?) } else { None };
    let rec = FeatureRecord {
        neighbors,
        label_dist,
        raw_features,
        provenance,
    };
    rec.validate()
        .map_err(|e| CoreError::malformed(format!("invalid feature record: {e}")))?;
    Ok(rec)
}

// --- GradientDelta: vector, source string, u64 ltime ---

pub fn put_delta(out: &mut Vec<u8>, d: &GradientDelta) {
    put_vector(out, &d.delta);
    put_str(out, &d.source);
    put_u64(out, d.ltime);
}

pub fn read_delta(r: &mut Reader) -> Result<GradientDelta, CoreError> {
    Ok(GradientDelta {
        delta: read_vector(r)?,
        source: r.str()?,
        ltime: r.u64()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_vector_is_four_zero_bytes() {
        assert_eq!(encode_vector(&Vector::zeros(0)), vec![0, 0, 0, 0]);
    }

    // IEEE-754 little-endian encoding of 1.0f32.
    #[test]
    fn unit_vector_encoding() {
        let v = Vector::new(vec![1.0]).unwrap();
        assert_eq!(encode_vector(&v), vec![0x01, 0, 0, 0, 0, 0, 0x80, 0x3f]);
    }

    #[test]
    fn decode_rejects_truncation() {
        let v = Vector::new(vec![1.0, 2.0]).unwrap();
        let bytes = encode_vector(&v);
        for cut in 0..bytes.len() {
            assert!(decode_vector(&bytes[..cut]).is_err(), "cut at {cut}");
        }
    }

    #[test]
    fn decode_rejects_non_finite() {
        let mut bytes = Vec::new();
        put_u32(&mut bytes, 1);
        put_f32(&mut bytes, f32::NAN);
        assert!(decode_vector(&bytes).is_err());
        let mut bytes = Vec::new();
        put_u32(&mut bytes, 1);
        put_f32(&mut bytes, f32::INFINITY);
        assert!(decode_vector(&bytes).is_err());
    }

    #[test]
    fn decode_rejects_trailing_bytes() {
        let mut bytes = encode_vector(&Vector::zeros(1));
        bytes.push(0);
        assert!(decode_vector(&bytes).is_err());
    }

    #[test]
    fn hostile_list_length_is_rejected_cheaply() {
        let mut bytes = Vec::new();
        put_u32(&mut bytes, u32::MAX);
        assert!(decode_vector(&bytes).is_err());
    }
}
