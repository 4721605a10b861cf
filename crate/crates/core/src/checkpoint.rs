//! Checkpoint payload and its file encoding.
//!
//! Layout: magic `CKPT`, u64 step, u32 param count, then per parameter:
//! name (u16-prefixed), u32 rows, u32 cols, row-major f32 data. A
//! checkpoint whose metadata map is non-empty appends a trailing metadata
//! section (u32 count, then u16-prefixed key/value pairs); readers that
//! stop after the parameter section simply never see it.

use std::collections::BTreeMap;

use crate::wire::{put_f32, put_str, put_u32, put_u64, Reader};
use crate::{CoreError, Matrix};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CKPT";

/// Named parameter matrices plus the trainer global step at write time.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct Checkpoint {
    pub step: u64,
    pub params: BTreeMap<String, Matrix>,
    pub metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(step: u64) -> Self {
        Checkpoint {
            step,
            ..Default::default()
        }
    }

    pub fn insert(&mut self, name: impl Into<String>, m: Matrix) {
        self.params.insert(name.into(), m);
    }

    pub fn param(&self, name: &str) -> Option<&Matrix> {
        self.params.get(name)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u64(&mut out, self.step);
        put_u32(&mut out, self.params.len() as u32);
        for (name, m) in &self.params {
            put_str(&mut out, name);
            put_u32(&mut out, m.rows() as u32);
            put_u32(&mut out, m.cols() as u32);
            for &v in m.data() {
                put_f32(&mut out, v);
            }
        }
        if !self.metadata.is_empty() {
            put_u32(&mut out, self.metadata.len() as u32);
            for (k, v) in &self.metadata {
                put_str(&mut out, k);
                put_str(&mut out, v);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CoreError> {
        let mut r = Reader::new(bytes);
        let mut magic = [0u8; 4];
        for b in &mut magic {
            *b = r.u8()?;
        }
        if &magic != CHECKPOINT_MAGIC {
            return Err(CoreError::malformed("bad checkpoint magic"));
        }
        let step = r.u64()?;
        let count = r.list_len(10)?;
        let mut params = BTreeMap::new();
        for _ in 0..count {
            let name = r.str()?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let n = rows
                .checked_mul(cols)
                .ok_or_else(|| CoreError::malformed("matrix shape overflow"))?;
            if n > r.remaining() / 4 {
                return Err(CoreError::malformed("matrix data exceeds payload"));
            }
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                data.push(r.f32_finite()?);
            }
            params.insert(name, Matrix::from_vec(rows, cols, data)?);
        }
        let mut metadata = BTreeMap::new();
        if !r.is_empty() {
            let mcount = r.list_len(4)?;
            for _ in 0..mcount {
                let k = r.str()?;
                let v = r.str()?;
                metadata.insert(k, v);
            }
            r.expect_end()?;
        }
        Ok(Checkpoint {
            step,
            params,
            metadata,
        })
    }
}
