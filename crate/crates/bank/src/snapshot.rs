//! Snapshot persistence: one file per shard, magic `CKB1`, containing the
//! namespace configs and all entries (embeddings, feature records, and
//! still-pending gradient deltas) in the core binary encodings.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use kb_core::wire::{self, Reader};
use kb_core::CoreError;

use crate::config::{DefaultInit, NamespaceConfig, NamespaceKind};
use crate::shard::Shard;
use crate::{BankError, KnowledgeBank};

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"CKB1";

fn shard_file(dir: &Path, index: usize) -> std::path::PathBuf {
    dir.join(format!("shard-{index:04}.ckb1"))
}

fn put_config(out: &mut Vec<u8>, cfg: &NamespaceConfig) {
    wire::put_str(out, &cfg.name);
    wire::put_u8(out, match cfg.kind {
        NamespaceKind::Features => 0,
        NamespaceKind::Embeddings => 1,
    });
    wire::put_u32(out, cfg.dim as u32);
    match cfg.default_init {
        DefaultInit::Zeros => {
            wire::put_u8(out, 0);
            wire::put_f32(out, 0.0);
        }
        DefaultInit::Uniform { scale } => {
            wire::put_u8(out, 1);
            wire::put_f32(out, scale);
        }
    }
    wire::put_u64(out, cfg.flush_expiry_ticks);
    wire::put_f32(out, cfg.outlier_factor);
    wire::put_u64(out, cfg.seed);
}

fn read_config(r: &mut Reader) -> Result<NamespaceConfig, CoreError> {
    let name = r.str()?;
    let kind = match r.u8()? {
        0 => NamespaceKind::Features,
        1 => NamespaceKind::Embeddings,
        other => return Err(CoreError::malformed(format!("bad namespace kind {other}"))),
    };
    let dim = r.u32()? as usize;
    let init_tag = r.u8()?;
    let scale = r.f32_finite()?;
    let default_init = match init_tag {
        0 => DefaultInit::Zeros,
        1 => DefaultInit::Uniform { scale },
        other => return Err(CoreError::malformed(format!("bad init tag {other}"))),
    };
    Ok(NamespaceConfig {
        name,
        kind,
        dim,
        default_init,
        flush_expiry_ticks: r.u64()?,
        outlier_factor: r.f32_finite()?,
        seed: r.u64()?,
    })
}

impl KnowledgeBank {
    /// Write one snapshot file per shard into `dir` (created if needed).
    /// Files are written to a temp name and renamed, so a crash never
    /// leaves a readable half-snapshot.
    pub fn save_snapshot(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut configs: Vec<&NamespaceConfig> = self.namespace_map().values().collect();
        configs.sort_by(|a, b| a.name.cmp(&b.name));
        for (index, shard) in self.shards().iter().enumerate() {
            let shard = shard.lock();
            let mut out = Vec::new();
            out.extend_from_slice(SNAPSHOT_MAGIC);
            wire::put_u32(&mut out, index as u32);
            wire::put_u32(&mut out, self.num_shards() as u32);
            wire::put_u64(&mut out, shard.clock);
            wire::put_u32(&mut out, configs.len() as u32);
            for cfg in &configs {
                put_config(&mut out, cfg);
            }
            wire::put_u32(&mut out, shard.embeddings.len() as u32);
            for (key, entry) in &shard.embeddings {
                wire::put_key(&mut out, key);
                wire::put_entry(&mut out, entry);
            }
            wire::put_u32(&mut out, shard.features.len() as u32);
            for (key, record) in &shard.features {
                wire::put_key(&mut out, key);
                wire::put_record(&mut out, record);
            }
            wire::put_u32(&mut out, shard.pending.len() as u32);
            for (key, deltas) in &shard.pending {
                wire::put_key(&mut out, key);
                wire::put_u32(&mut out, deltas.len() as u32);
                for d in deltas {
                    wire::put_delta(&mut out, d);
                }
            }
            let tmp = dir.join(format!("shard-{index:04}.tmp"));
            let mut f = fs::File::create(&tmp)?;
            f.write_all(&out)?;
            f.sync_all()?;
            fs::rename(&tmp, shard_file(dir, index))?;
        }
        Ok(())
    }

    /// Rebuild a bank from a snapshot directory.
    pub fn load_snapshot(dir: &Path) -> Result<Self, BankError> {
        let first = fs::read(shard_file(dir, 0))
            .map_err(|e| BankError::MalformedRecord(format!("snapshot read: {e}")))?;
        let (num_shards, configs, shard0) = decode_shard_file(&first, 0)
            .map_err(|e| BankError::MalformedRecord(format!("snapshot shard 0: {e}")))?;
        let bank = KnowledgeBank::new(num_shards, configs.clone())?;
        bank.restore_shard(shard0);
        for index in 1..num_shards {
            let bytes = fs::read(shard_file(dir, index))
                .map_err(|e| BankError::MalformedRecord(format!("snapshot read: {e}")))?;
            let (n, cfgs, shard) = decode_shard_file(&bytes, index)
                .map_err(|e| BankError::MalformedRecord(format!("snapshot shard {index}: {e}")))?;
            if n != num_shards || cfgs != configs {
                return Err(BankError::MalformedRecord(
                    "inconsistent shard snapshot headers".into(),
                ));
            }
            bank.restore_shard(shard);
        }
        Ok(bank)
    }
}

fn decode_shard_file(
    bytes: &[u8],
    expect_index: usize,
) -> Result<(usize, Vec<NamespaceConfig>, Shard), CoreError> {
    let mut r = Reader::new(bytes);
    let mut magic = [0u8; 4];
    for b in &mut magic {
        *b = r.u8()?;
    }
    if &magic != SNAPSHOT_MAGIC {
        return Err(CoreError::malformed("bad snapshot magic"));
    }
    let index = r.u32()? as usize;
    if index != expect_index {
        return Err(CoreError::malformed("shard index mismatch"));
    }
    let num_shards = r.u32()? as usize;
    if num_shards == 0 || index >= num_shards {
        return Err(CoreError::malformed("bad shard count"));
    }
    let clock = r.u64()?;
    let ncfg = r.list_len(1)?;
    let mut configs = Vec::with_capacity(ncfg);
    for _ in 0..ncfg {
        configs.push(read_config(&mut r)?);
    }
    let mut shard = Shard::new(index);
    shard.clock = clock;
    let nemb = r.list_len(1)?;
    for _ in 0..nemb {
        let key = wire::read_key(&mut r)?;
        let entry = wire::read_entry(&mut r)?;
        shard.embeddings.insert(key, entry);
    }
    let nfeat = r.list_len(1)?;
    for _ in 0..nfeat {
        let key = wire::read_key(&mut r)?;
        let record = wire::read_record(&mut r)?;
        shard.features.insert(key, record);
    }
    let npend = r.list_len(1)?;
    for _ in 0..npend {
        let key = wire::read_key(&mut r)?;
        let ndel = r.list_len(1)?;
        let mut deltas = Vec::with_capacity(ndel);
        for _ in 0..ndel {
            deltas.push(wire::read_delta(&mut r)?);
        }
        shard.pending.insert(key, deltas);
    }
    r.expect_end()?;
    Ok((num_shards, configs, shard))
}
