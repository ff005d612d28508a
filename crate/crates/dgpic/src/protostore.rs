//! `DGPC` prototype stores.
//!
//! Layout (little-endian): magic `DGPC`, version `u32`, the 32-byte
//! checkpoint fingerprint, then R (record count), C and M as `u32`. Each of
//! the R records holds a name length `u32`, the name bytes (`domain` or
//! `domain@task`), sample_count `u32`, the global prototype as C `f32` and the
//! local prototype as C·M `f32`, patch after patch. The prompt-bank index
//! follows: an entry count `u32`, then per entry the domain index `u32`,
//! sample id `u64`, task index `u8`, C global and C·M local `f32`. A CRC32 of
//! all preceding bytes closes the file.

use std::path::Path;

use dgpic_core::data::TaskKind;
use dgpic_core::engine::{DomainPrototype, PromptBank, PromptEntry, PrototypeSet, SampleFeatures};

use crate::binio::{read_file, write_file, Reader, Writer};
use crate::error::{DgpicError, Result};

pub const STORE_MAGIC: &[u8; 4] = b"DGPC";
pub const STORE_VERSION: u32 = 1;

pub fn encode_store(set: &PrototypeSet, bank: &PromptBank, path: &Path) -> Result<Vec<u8>> {
    if set.prototypes.is_empty() {
        return Err(DgpicError::format(path, "refusing to write an empty prototype list"));
    }
    set.validate()?;
    let (c, m) = (set.feature_dim, set.patch_count);
    let order: Vec<&String> = first_appearance(set.prototypes.iter().map(|p| &p.domain));
    if order != set.domains.iter().collect::<Vec<_>>() {
        return Err(DgpicError::format(path, "prototype records are not grouped in domain order"));
    }
    let mut w = Writer::default();
    w.bytes(STORE_MAGIC);
    w.u32(STORE_VERSION);
    w.bytes(&set.checkpoint_hash);
    w.u32(set.prototypes.len() as u32);
    w.u32(c as u32);
    w.u32(m as u32);
    for p in &set.prototypes {
        let key = p.key();
        w.u32(key.len() as u32);
        w.bytes(key.as_bytes());
        w.u32(p.sample_count as u32);
        w.f32s(&p.global);
        w.f32s(&p.local);
    }
    w.u32(bank.entries.len() as u32);
    for e in &bank.entries {
        if e.domain >= set.domains.len() || e.features.global.len() != c || e.features.local.len() != c * m {
            return Err(DgpicError::format(path, format!("prompt entry {} does not match the prototypes", e.sample_id)));
        }
        w.u32(e.domain as u32);
        w.u64(e.sample_id);
        w.u8(e.task.index());
        w.f32s(&e.features.global);
        w.f32s(&e.features.local);
    }
    Ok(w.finish())
}

fn first_appearance<'a>(names: impl Iterator<Item = &'a String>) -> Vec<&'a String> {
    let mut out: Vec<&String> = Vec::new();
    for n in names {
        if !out.contains(&n) {
            out.push(n);
        }
    }
    out
}

pub fn decode_store(raw: &[u8], path: &Path) -> Result<(PrototypeSet, PromptBank)> {
    let mut r = Reader::open(raw, path, STORE_MAGIC, STORE_VERSION)?;
    let mut checkpoint_hash = [0u8; 32];
    checkpoint_hash.copy_from_slice(r.take(32)?);
    let records = r.len_u32()?;
    let c = r.len_u32()?;
    let m = r.len_u32()?;
    if records == 0 || c == 0 || m == 0 {
        return Err(r.err("empty prototype store"));
    }
    let mut prototypes = Vec::with_capacity(records);
    for _ in 0..records {
        let len = r.len_u32()?;
        let key = std::str::from_utf8(r.take(len)?).map_err(|_| r.err("prototype name is not UTF-8"))?;
        let (domain, task) = DomainPrototype::parse_key(key)?;
        let sample_count = r.len_u32()?;
        let global = r.f32s(c)?;
        let local = r.f32s(c * m)?;
        prototypes.push(DomainPrototype { domain, task, global, local, sample_count });
    }
    let domains: Vec<String> = first_appearance(prototypes.iter().map(|p| &p.domain)).into_iter().cloned().collect();
    let entries = r.len_u32()?;
    let mut bank = PromptBank { entries: Vec::with_capacity(entries) };
    for _ in 0..entries {
        let domain = r.len_u32()?;
        let sample_id = r.u64()?;
        let t = r.u8()?;
        let task = TaskKind::from_index(t).ok_or_else(|| r.err(format!("unknown task index {t}")))?;
        let global = r.f32s(c)?;
        let local = r.f32s(c * m)?;
        if domain >= domains.len() {
            return Err(r.err(format!("prompt entry {sample_id} names domain {domain}")));
        }
        bank.entries.push(PromptEntry { domain, sample_id, task, features: SampleFeatures { global, local } });
    }
    r.end()?;
    let set = PrototypeSet { checkpoint_hash, feature_dim: c, patch_count: m, domains, prototypes };
    set.validate()?;
    Ok((set, bank))
}

pub fn save_prototypes(set: &PrototypeSet, bank: &PromptBank, path: &Path) -> Result<()> {
    let bytes = encode_store(set, bank, path)?;
    write_file(path, &bytes)
}

pub fn load_prototypes(path: &Path) -> Result<(PrototypeSet, PromptBank)> {
    decode_store(&read_file(path, "prototype store")?, path)
}

/// Loads a store and rejects it unless it was built from `checkpoint_hash`.
pub fn load_prototypes_for(path: &Path, checkpoint_hash: &[u8; 32]) -> Result<(PrototypeSet, PromptBank)> {
    let (set, bank) = load_prototypes(path)?;
    set.check_hash(checkpoint_hash)?;
    Ok((set, bank))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> (PrototypeSet, PromptBank) {
        let (c, m) = (3, 2);
        let f = |s: f64| SampleFeatures {
            global: (0..c).map(|i| s + i as f64 * 0.25).collect(),
            local: (0..c * m).map(|i| s - i as f64 * 0.5).collect(),
        };
        let mut prototypes = Vec::new();
        for d in ["a", "b"] {
            for t in [TaskKind::Reconstruction, TaskKind::Denoising] {
                let x = f(t.index() as f64);
                prototypes.push(DomainPrototype { domain: d.into(), task: Some(t), global: x.global, local: x.local, sample_count: 2 });
            }
        }
        let set = PrototypeSet { checkpoint_hash: [7; 32], feature_dim: c, patch_count: m, domains: vec!["a".into(), "b".into()], prototypes };
        let bank = PromptBank {
            entries: vec![
                PromptEntry { domain: 0, sample_id: 4, task: TaskKind::Denoising, features: f(1.5) },
                PromptEntry { domain: 1, sample_id: 9, task: TaskKind::Registration, features: f(-2.0) },
            ],
        };
        (set, bank)
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let (set, bank) = sample();
        let p = Path::new("p.dgpc");
        let bytes = encode_store(&set, &bank, p).unwrap();
        let (s2, b2) = decode_store(&bytes, p).unwrap();
        assert_eq!((&s2, &b2), (&set, &bank));
        assert_eq!(encode_store(&s2, &b2, p).unwrap(), bytes);
    }

    #[test]
    fn empty_list_is_a_format_error() {
        let (mut set, bank) = sample();
        set.prototypes.clear();
        assert!(matches!(encode_store(&set, &bank, Path::new("p")), Err(DgpicError::Format { .. })));
    }

    #[test]
    fn corruption_and_staleness() {
        let (set, bank) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.dgpc");
        save_prototypes(&set, &bank, &path).unwrap();
        assert!(matches!(
            load_prototypes_for(&path, &[8; 32]),
            Err(DgpicError::Core(dgpic_core::Error::Stale(_)))
        ));
        assert!(load_prototypes_for(&path, &[7; 32]).is_ok());
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[60] ^= 0x10;
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(load_prototypes(&path), Err(DgpicError::Corrupt { .. })));
    }
}
