//! On-disk datasets: a JSON-lines manifest plus one `.xyz` file per cloud.
//!
//! The first manifest line is a header carrying the format version, the
//! domain style, the split and the record count; every following line is one
//! pair.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use dgpic_core::data::{DomainDataset, DomainStyle, GeneratorParams, SamplePair, Split, TaskKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DgpicError, Result};
use crate::xyz;

pub const MANIFEST_FORMAT: &str = "dgpic-manifest/1";
pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub domain: DomainStyle,
    pub split: Split,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub sample_id: u64,
    pub domain: String,
    pub task: TaskKind,
    pub split: Split,
    pub input_path: String,
    pub target_path: String,
    pub generator_params: GeneratorParams,
}

/// `root/<domain>/<split>`.
pub fn dataset_dir(root: &Path, domain: &str, split: Split) -> PathBuf {
    root.join(domain).join(split.as_str())
}

fn record_for(ds: &DomainDataset, pair: &SamplePair) -> ManifestRecord {
    ManifestRecord {
        sample_id: pair.sample_id,
        domain: pair.domain.clone(),
        task: pair.task,
        split: ds.split,
        input_path: format!("clouds/{:06}_input.xyz", pair.sample_id),
        target_path: format!("clouds/{:06}_target.xyz", pair.sample_id),
        generator_params: pair.params,
    }
}

pub fn save_dataset(ds: &DomainDataset, dir: &Path) -> Result<()> {
    ds.validate()?;
    let clouds = dir.join("clouds");
    fs::create_dir_all(&clouds).map_err(|e| DgpicError::io(&clouds, e))?;
    let records: Vec<ManifestRecord> = ds.pairs.iter().map(|p| record_for(ds, p)).collect();
    ds.pairs.par_iter().zip(&records).try_for_each(|(pair, rec)| -> Result<()> {
        xyz::write(&dir.join(&rec.input_path), &pair.input)?;
        xyz::write(&dir.join(&rec.target_path), &pair.target)
    })?;
    let header =
        ManifestHeader { format: MANIFEST_FORMAT.into(), domain: ds.domain.clone(), split: ds.split, count: records.len() };
    let mut text = serde_json::to_string(&header).expect("header serializes");
    text.push('\n');
    for r in &records {
        text.push_str(&serde_json::to_string(r).expect("record serializes"));
        text.push('\n');
    }
    let path = dir.join(MANIFEST_FILE);
    let mut f = fs::File::create(&path).map_err(|e| DgpicError::io(&path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| DgpicError::io(&path, e))
}

/// Parses and checks a manifest without touching the cloud files.
pub fn read_manifest(path: &Path) -> Result<(ManifestHeader, Vec<ManifestRecord>)> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(DgpicError::Missing { what: "dataset manifest".into(), path: path.to_path_buf() })
        }
        Err(e) => return Err(DgpicError::io(path, e)),
    };
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| DgpicError::parse(path, 1, "empty manifest"))?;
    let raw: serde_json::Value = serde_json::from_str(first).map_err(|e| DgpicError::parse(path, 1, e.to_string()))?;
    match raw.get("format").and_then(|v| v.as_str()) {
        Some(MANIFEST_FORMAT) => {}
        Some(other) => {
            return Err(DgpicError::Version { path: path.into(), found: other.into(), expected: MANIFEST_FORMAT.into() })
        }
        None => return Err(DgpicError::parse(path, 1, "header lacks a format field")),
    }
    let header: ManifestHeader = serde_json::from_value(raw).map_err(|e| DgpicError::parse(path, 1, e.to_string()))?;
    let mut records = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let rec: ManifestRecord =
            serde_json::from_str(line).map_err(|e| DgpicError::parse(path, i + 2, e.to_string()))?;
        if rec.domain != header.domain.name || rec.split != header.split {
            return Err(DgpicError::parse(path, i + 2, "record does not belong to this dataset"));
        }
        records.push(rec);
    }
    if records.len() != header.count {
        return Err(DgpicError::parse(
            path,
            records.len() + 2,
            format!("header announces {} records, found {}", header.count, records.len()),
        ));
    }
    Ok((header, records))
}

pub fn load_dataset(dir: &Path) -> Result<DomainDataset> {
    let (header, records) = read_manifest(&dir.join(MANIFEST_FILE))?;
    let pairs = records
        .par_iter()
        .map(|r| -> Result<SamplePair> {
            let load = |rel: &str| {
                let p = dir.join(rel);
                if !p.exists() {
                    return Err(DgpicError::Missing { what: format!("sample {}", r.sample_id), path: p });
                }
                xyz::read(&p, None)
            };
            Ok(SamplePair {
                sample_id: r.sample_id,
                domain: r.domain.clone(),
                task: r.task,
                input: load(&r.input_path)?,
                target: load(&r.target_path)?,
                params: r.generator_params,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ds = DomainDataset { domain: header.domain, split: header.split, pairs };
    ds.validate()?;
    Ok(ds)
}
