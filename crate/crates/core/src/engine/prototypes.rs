use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use crate::data::{DomainDataset, TaskKind};
use crate::geometry::PointCloud;
use crate::model::{embed_patches, global_feature, patchify, ModelParams, TokenMatrix};
use crate::{Error, Result};

/// Per-sample features: the max-pooled global vector and the `M x C` patch
/// tokens (one contiguous C-vector per patch).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFeatures {
    pub global: Vec<f64>,
    pub local: Vec<f64>,
}

/// Tokenizes `input` and returns both its tokens and their pooled features.
pub fn sample_features(input: &PointCloud, params: &ModelParams) -> Result<(TokenMatrix, SampleFeatures)> {
    let cfg = params.config();
    let tokens = embed_patches(&patchify(input, cfg.patch_count, cfg.patch_size)?, params)?;
    let global = global_feature(&tokens)?;
    let local = tokens.tokens.clone();
    Ok((tokens, SampleFeatures { global, local }))
}

/// Whether prototypes are kept per (domain, task) or per domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "kebab-case"))]
pub enum PrototypeGrouping {
    #[default]
    PerDomainTask,
    PerDomain,
}

impl PrototypeGrouping {
    pub fn as_str(self) -> &'static str {
        match self {
            PrototypeGrouping::PerDomainTask => "per-domain-task",
            PrototypeGrouping::PerDomain => "per-domain",
        }
    }
}

impl FromStr for PrototypeGrouping {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-domain-task" => Ok(PrototypeGrouping::PerDomainTask),
            "per-domain" => Ok(PrototypeGrouping::PerDomain),
            other => Err(Error::invalid(format!("unknown prototype grouping {other:?}"))),
        }
    }
}

/// Mean features of one source domain (optionally restricted to one task).
#[derive(Debug, Clone, PartialEq)]
pub struct DomainPrototype {
    pub domain: String,
    pub task: Option<TaskKind>,
    pub global: Vec<f64>,
    /// `M x C`, one contiguous C-vector per patch.
    pub local: Vec<f64>,
    pub sample_count: usize,
}

impl DomainPrototype {
    /// Stored name: `domain` or `domain@task`.
    pub fn key(&self) -> String {
        match self.task {
            Some(t) => format!("{}@{}", self.domain, t.as_str()),
            None => self.domain.clone(),
        }
    }

    pub fn parse_key(key: &str) -> Result<(String, Option<TaskKind>)> {
        match key.split_once('@') {
            Some((d, t)) => Ok((d.to_string(), Some(t.parse()?))),
            None => Ok((key.to_string(), None)),
        }
    }

    pub fn patch(&self, m: usize, c: usize) -> &[f64] {
        &self.local[m * c..(m + 1) * c]
    }
}

/// All source prototypes produced by one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeSet {
    pub checkpoint_hash: [u8; 32],
    pub feature_dim: usize,
    pub patch_count: usize,
    /// Source domain names in training order.
    pub domains: Vec<String>,
    pub prototypes: Vec<DomainPrototype>,
}

impl PrototypeSet {
    pub fn grouping(&self) -> PrototypeGrouping {
        if self.prototypes.iter().any(|p| p.task.is_some()) {
            PrototypeGrouping::PerDomainTask
        } else {
            PrototypeGrouping::PerDomain
        }
    }

    /// One prototype per source domain, in domain order, for `task`.
    pub fn for_task(&self, task: TaskKind) -> Result<Vec<&DomainPrototype>> {
        let grouping = self.grouping();
        self.domains
            .iter()
            .map(|d| {
                self.prototypes
                    .iter()
                    .find(|p| {
                        &p.domain == d && (grouping == PrototypeGrouping::PerDomain || p.task == Some(task))
                    })
                    .ok_or_else(|| Error::contract(format!("no prototype for domain {d} and task {}", task.as_str())))
            })
            .collect()
    }

    pub fn check_hash(&self, hash: &[u8; 32]) -> Result<()> {
        if &self.checkpoint_hash != hash {
            return Err(Error::Stale("prototypes were estimated with a different checkpoint".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.prototypes.is_empty() {
            return Err(Error::contract("empty prototype set"));
        }
        let (c, m) = (self.feature_dim, self.patch_count);
        for p in &self.prototypes {
            if p.global.len() != c || p.local.len() != c * m {
                return Err(Error::shape(format!("prototype {} does not match C = {c}, M = {m}", p.key())));
            }
            if p.sample_count == 0 {
                return Err(Error::contract(format!("prototype {} has no samples", p.key())));
            }
            if p.global.iter().chain(&p.local).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("prototype {}", p.key())));
            }
            if !self.domains.contains(&p.domain) {
                return Err(Error::contract(format!("prototype {} names an unknown domain", p.key())));
            }
        }
        Ok(())
    }
}

/// Cached features of one training sample usable as a prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptEntry {
    /// Index into [`PrototypeSet::domains`].
    pub domain: usize,
    pub sample_id: u64,
    pub task: TaskKind,
    pub features: SampleFeatures,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PromptBank {
    pub entries: Vec<PromptEntry>,
}

impl PromptBank {
    pub fn candidates(&self, domain: usize, task: TaskKind) -> impl Iterator<Item = &PromptEntry> {
        self.entries.iter().filter(move |e| e.domain == domain && e.task == task)
    }
}

/// Averages precomputed features into prototypes and a prompt bank.
/// `features[d][i]` belongs to `sources[d].pairs[i]`.
pub fn prototypes_from_features(
    sources: &[DomainDataset],
    features: &[Vec<SampleFeatures>],
    checkpoint_hash: [u8; 32],
    grouping: PrototypeGrouping,
) -> Result<(PrototypeSet, PromptBank)> {
    if sources.is_empty() {
        return Err(Error::contract("no source domains"));
    }
    if features.len() != sources.len() {
        return Err(Error::shape("feature lists do not match the source domains"));
    }
    let first = features.iter().flatten().next().ok_or_else(|| Error::contract("no source samples"))?;
    let (c, mc) = (first.global.len(), first.local.len());
    if c == 0 || !mc.is_multiple_of(c) {
        return Err(Error::shape("inconsistent feature widths"));
    }
    let mut prototypes = Vec::new();
    let mut bank = PromptBank::default();
    for (d, (ds, feats)) in sources.iter().zip(features).enumerate() {
        if ds.pairs.is_empty() {
            return Err(Error::contract(format!("domain {} has no samples", ds.domain.name)));
        }
        if feats.len() != ds.pairs.len() {
            return Err(Error::shape(format!("domain {} has {} pairs but {} feature rows", ds.domain.name, ds.pairs.len(), feats.len())));
        }
        // group members in dataset order; BTreeMap keeps task order stable
        let mut groups: BTreeMap<Option<u8>, Vec<usize>> = BTreeMap::new();
        for (i, p) in ds.pairs.iter().enumerate() {
            let key = match grouping {
                PrototypeGrouping::PerDomainTask => Some(p.task.index()),
                PrototypeGrouping::PerDomain => None,
            };
            groups.entry(key).or_default().push(i);
            let f = &feats[i];
            if f.global.len() != c || f.local.len() != mc {
                return Err(Error::shape("inconsistent feature widths"));
            }
            bank.entries.push(PromptEntry { domain: d, sample_id: p.sample_id, task: p.task, features: f.clone() });
        }
        for (key, members) in groups {
            let mut global = feats[members[0]].global.clone();
            let mut local = feats[members[0]].local.clone();
            for &i in &members[1..] {
                for (g, v) in global.iter_mut().zip(&feats[i].global) {
                    *g += v;
                }
                for (l, v) in local.iter_mut().zip(&feats[i].local) {
                    *l += v;
                }
            }
            let n = members.len() as f64;
            for v in global.iter_mut().chain(local.iter_mut()) {
                *v /= n;
            }
            prototypes.push(DomainPrototype {
                domain: ds.domain.name.clone(),
                task: key.and_then(TaskKind::from_index),
                global,
                local,
                sample_count: members.len(),
            });
        }
    }
    let set = PrototypeSet {
        checkpoint_hash,
        feature_dim: c,
        patch_count: mc / c,
        domains: sources.iter().map(|s| s.domain.name.clone()).collect(),
        prototypes,
    };
    set.validate()?;
    Ok((set, bank))
}

/// Local prototypes are per-patch means of the input tokens over a domain's
/// training samples; global prototypes are means of the max-pooled tokens.
pub fn estimate_prototypes(
    sources: &[DomainDataset],
    params: &ModelParams,
    grouping: PrototypeGrouping,
) -> Result<(PrototypeSet, PromptBank)> {
    let features = sources
        .iter()
        .map(|ds| ds.pairs.iter().map(|p| sample_features(&p.input, params).map(|(_, f)| f)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    prototypes_from_features(sources, &features, params.fingerprint(), grouping)
}
