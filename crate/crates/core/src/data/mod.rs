//! Procedural multi-domain point-cloud corpora and the three task-pair
//! generators (reconstruction, denoising, registration).

mod benchmark;
mod primitives;
mod style;
mod tasks;

pub use benchmark::{build_benchmark, generate_sample, Benchmark, BenchmarkConfig, SampleSpec};
pub use primitives::{generate_primitive, ShapeKind};
pub use style::{occlude, stylize, DensityProfile, DomainStyle, Occlusion};
pub use tasks::{
    augment, augment_with, gaussian_offsets, make_denoising_pair, make_reconstruction_pair,
    make_registration_pair, AugmentDraw, TaskKind, TaskPair, TaskParams,
};

use alloc::string::String;
use alloc::vec::Vec;

use crate::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "lowercase"))]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl core::str::FromStr for Split {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "test" => Ok(Split::Test),
            other => Err(crate::Error::invalid(alloc::format!("unknown split {other:?}"))),
        }
    }
}

/// Provenance of a generated pair.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeneratorParams {
    pub shape: ShapeKind,
    pub seed: u64,
    /// Task magnitude: sparse count, noise sigma or max rotation angle.
    pub magnitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePair {
    pub sample_id: u64,
    pub domain: String,
    pub task: TaskKind,
    pub input: PointCloud,
    pub target: PointCloud,
    pub params: GeneratorParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainDataset {
    pub domain: DomainStyle,
    pub split: Split,
    pub pairs: Vec<SamplePair>,
}

impl DomainDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs_for(&self, task: TaskKind) -> impl Iterator<Item = &SamplePair> {
        self.pairs.iter().filter(move |p| p.task == task)
    }

    pub fn find(&self, sample_id: u64) -> Option<&SamplePair> {
        self.pairs.iter().find(|p| p.sample_id == sample_id)
    }

    /// Checks the dataset invariants: non-empty, every pair tagged with this
    /// domain.
    pub fn validate(&self) -> crate::Result<()> {
        if self.pairs.is_empty() {
            return Err(crate::Error::contract(alloc::format!("domain {} has no samples", self.domain.name)));
        }
        if let Some(p) = self.pairs.iter().find(|p| p.domain != self.domain.name) {
            return Err(crate::Error::contract(alloc::format!(
                "pair {} is tagged {:?}, expected {:?}",
                p.sample_id, p.domain, self.domain.name
            )));
        }
        Ok(())
    }
}
