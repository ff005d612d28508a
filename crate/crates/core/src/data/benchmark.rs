use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::{
    generate_primitive, make_denoising_pair, make_reconstruction_pair, make_registration_pair, stylize,
    DomainDataset, DomainStyle, GeneratorParams, SamplePair, ShapeKind, Split, TaskKind, TaskParams,
};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Leave-one-domain-out corpus layout.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub sources: Vec<DomainStyle>,
    pub target: DomainStyle,
    pub tasks: Vec<TaskKind>,
    pub shapes: Vec<ShapeKind>,
    /// Train pairs per (domain, task).
    pub train_per_task: usize,
    /// Test pairs per (domain, task).
    pub test_per_task: usize,
    pub n_points: usize,
    pub task_params: TaskParams,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            seed: 0,
            sources: alloc::vec![
                DomainStyle::clean_dense(),
                DomainStyle::clean_clustered(),
                DomainStyle::low_res_jittered()
            ],
            target: DomainStyle::scan_noisy_occluded(),
            tasks: TaskKind::ALL.to_vec(),
            shapes: ShapeKind::ALL.to_vec(),
            train_per_task: 200,
            test_per_task: 50,
            n_points: 1024,
            task_params: TaskParams::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sources.len() < 2 {
            return Err(Error::Config("need at least two source domains".into()));
        }
        if self.tasks.is_empty() || self.shapes.is_empty() {
            return Err(Error::Config("need at least one task and one shape".into()));
        }
        let mut names = BTreeSet::new();
        for s in &self.sources {
            s.validate()?;
            if !names.insert(s.name.as_str()) {
                return Err(Error::Config(format!("duplicate source domain {:?}", s.name)));
            }
        }
        self.target.validate()?;
        if names.contains(self.target.name.as_str()) {
            return Err(Error::Config(format!("target domain {:?} is also a source", self.target.name)));
        }
        if self.train_per_task == 0 || self.test_per_task == 0 {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        if self.n_points < 64 {
            return Err(Error::Config("n_points must be at least 64".into()));
        }
        if self.task_params.sparse_count > self.n_points {
            return Err(Error::Config("sparse_count exceeds n_points".into()));
        }
        Ok(())
    }

    /// Every (domain, split, task, index) the corpus contains, in canonical
    /// order, with its sample id. Sources get train and test splits, the
    /// held-out target only a test split.
    pub fn plan(&self) -> Vec<SampleSpec> {
        let mut out = Vec::new();
        let mut next_id = 0u64;
        let mut push = |domain: usize, split: Split, count: usize| {
            for &task in &self.tasks {
                for index in 0..count {
                    out.push(SampleSpec { domain, split, task, index, sample_id: next_id });
                    next_id += 1;
                }
            }
        };
        for d in 0..self.sources.len() {
            push(d, Split::Train, self.train_per_task);
            push(d, Split::Test, self.test_per_task);
        }
        push(self.sources.len(), Split::Test, self.test_per_task);
        out
    }

    /// Domain style by plan index; `sources.len()` is the target.
    pub fn style(&self, domain: usize) -> &DomainStyle {
        self.sources.get(domain).unwrap_or(&self.target)
    }
}

/// One entry of [`BenchmarkConfig::plan`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SampleSpec {
    pub domain: usize,
    pub split: Split,
    pub task: TaskKind,
    pub index: usize,
    pub sample_id: u64,
}

/// Generates one pair. Pure in `(config, spec)`, so a corpus can be built in
/// any order or in parallel.
pub fn generate_sample(config: &BenchmarkConfig, spec: &SampleSpec) -> Result<SamplePair> {
    let style = config.style(spec.domain);
    let seed = derive_seed(
        config.seed,
        &[style.name.as_bytes(), spec.split.as_str().as_bytes(), spec.task.as_str().as_bytes(), &(spec.index as u64).to_le_bytes()],
    );
    let shape = config.shapes[spec.index % config.shapes.len()];
    let base = generate_primitive(shape, config.n_points, derive_seed(seed, &[b"shape"]))?;
    let styled = stylize(&base, style, derive_seed(seed, &[b"style"]), config.n_points)?;
    let task_seed = derive_seed(seed, &[b"task"]);
    let p = &config.task_params;
    let pair = match spec.task {
        TaskKind::Reconstruction => make_reconstruction_pair(&styled, p.sparse_count, task_seed)?,
        TaskKind::Denoising => make_denoising_pair(&styled, p.sigma, task_seed)?,
        TaskKind::Registration => make_registration_pair(&styled, p.max_angle, task_seed)?,
    };
    Ok(SamplePair {
        sample_id: spec.sample_id,
        domain: style.name.clone(),
        task: spec.task,
        input: pair.input,
        target: pair.target,
        params: GeneratorParams { shape, seed, magnitude: p.magnitude(spec.task) },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    /// Training split of every source domain, in config order.
    pub sources: Vec<DomainDataset>,
    /// Test split of every source domain.
    pub source_tests: Vec<DomainDataset>,
    /// Test split of the held-out target domain.
    pub target: DomainDataset,
}

impl Benchmark {
    /// Assembles generated pairs (in plan order) into datasets.
    pub fn assemble(config: &BenchmarkConfig, plan: &[SampleSpec], pairs: Vec<SamplePair>) -> Result<Self> {
        if plan.len() != pairs.len() {
            return Err(Error::contract("plan and pair counts differ"));
        }
        let empty = |domain: usize, split| DomainDataset { domain: config.style(domain).clone(), split, pairs: Vec::new() };
        let mut sources: Vec<DomainDataset> = (0..config.sources.len()).map(|d| empty(d, Split::Train)).collect();
        let mut source_tests: Vec<DomainDataset> = (0..config.sources.len()).map(|d| empty(d, Split::Test)).collect();
        let mut target = empty(config.sources.len(), Split::Test);
        for (spec, pair) in plan.iter().zip(pairs) {
            let ds = if spec.domain == config.sources.len() {
                &mut target
            } else if spec.split == Split::Train {
                &mut sources[spec.domain]
            } else {
                &mut source_tests[spec.domain]
            };
            ds.pairs.push(pair);
        }
        Ok(Benchmark { sources, source_tests, target })
    }

    pub fn all_datasets(&self) -> impl Iterator<Item = &DomainDataset> {
        self.sources.iter().chain(&self.source_tests).chain(core::iter::once(&self.target))
    }

    pub fn source_names(&self) -> Vec<String> {
        self.sources.iter().map(|d| d.domain.name.clone()).collect()
    }
}

/// Builds the whole corpus sequentially.
pub fn build_benchmark(config: &BenchmarkConfig) -> Result<Benchmark> {
    config.validate()?;
    let plan = config.plan();
    let pairs = plan.iter().map(|s| generate_sample(config, s)).collect::<Result<Vec<_>>>()?;
    Benchmark::assemble(config, &plan, pairs)
}
