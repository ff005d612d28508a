//! Experiment configuration, stored as TOML.
//!
//! ```toml
//! [benchmark]
//! seed = 0
//! sources = ["clean-dense", "clean-clustered", "low-res-jittered"]
//! target = "scan-noisy-occluded"
//! train_per_task = 200
//!
//! [model]
//! epochs = 30
//!
//! [engine]
//! modes = ["none", "full"]
//!
//! [run]
//! seeds = [1, 2, 3]
//! out_dir = "runs/default"
//! ```
//!
//! Domain names resolve against the built-in styles and any
//! `[[benchmark.styles]]` tables. Omitted keys take their defaults.

use std::fs;
use std::path::{Path, PathBuf};

use dgpic_core::data::{BenchmarkConfig, DomainStyle, ShapeKind, TaskKind, TaskParams};
use dgpic_core::engine::{InferenceSettings, PrototypeGrouping, ShiftMode};
use dgpic_core::model::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::error::{DgpicError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkConfig,
    pub model: ModelConfig,
    pub engine: EngineConfig,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub modes: Vec<ShiftMode>,
    pub lambda: f64,
    pub negate_distances: bool,
    pub grouping: PrototypeGrouping,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            modes: vec![ShiftMode::None, ShiftMode::Full],
            lambda: 0.5,
            negate_distances: false,
            grouping: PrototypeGrouping::PerDomainTask,
        }
    }
}

impl EngineConfig {
    pub fn settings(&self) -> InferenceSettings {
        InferenceSettings { lambda: self.lambda, negate_distances: self.negate_distances }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct BenchmarkSection {
    seed: u64,
    sources: Vec<String>,
    target: String,
    tasks: Vec<TaskKind>,
    shapes: Vec<ShapeKind>,
    train_per_task: usize,
    test_per_task: usize,
    n_points: usize,
    task_params: TaskParams,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    styles: Vec<DomainStyle>,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        BenchmarkSection::from_config(&BenchmarkConfig::default())
    }
}

impl BenchmarkSection {
    fn from_config(b: &BenchmarkConfig) -> Self {
        let presets = DomainStyle::presets();
        let mut styles = Vec::new();
        for s in b.sources.iter().chain([&b.target]) {
            if !presets.contains(s) && !styles.contains(s) {
                styles.push(s.clone());
            }
        }
        BenchmarkSection {
            seed: b.seed,
            sources: b.sources.iter().map(|s| s.name.clone()).collect(),
            target: b.target.name.clone(),
            tasks: b.tasks.clone(),
            shapes: b.shapes.clone(),
            train_per_task: b.train_per_task,
            test_per_task: b.test_per_task,
            n_points: b.n_points,
            task_params: b.task_params,
            styles,
        }
    }

    fn resolve(self) -> Result<BenchmarkConfig> {
        let lookup = |name: &str| -> Result<DomainStyle> {
            self.styles
                .iter()
                .find(|s| s.name == name)
                .cloned()
                .or_else(|| DomainStyle::presets().into_iter().find(|s| s.name == name))
                .ok_or_else(|| {
                    let known: Vec<String> = DomainStyle::presets().iter().map(|s| s.name.clone()).collect();
                    DgpicError::Usage(format!("unknown domain style {name:?} (built-in: {})", known.join(", ")))
                })
        };
        Ok(BenchmarkConfig {
            seed: self.seed,
            sources: self.sources.iter().map(|n| lookup(n)).collect::<Result<_>>()?,
            target: lookup(&self.target)?,
            tasks: self.tasks,
            shapes: self.shapes,
            train_per_task: self.train_per_task,
            test_per_task: self.test_per_task,
            n_points: self.n_points,
            task_params: self.task_params,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunSection {
    seeds: Vec<u64>,
    out_dir: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seeds: vec![1, 2, 3], out_dir: PathBuf::from("runs/default") }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    benchmark: BenchmarkSection,
    model: ModelConfig,
    engine: EngineConfig,
    run: RunSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            benchmark: BenchmarkConfig::default(),
            model: ModelConfig::default(),
            engine: EngineConfig::default(),
            seeds: RunSection::default().seeds,
            out_dir: RunSection::default().out_dir,
        }
    }
}

impl ExperimentConfig {
    /// Parses TOML text. Relative `out_dir` values are kept as written.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| DgpicError::Usage(format!("config: {e}")))?;
        let cfg = ExperimentConfig {
            benchmark: file.benchmark.resolve()?,
            model: file.model,
            engine: file.engine,
            seeds: file.run.seeds,
            out_dir: file.run.out_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative `out_dir` is taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => DgpicError::Usage(format!("config file {} not found", path.display())),
            _ => DgpicError::io(path, e),
        })?;
        let mut cfg = Self::from_toml(&text)?;
        if cfg.out_dir.is_relative() {
            let base = path.parent().unwrap_or(Path::new("."));
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        let file = ConfigFile {
            benchmark: BenchmarkSection::from_config(&self.benchmark),
            model: self.model.clone(),
            engine: self.engine.clone(),
            run: RunSection { seeds: self.seeds.clone(), out_dir: self.out_dir.clone() },
        };
        toml::to_string(&file).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.benchmark.validate()?;
        self.model.validate()?;
        if self.seeds.is_empty() {
            return Err(DgpicError::Usage("run.seeds must list at least one seed".into()));
        }
        if self.engine.modes.is_empty() {
            return Err(DgpicError::Usage("engine.modes must list at least one mode".into()));
        }
        if !(0.0..=1.0).contains(&self.engine.lambda) {
            return Err(DgpicError::Usage("engine.lambda must lie in [0, 1]".into()));
        }
        for s in self.benchmark.sources.iter().chain([&self.benchmark.target]) {
            let custom = DomainStyle::presets().into_iter().find(|p| p.name == s.name);
            if custom.as_ref().is_some_and(|p| p != s) {
                return Err(DgpicError::Usage(format!("style {:?} shadows a built-in style", s.name)));
            }
        }
        if self.model.n_blocks == 0 {
            log::warn!("model.n_blocks = 0: the transformer is the identity");
        }
        Ok(())
    }
}

/// Parses a comma-separated mode list such as `none,full`.
pub fn parse_modes(list: &str) -> Result<Vec<ShiftMode>> {
    let modes = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<ShiftMode>().map_err(|e| DgpicError::Usage(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    if modes.is_empty() {
        return Err(DgpicError::Usage(format!("empty mode list; valid modes: {}", ShiftMode::valid_names())));
    }
    Ok(modes)
}
