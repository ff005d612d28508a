//! The experiment commands: corpus generation, training, prototype
//! estimation, evaluation and ablation.
//!
//! Artifacts live under `out_dir`:
//!
//! ```text
//! data/corpus.json                      benchmark settings the corpus was built from
//! data/<domain>/<split>/manifest.jsonl  one manifest per dataset
//! seed-<n>/model.dgpm                   checkpoint
//! seed-<n>/loss.csv                     per-epoch training loss
//! seed-<n>/prototypes.dgpc              prototype store
//! results.csv, ablation.csv             evaluation tables
//! ```

use std::fs;
use std::path::PathBuf;

use dgpic_core::data::{generate_sample, Benchmark, BenchmarkConfig, DomainDataset, Split, TaskKind};
use dgpic_core::engine::{
    infer, prototypes_from_features, sample_features, FrozenModel, InferenceContext, PromptBank, PrototypeSet,
    ShiftMode,
};
use dgpic_core::geometry::chamfer_distance;
use dgpic_core::model::{train_with_progress, ModelParams, TrainOutcome};
use dgpic_core::rng::derive_seed;

use crate::binio::{read_file, write_file};
use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::ExperimentConfig;
use crate::dataset::{dataset_dir, load_dataset, save_dataset};
use crate::error::{DgpicError, Result};
use crate::parallel::Workers;
use crate::protostore::{load_prototypes, load_prototypes_for, save_prototypes};
use crate::results::{loss_csv, ResultRow, ResultTable};

/// Paths of every artifact under one output directory.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunLayout { root: root.into() }
    }

    pub fn data(&self) -> PathBuf {
        self.root.join("data")
    }

    pub fn corpus_settings(&self) -> PathBuf {
        self.data().join("corpus.json")
    }

    pub fn dataset(&self, domain: &str, split: Split) -> PathBuf {
        dataset_dir(&self.data(), domain, split)
    }

    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.root.join(format!("seed-{seed}"))
    }

    pub fn checkpoint(&self, seed: u64) -> PathBuf {
        self.seed_dir(seed).join("model.dgpm")
    }

    pub fn loss_history(&self, seed: u64) -> PathBuf {
        self.seed_dir(seed).join("loss.csv")
    }

    pub fn prototypes(&self, seed: u64) -> PathBuf {
        self.seed_dir(seed).join("prototypes.dgpc")
    }

    pub fn results(&self) -> PathBuf {
        self.root.join("results.csv")
    }

    pub fn ablation(&self) -> PathBuf {
        self.root.join("ablation.csv")
    }
}

/// Generates the corpus and writes it to disk. Refuses to touch an existing
/// corpus unless `force` is set.
pub fn gen_data(cfg: &ExperimentConfig, force: bool, workers: &Workers) -> Result<Benchmark> {
    let layout = RunLayout::new(&cfg.out_dir);
    let data = layout.data();
    if data.exists() {
        if !force {
            return Err(DgpicError::Refused(format!(
                "{} already exists; pass --force to regenerate it",
                data.display()
            )));
        }
        fs::remove_dir_all(&data).map_err(|e| DgpicError::io(&data, e))?;
    }
    let b = &cfg.benchmark;
    b.validate()?;
    let plan = b.plan();
    log::info!("generating {} pairs", plan.len());
    let pairs = workers.map(&plan, |spec| generate_sample(b, spec)).into_iter().collect::<Result<Vec<_>, _>>()?;
    let bench = Benchmark::assemble(b, &plan, pairs)?;
    for ds in bench.all_datasets() {
        save_dataset(ds, &layout.dataset(&ds.domain.name, ds.split))?;
    }
    let settings = serde_json::to_string_pretty(b).expect("benchmark config serializes");
    write_file(&layout.corpus_settings(), settings.as_bytes())?;
    Ok(bench)
}

/// Loads the corpus written by [`gen_data`], checking it was generated from
/// the same benchmark settings.
pub fn load_corpus(cfg: &ExperimentConfig) -> Result<Benchmark> {
    let layout = RunLayout::new(&cfg.out_dir);
    let path = layout.corpus_settings();
    let raw = read_file(&path, "corpus (run gen-data first)")?;
    let stored: BenchmarkConfig =
        serde_json::from_slice(&raw).map_err(|e| DgpicError::format(&path, e.to_string()))?;
    if stored != cfg.benchmark {
        return Err(dgpic_core::Error::Stale(format!(
            "corpus in {} was generated from different benchmark settings; rerun gen-data --force",
            layout.data().display()
        ))
        .into());
    }
    let b = &cfg.benchmark;
    let load = |name: &str, split| load_dataset(&layout.dataset(name, split));
    let sources = b.sources.iter().map(|s| load(&s.name, Split::Train)).collect::<Result<Vec<_>>>()?;
    let source_tests = b.sources.iter().map(|s| load(&s.name, Split::Test)).collect::<Result<Vec<_>>>()?;
    let target = load(&b.target.name, Split::Test)?;
    Ok(Benchmark { sources, source_tests, target })
}

/// Trains one seed and writes its checkpoint and loss history.
pub fn train_seed(cfg: &ExperimentConfig, corpus: &Benchmark, seed: u64, workers: &Workers) -> Result<TrainOutcome> {
    let layout = RunLayout::new(&cfg.out_dir);
    let model_cfg = dgpic_core::model::ModelConfig { seed, ..cfg.model.clone() };
    let init = ModelParams::init(&model_cfg)?;
    log::info!("seed {seed}: training {} parameters for {} epochs", init.len(), model_cfg.epochs);
    let mut outcome = train_with_progress(init, &corpus.sources, &model_cfg, workers, &mut |epoch, loss| {
        log::info!("seed {seed}: epoch {}/{} loss {loss:.6}", epoch + 1, model_cfg.epochs);
    })?;
    outcome.params.round_to_f32();
    save_checkpoint(&outcome.params, &layout.checkpoint(seed))?;
    write_file(&layout.loss_history(seed), loss_csv(&outcome.loss_history).as_bytes())?;
    Ok(outcome)
}

/// Computes prototypes and the prompt bank for one trained seed.
///
/// An existing store is reused when its checkpoint fingerprint matches;
/// a mismatch is a staleness error unless `force` rebuilds it.
pub fn estimate_seed(
    cfg: &ExperimentConfig,
    corpus: &Benchmark,
    seed: u64,
    force: bool,
    workers: &Workers,
) -> Result<(PrototypeSet, PromptBank)> {
    let layout = RunLayout::new(&cfg.out_dir);
    let params = load_checkpoint(&layout.checkpoint(seed))?;
    let hash = params.fingerprint();
    let store = layout.prototypes(seed);
    if store.exists() && !force {
        let (set, bank) = load_prototypes_for(&store, &hash)?;
        if set.grouping() == cfg.engine.grouping {
            log::info!("seed {seed}: reusing {}", store.display());
            return Ok((set, bank));
        }
        log::info!("seed {seed}: grouping changed, rebuilding {}", store.display());
    }
    let flat: Vec<(usize, usize)> =
        corpus.sources.iter().enumerate().flat_map(|(d, ds)| (0..ds.pairs.len()).map(move |i| (d, i))).collect();
    let feats = workers.map(&flat, |&(d, i)| sample_features(&corpus.sources[d].pairs[i].input, &params).map(|(_, f)| f));
    let mut features: Vec<Vec<_>> = corpus.sources.iter().map(|ds| Vec::with_capacity(ds.pairs.len())).collect();
    for (&(d, _), f) in flat.iter().zip(feats) {
        features[d].push(f?);
    }
    let (set, bank) = prototypes_from_features(&corpus.sources, &features, hash, cfg.engine.grouping)?;
    save_prototypes(&set, &bank, &store)?;
    // the file holds single-precision values; hand back exactly what was stored
    load_prototypes(&store)
}

/// Per-sample evaluation outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleScore {
    pub mode: ShiftMode,
    pub task: TaskKind,
    pub sample_id: u64,
    pub cd: f64,
}

/// Evaluates one seed on the target test split for every mode and task.
pub fn eval_seed(
    cfg: &ExperimentConfig,
    corpus: &Benchmark,
    seed: u64,
    modes: &[ShiftMode],
    workers: &Workers,
) -> Result<Vec<SampleScore>> {
    let layout = RunLayout::new(&cfg.out_dir);
    let model = FrozenModel::new(load_checkpoint(&layout.checkpoint(seed))?);
    let (set, bank) = load_prototypes_for(&layout.prototypes(seed), &model.hash())?;
    let ctx = InferenceContext::new(&model, &set, &bank, corpus.sources.iter().flat_map(|d| &d.pairs), cfg.engine.settings())?;
    let target: &DomainDataset = &corpus.target;
    let jobs: Vec<(ShiftMode, usize)> =
        modes.iter().flat_map(|&m| (0..target.pairs.len()).map(move |i| (m, i))).collect();
    let scores = workers.map(&jobs, |&(mode, i)| -> Result<SampleScore> {
        let pair = &target.pairs[i];
        let s = derive_seed(seed, &[b"eval", mode.as_str().as_bytes(), &pair.sample_id.to_le_bytes()]);
        let out = infer(&pair.input, pair.task, &ctx, mode, s)?;
        let cd = chamfer_distance(&out.prediction, &pair.target)?;
        Ok(SampleScore { mode, task: pair.task, sample_id: pair.sample_id, cd })
    });
    let scores = scores.into_iter().collect::<Result<Vec<_>>>()?;
    if model.current_hash() != model.hash() {
        return Err(dgpic_core::Error::Contract("model parameters changed during evaluation".into()).into());
    }
    Ok(scores)
}

/// Folds per-sample scores into (mode, task, seed) rows.
pub fn summarize(seed: u64, modes: &[ShiftMode], tasks: &[TaskKind], scores: &[SampleScore]) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for &mode in modes {
        for &task in tasks {
            let cds: Vec<f64> = scores.iter().filter(|s| s.mode == mode && s.task == task).map(|s| s.cd).collect();
            if cds.is_empty() {
                continue;
            }
            let mean_cd = cds.iter().sum::<f64>() / cds.len() as f64;
            rows.push(ResultRow { mode, task, seed, mean_cd, n_samples: cds.len() });
        }
    }
    rows
}

/// Checks the metric on the target split: CD(target, target) must be zero.
pub fn self_check(corpus: &Benchmark) -> Result<usize> {
    for p in &corpus.target.pairs {
        let cd = chamfer_distance(&p.target, &p.target)?;
        if cd != 0.0 {
            return Err(DgpicError::SelfCheck(format!("CD(target, target) = {cd} for sample {}", p.sample_id)));
        }
    }
    Ok(corpus.target.pairs.len())
}

/// Evaluates every seed and returns the sorted table.
pub fn evaluate(cfg: &ExperimentConfig, corpus: &Benchmark, modes: &[ShiftMode], workers: &Workers) -> Result<ResultTable> {
    let mut table = ResultTable::default();
    for &seed in &cfg.seeds {
        let scores = eval_seed(cfg, corpus, seed, modes, workers)?;
        table.rows.extend(summarize(seed, modes, &cfg.benchmark.tasks, &scores));
    }
    table.sort();
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_paths() {
        let l = RunLayout::new("/tmp/x");
        assert_eq!(l.checkpoint(2), PathBuf::from("/tmp/x/seed-2/model.dgpm"));
        assert_eq!(l.dataset("clean-dense", Split::Train), PathBuf::from("/tmp/x/data/clean-dense/train"));
    }

    #[test]
    fn summarize_groups_in_order() {
        let s = |mode, task, cd| SampleScore { mode, task, sample_id: 0, cd };
        let scores = vec![
            s(ShiftMode::Full, TaskKind::Denoising, 1.0),
            s(ShiftMode::Full, TaskKind::Denoising, 3.0),
            s(ShiftMode::None, TaskKind::Denoising, 5.0),
        ];
        let rows = summarize(7, &[ShiftMode::None, ShiftMode::Full], &TaskKind::ALL, &scores);
        assert_eq!(rows.len(), 2);
        assert_eq!((rows[0].mode, rows[0].mean_cd, rows[0].n_samples), (ShiftMode::None, 5.0, 1));
        assert_eq!((rows[1].mean_cd, rows[1].n_samples, rows[1].seed), (2.0, 2, 7));
    }
}
