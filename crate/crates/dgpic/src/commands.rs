//! Command entry points shared by the binary and the tests.

use std::path::PathBuf;

use dgpic_core::engine::ShiftMode;

use crate::config::{parse_modes, ExperimentConfig};
use crate::error::Result;
use crate::parallel::Workers;
use crate::pipeline::{estimate_seed, evaluate, gen_data, load_corpus, self_check, train_seed, RunLayout};
use crate::results::ResultTable;

/// Flags accepted by every command.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: PathBuf,
    pub force: bool,
    /// Restrict the run to this seed.
    pub seed: Option<u64>,
    /// Comma-separated mode list overriding `engine.modes`.
    pub modes: Option<String>,
    pub out: Option<PathBuf>,
    pub self_check: bool,
}

impl RunOptions {
    /// Loads the config file and applies the command-line overrides.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(out) = &self.out {
            cfg.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seeds = vec![seed];
        }
        if let Some(list) = &self.modes {
            cfg.engine.modes = parse_modes(list)?;
        }
        Ok(cfg)
    }
}

pub fn cmd_gen_data(opts: &RunOptions, workers: &Workers) -> Result<String> {
    let cfg = opts.resolve()?;
    if opts.seed.is_some() {
        log::warn!("--seed selects run seeds; the corpus uses benchmark.seed");
    }
    let bench = gen_data(&cfg, opts.force, workers)?;
    let mut out = String::new();
    for ds in bench.all_datasets() {
        out.push_str(&format!("{:<24}{:<6}{:>6} pairs\n", ds.domain.name, ds.split.as_str(), ds.len()));
    }
    out.push_str(&format!("corpus written to {}\n", RunLayout::new(&cfg.out_dir).data().display()));
    Ok(out)
}

pub fn cmd_train(opts: &RunOptions, workers: &Workers) -> Result<String> {
    let cfg = opts.resolve()?;
    let corpus = load_corpus(&cfg)?;
    let layout = RunLayout::new(&cfg.out_dir);
    let mut out = String::new();
    for &seed in &cfg.seeds {
        let outcome = train_seed(&cfg, &corpus, seed, workers)?;
        for w in &outcome.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        let last = outcome.loss_history.last().copied().unwrap_or(f64::NAN);
        out.push_str(&format!("seed {seed}: final loss {last:.6}, checkpoint {}\n", layout.checkpoint(seed).display()));
    }
    Ok(out)
}

pub fn cmd_estimate_prototypes(opts: &RunOptions, workers: &Workers) -> Result<String> {
    let cfg = opts.resolve()?;
    let corpus = load_corpus(&cfg)?;
    let layout = RunLayout::new(&cfg.out_dir);
    let mut out = String::new();
    for &seed in &cfg.seeds {
        let (set, bank) = estimate_seed(&cfg, &corpus, seed, opts.force, workers)?;
        out.push_str(&format!(
            "seed {seed}: {} source domains, {} prototypes, {} prompts, {}\n",
            set.domains.len(),
            set.prototypes.len(),
            bank.entries.len(),
            layout.prototypes(seed).display()
        ));
    }
    Ok(out)
}

fn run_eval(cfg: &ExperimentConfig, modes: &[ShiftMode], check: bool, workers: &Workers) -> Result<(ResultTable, String)> {
    let corpus = load_corpus(cfg)?;
    let mut out = String::new();
    if check {
        let n = self_check(&corpus)?;
        out.push_str(&format!("self-check: CD(target, target) = 0 on {n} samples\n"));
    }
    let table = evaluate(cfg, &corpus, modes, workers)?;
    out.push_str(&table.render());
    Ok((table, out))
}

pub fn cmd_eval(opts: &RunOptions, workers: &Workers) -> Result<String> {
    let cfg = opts.resolve()?;
    let (table, mut out) = run_eval(&cfg, &cfg.engine.modes, opts.self_check, workers)?;
    let path = RunLayout::new(&cfg.out_dir).results();
    table.save(&path)?;
    out.push_str(&format!("results written to {}\n", path.display()));
    Ok(out)
}

pub fn cmd_ablate(opts: &RunOptions, workers: &Workers) -> Result<String> {
    let cfg = opts.resolve()?;
    if opts.modes.is_some() {
        log::warn!("ablate always runs every mode; --modes is ignored");
    }
    let (table, mut out) = run_eval(&cfg, &ShiftMode::ALL, opts.self_check, workers)?;
    let path = RunLayout::new(&cfg.out_dir).ablation();
    table.save(&path)?;
    out.push_str(&table.render_ranking());
    out.push_str(&format!("results written to {}\n", path.display()));
    Ok(out)
}
