//! Multi-domain in-context training loop.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::optim::{cosine_lr, AdamW};
use super::pass::{patchify_pair, Example, PatchedPair};
use super::tokens::draw_mask;
use super::{ModelConfig, ModelParams};
use crate::data::{augment, DomainDataset, SamplePair, TaskPair};
use crate::rng::{derive_seed, rng};
use crate::{Error, Result};

/// Job callback: fills a zeroed gradient buffer for job `i` and returns its loss.
pub type GradientJob<'a> = dyn Fn(usize, &mut [f64]) -> Result<f64> + Sync + 'a;

/// Runs gradient jobs and reduces them. Implementations must add the per-job
/// buffers in job order so the sum does not depend on scheduling.
pub trait Executor: Sync {
    /// Returns per-job losses and the summed gradient of length `len`.
    fn run(&self, jobs: usize, len: usize, job: &GradientJob<'_>) -> Result<(Vec<f64>, Vec<f64>)>;
}

/// Single-threaded executor.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn run(&self, jobs: usize, len: usize, job: &GradientJob<'_>) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut total = vec![0.0; len];
        let mut scratch = vec![0.0; len];
        let mut losses = Vec::with_capacity(jobs);
        for i in 0..jobs {
            scratch.fill(0.0);
            losses.push(job(i, &mut scratch)?);
            for (t, s) in total.iter_mut().zip(&scratch) {
                *t += s;
            }
        }
        Ok((losses, total))
    }
}

/// One training query: where it comes from and which prompt it is paired with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Draw {
    domain: usize,
    pair: usize,
    prompt_domain: usize,
    prompt_pair: usize,
}

struct Pool<'a> {
    pairs: Vec<Vec<&'a SamplePair>>,
    /// Index of each domain's pairs by task.
    by_task: Vec<[Vec<usize>; 3]>,
}

impl<'a> Pool<'a> {
    fn new(sources: &'a [DomainDataset]) -> Self {
        let pairs: Vec<Vec<&SamplePair>> = sources.iter().map(|d| d.pairs.iter().collect()).collect();
        let by_task = pairs
            .iter()
            .map(|ps| {
                let mut idx: [Vec<usize>; 3] = Default::default();
                for (i, p) in ps.iter().enumerate() {
                    idx[p.task.index() as usize].push(i);
                }
                idx
            })
            .collect();
        Pool { pairs, by_task }
    }

    /// Pairs each query with a prompt of the same task from another domain,
    /// falling back to the same domain when no other domain has the task.
    fn epoch_draws(&self, seed: u64) -> Result<Vec<Draw>> {
        let mut r = rng(seed);
        let mut draws = Vec::new();
        for (d, ps) in self.pairs.iter().enumerate() {
            draws.extend((0..ps.len()).map(|i| Draw { domain: d, pair: i, prompt_domain: d, prompt_pair: i }));
        }
        draws.shuffle(&mut r);
        for draw in &mut draws {
            let task = self.pairs[draw.domain][draw.pair].task.index() as usize;
            let others: Vec<usize> =
                (0..self.pairs.len()).filter(|&j| j != draw.domain && !self.by_task[j][task].is_empty()).collect();
            let (pd, candidates) = if others.is_empty() {
                (draw.domain, &self.by_task[draw.domain][task])
            } else {
                let j = others[r.random_range(0..others.len())];
                (j, &self.by_task[j][task])
            };
            if candidates.is_empty() {
                return Err(Error::contract("no prompt candidates for a task"));
            }
            draw.prompt_domain = pd;
            draw.prompt_pair = candidates[r.random_range(0..candidates.len())];
        }
        Ok(draws)
    }
}

fn prepare(pair: &SamplePair, cfg: &ModelConfig, aug_seed: Option<u64>) -> Result<PatchedPair> {
    let (m, k) = (cfg.patch_count, cfg.patch_size);
    match aug_seed {
        None => patchify_pair(&pair.input, &pair.target, m, k),
        Some(seed) => {
            let tp = augment(&TaskPair { input: pair.input.clone(), target: pair.target.clone() }, seed)?;
            patchify_pair(&tp.input, &tp.target, m, k)
        }
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ModelParams,
    /// Mean masked-patch loss of every epoch.
    pub loss_history: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Trains `model` on the source domains with `config`'s optimisation settings.
pub fn train(model: ModelParams, sources: &[DomainDataset], config: &ModelConfig, exec: &dyn Executor) -> Result<TrainOutcome> {
    train_with_progress(model, sources, config, exec, &mut |_, _| {})
}

/// [`train`] with a callback receiving `(epoch, mean loss)` after each epoch.
pub fn train_with_progress(
    model: ModelParams,
    sources: &[DomainDataset],
    config: &ModelConfig,
    exec: &dyn Executor,
    progress: &mut dyn FnMut(usize, f64),
) -> Result<TrainOutcome> {
    let mut params = model.with_training_config(config)?;
    if sources.is_empty() {
        return Err(Error::contract("training needs at least one source domain"));
    }
    for s in sources {
        s.validate()?;
    }
    let mut warnings = Vec::new();
    if sources.len() < 2 {
        let msg = format!("only one source domain ({}); prompts are paired within it", sources[0].domain.name);
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let pool = Pool::new(sources);
    let plain: Option<Vec<Vec<PatchedPair>>> = if config.augment {
        None
    } else {
        Some(pool.pairs.iter().map(|ps| ps.iter().map(|p| prepare(p, config, None)).collect()).collect::<Result<_>>()?)
    };

    let n_queries: usize = pool.pairs.iter().map(Vec::len).sum();
    let batches = n_queries.div_ceil(config.batch_size);
    let total_steps = batches * config.epochs;
    let mut opt = AdamW::new(&params, config);
    let mut history = Vec::with_capacity(config.epochs);
    let fetch = |d: usize, i: usize, seed: u64| -> Result<PatchedPair> {
        match &plain {
            Some(pp) => Ok(pp[d][i].clone()),
            None => prepare(pool.pairs[d][i], config, Some(seed)),
        }
    };

    for epoch in 0..config.epochs {
        let epoch_tag = (epoch as u64).to_le_bytes();
        let draws = pool.epoch_draws(derive_seed(config.seed, &[b"epoch", &epoch_tag]))?;
        let mut epoch_loss = 0.0;
        for (b, chunk) in draws.chunks(config.batch_size).enumerate() {
            let mut examples = Vec::with_capacity(chunk.len());
            for (j, draw) in chunk.iter().enumerate() {
                let pos = ((b * config.batch_size + j) as u64).to_le_bytes();
                let s = |tag: &[u8]| derive_seed(config.seed, &[tag, &epoch_tag, &pos]);
                examples.push(Example {
                    query: fetch(draw.domain, draw.pair, s(b"query"))?,
                    prompt: fetch(draw.prompt_domain, draw.prompt_pair, s(b"prompt"))?,
                    masked: draw_mask(config.patch_count, config.mask_ratio, s(b"mask")),
                });
            }
            let scale = 1.0 / examples.len() as f64;
            let p = &params;
            let (losses, grads) =
                exec.run(examples.len(), p.len(), &|i, g: &mut [f64]| examples[i].accumulate_gradient(p, g, scale))?;
            epoch_loss += losses.iter().sum::<f64>();
            let lr = cosine_lr(config.learning_rate, epoch * batches + b, total_steps);
            opt.update(&mut params, &grads, lr)?;
        }
        let mean = epoch_loss / n_queries as f64;
        if !mean.is_finite() {
            return Err(Error::Numeric { block: usize::MAX, detail: format!("epoch {epoch} loss is {mean}") });
        }
        log::debug!("epoch {} mean loss {:.6}", epoch + 1, mean);
        progress(epoch, mean);
        history.push(mean);
    }
    Ok(TrainOutcome { params, loss_history: history, warnings })
}

