//! Skip-gram with negative sampling over the walk corpus.
//!
//! Positives are (center, context) pairs within a fixed window; negatives
//! come from the unigram^0.75 noise distribution. SGD with linear learning
//! rate decay. Single-worker mode is bit-reproducible for a given seed;
//! parallel mode shards walks across lock-free workers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embedding::{EmbeddingKind, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::exec::{ExecPolicy, SharedParams};
use crate::walks::WalkCorpus;

const LR_FLOOR_FRACTION: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives_per_positive: usize,
    pub min_count: u32,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Walk-shard granularity for parallel mode; no effect when deterministic.
    pub batch_size: usize,
    pub rng_seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 100,
            window: 10,
            negatives_per_positive: 5,
            min_count: 1,
            epochs: 1,
            learning_rate: 0.025,
            batch_size: 4096,
            rng_seed: 42,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::config("dim", "must be >= 1"));
        }
        if self.window < 1 {
            return Err(Error::config("window", "must be >= 1"));
        }
        if self.negatives_per_positive < 1 {
            return Err(Error::config("negatives_per_positive", "must be >= 1"));
        }
        if self.epochs < 1 {
            return Err(Error::config("epochs", "must be >= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be > 0"));
        }
        Ok(())
    }
}

pub struct SgnsOutcome {
    /// Target vectors; the anchor matrix for the second stage.
    pub embedding: EmbeddingMatrix,
    pub context: EmbeddingMatrix,
    /// Streamed training loss per epoch (exact in deterministic mode).
    pub loss_trace: Vec<f64>,
}

/// Cumulative unigram^0.75 noise distribution with exact inverse-CDF draws.
struct NoiseTable {
    tokens: Vec<u32>,
    cumulative: Vec<f64>,
    total: f64,
}

impl NoiseTable {
    fn build(counts: &[u64], min_count: u32) -> Self {
        let mut tokens = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        for (tok, &c) in counts.iter().enumerate() {
            if c >= min_count as u64 {
                total += (c as f64).powf(0.75);
                tokens.push(tok as u32);
                cumulative.push(total);
            }
        }
        NoiseTable {
            tokens,
            cumulative,
            total,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        let u = rng.gen::<f64>() * self.total;
        let idx = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.tokens.len() - 1);
        self.tokens[idx]
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// -ln(sigmoid(x)), evaluated stably.
fn log_sigmoid_loss(x: f64) -> f64 {
    // softplus(-x) = max(-x, 0) + ln(1 + exp(-| -x |))
    (-x).max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Loss and analytic gradients of one (center, positive context, negatives)
/// logistic-loss tuple. This is the same rule the training loop applies; the
/// finite-difference checks run against this entry point.
pub fn sgns_tuple_loss_grad(
    target: &[f64],
    positive: &[f64],
    negatives: &[&[f64]],
) -> (f64, Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let d = target.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();

    let pos_dot = dot(target, positive);
    let mut loss = log_sigmoid_loss(pos_dot);
    let mut grad_target = vec![0.0; d];
    // d/d(dot) of -ln(sigma(dot)) = sigma(dot) - 1.
    let gp = sigmoid(pos_dot) - 1.0;
    let grad_positive: Vec<f64> = target.iter().map(|&t| gp * t).collect();
    for (gt, &p) in grad_target.iter_mut().zip(positive) {
        *gt += gp * p;
    }

    let mut grad_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let nd = dot(target, neg);
        loss += log_sigmoid_loss(-nd);
        // d/d(dot) of -ln(sigma(-dot)) = sigma(dot).
        let gn = sigmoid(nd);
        grad_negatives.push(target.iter().map(|&t| gn * t).collect());
        for (gt, &nv) in grad_target.iter_mut().zip(neg.iter()) {
            *gt += gn * nv;
        }
    }
    (loss, grad_target, grad_positive, grad_negatives)
}

pub fn train_sgns(corpus: &WalkCorpus, cfg: &SgnsConfig, exec: &ExecPolicy) -> Result<SgnsOutcome> {
    cfg.validate()?;
    let v = corpus.vocab_size;
    if v == 0 || corpus.walks.is_empty() {
        return Err(Error::EmptyGraph);
    }
    for walk in &corpus.walks {
        if let Some(&t) = walk.iter().find(|&&t| t as usize >= v) {
            return Err(Error::ShapeMismatch(format!(
                "token {t} out of range for vocab size {v}"
            )));
        }
    }

    let mut counts = vec![0u64; v];
    for walk in &corpus.walks {
        for &t in walk {
            counts[t as usize] += 1;
        }
    }
    let eligible: Vec<bool> = counts.iter().map(|&c| c >= cfg.min_count as u64).collect();
    let noise = NoiseTable::build(&counts, cfg.min_count);
    if noise.tokens.len() < 2 {
        return Err(Error::NoTrainingPairs);
    }

    let pairs_per_walk: Vec<u64> = corpus
        .walks
        .iter()
        .map(|w| count_pairs(w, cfg.window, &eligible))
        .collect();
    let total_pairs: u64 = pairs_per_walk.iter().sum();
    if total_pairs == 0 {
        return Err(Error::NoTrainingPairs);
    }

    let d = cfg.dim;
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    init_rng.set_stream(0);
    let mut target: Vec<f64> = (0..v * d)
        .map(|_| (init_rng.gen::<f64>() - 0.5) / d as f64)
        .collect();
    let mut context: Vec<f64> = vec![0.0; v * d];

    let total_steps = cfg.epochs as u64 * total_pairs;
    let threads = exec.effective_threads();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    if threads <= 1 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(1);
        let mut worker = Worker::new(cfg, &noise, &eligible);
        let mut step = 0u64;
        for epoch in 0..cfg.epochs {
            let mut epoch_loss = 0.0;
            for walk in &corpus.walks {
                epoch_loss +=
                    worker.train_walk(walk, &mut target, &mut context, &mut rng, &mut step, total_steps);
            }
            if !epoch_loss.is_finite() {
                return Err(Error::NonFinite {
                    what: "sgns loss",
                    epoch: epoch + 1,
                });
            }
            loss_trace.push(epoch_loss);
        }
    } else {
        // Lock-free parallel mode: contiguous walk shards per worker.
        let shards = shard_ranges(corpus.walks.len(), threads);
        let shard_offsets: Vec<u64> = {
            let mut acc = 0u64;
            let mut out = Vec::with_capacity(shards.len());
            for r in &shards {
                out.push(acc);
                acc += pairs_per_walk[r.clone()].iter().sum::<u64>();
            }
            out
        };
        let shared_target = SharedParams::new(&mut target);
        let shared_context = SharedParams::new(&mut context);
        for epoch in 0..cfg.epochs {
            let epoch_base = epoch as u64 * total_pairs;
            let losses: Vec<f64> = std::thread::scope(|scope| {
                let handles: Vec<_> = shards
                    .iter()
                    .enumerate()
                    .map(|(k, range)| {
                        let range = range.clone();
                        let walks = &corpus.walks;
                        let noise = &noise;
                        let eligible = &eligible;
                        let shared_target = &shared_target;
                        let shared_context = &shared_context;
                        let base_step = epoch_base + shard_offsets[k];
                        scope.spawn(move || {
                            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
                            rng.set_stream(1 + k as u64);
                            let mut worker = Worker::new(cfg, noise, eligible);
                            let target =
                                unsafe { shared_target.slice_mut(0, v * d) };
                            let context =
                                unsafe { shared_context.slice_mut(0, v * d) };
                            let mut step = base_step;
                            let mut loss = 0.0;
                            for walk in &walks[range] {
                                loss += worker.train_walk(
                                    walk, target, context, &mut rng, &mut step, total_steps,
                                );
                            }
                            loss
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
            let epoch_loss: f64 = losses.iter().sum();
            if !epoch_loss.is_finite() {
                return Err(Error::NonFinite {
                    what: "sgns loss",
                    epoch: epoch + 1,
                });
            }
            loss_trace.push(epoch_loss);
        }
    }

    Ok(SgnsOutcome {
        embedding: EmbeddingMatrix::from_f64(&target, v, d, EmbeddingKind::Anchor)?,
        context: EmbeddingMatrix::from_f64(&context, v, d, EmbeddingKind::Context)?,
        loss_trace,
    })
}

fn count_pairs(walk: &[u32], window: usize, eligible: &[bool]) -> u64 {
    let mut n = 0u64;
    for (i, &center) in walk.iter().enumerate() {
        if !eligible[center as usize] {
            continue;
        }
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(walk.len() - 1);
        for j in lo..=hi {
            if j != i && eligible[walk[j] as usize] {
                n += 1;
            }
        }
    }
    n
}

fn shard_ranges(n: usize, parts: usize) -> Vec<std::ops::Range<usize>> {
    let chunk = n.div_ceil(parts);
    (0..parts)
        .map(|k| (k * chunk).min(n)..((k + 1) * chunk).min(n))
        .filter(|r| !r.is_empty())
        .collect()
}

/// Reusable per-worker scratch for the inner SGD loop.
struct Worker<'a> {
    cfg: &'a SgnsConfig,
    noise: &'a NoiseTable,
    eligible: &'a [bool],
    accum: Vec<f64>,
}

impl<'a> Worker<'a> {
    fn new(cfg: &'a SgnsConfig, noise: &'a NoiseTable, eligible: &'a [bool]) -> Self {
        Worker {
            cfg,
            noise,
            eligible,
            accum: vec![0.0; cfg.dim],
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn train_walk(
        &mut self,
        walk: &[u32],
        target: &mut [f64],
        context: &mut [f64],
        rng: &mut ChaCha8Rng,
        step: &mut u64,
        total_steps: u64,
    ) -> f64 {
        let lr0 = self.cfg.learning_rate;
        let mut loss = 0.0;
        for (i, &center) in walk.iter().enumerate() {
            if !self.eligible[center as usize] {
                continue;
            }
            let lo = i.saturating_sub(self.cfg.window);
            let hi = (i + self.cfg.window).min(walk.len() - 1);
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                let out = walk[j];
                if !self.eligible[out as usize] {
                    continue;
                }
                let progress = *step as f64 / total_steps as f64;
                let lr = lr0 * (1.0 - progress).max(LR_FLOOR_FRACTION);
                *step += 1;
                loss += self.train_pair(center, out, lr, target, context, rng);
            }
        }
        loss
    }

    fn train_pair(
        &mut self,
        center: u32,
        positive: u32,
        lr: f64,
        target: &mut [f64],
        context: &mut [f64],
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let d = self.cfg.dim;
        let t_off = center as usize * d;
        self.accum.iter_mut().for_each(|x| *x = 0.0);
        let mut loss = 0.0;
        for s in 0..=self.cfg.negatives_per_positive {
            let (out, label) = if s == 0 {
                (positive, 1.0)
            } else {
                let neg = loop {
                    let n = self.noise.sample(rng);
                    if n != positive {
                        break n;
                    }
                };
                (neg, 0.0)
            };
            let c_off = out as usize * d;
            let mut dot = 0.0;
            for k in 0..d {
                dot += target[t_off + k] * context[c_off + k];
            }
            loss += if label == 1.0 {
                log_sigmoid_loss(dot)
            } else {
                log_sigmoid_loss(-dot)
            };
            // SGD step with gradient (sigma(dot) - label) on both sides.
            let g = (label - sigmoid(dot)) * lr;
            for k in 0..d {
                self.accum[k] += g * context[c_off + k];
                context[c_off + k] += g * target[t_off + k];
            }
        }
        for k in 0..d {
            target[t_off + k] += self.accum[k];
        }
        loss
    }
}
