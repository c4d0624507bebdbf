//! Weighted co-occurrence factorization with anchor regularization.
//!
//! The objective is the bias-augmented weighted least-squares loss
//!
//! ```text
//!   sum_{X_ij > 0} f(X_ij) (w_i . wc_j + b_i + bc_j - ln X_ij)^2
//!     + lambda * sum_i ||w_i - a_i||^2
//! ```
//!
//! where `a` is the walk-derived anchor matrix. With `lambda = 0` and no
//! anchor this is plain GloVe with a random init. The symmetric matrix is
//! iterated in both (i, j) and (j, i) directions, matching the ordered-pair
//! sum. Optimized with AdamW over shuffled mini-batches.
//!
//! Deterministic-mode conventions (bit-reproducible for a given seed):
//! stream 0 of the seeded generator draws `w` (only when no anchor is given)
//! then `w_ctx`, row-major, uniform in [-0.5/d, 0.5/d); stream 1 shuffles the
//! ordered-pair list each epoch, carrying generator state across epochs;
//! batches are consecutive chunks of the shuffle; rows are updated in
//! first-touch order, targets before contexts before biases; all four
//! parameter groups share one step count per batch. The per-row anchor pull
//! is split across a row's ordered-pair occurrences (scaled k/n per batch),
//! so one epoch applies exactly one full-strength regularization gradient.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adamw::{adamw_apply, AdamW, AdamWParams};
use crate::cooc::CooccurrenceMatrix;
use crate::embedding::{EmbeddingKind, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::exec::{ExecPolicy, SharedParams};
use crate::stats::percentile_nearest_rank;

#[derive(Debug, Clone)]
pub struct KeepConfig {
    pub dim: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Percentile of the nonzero counts that becomes the weighting cutoff.
    pub x_max_percentile: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub weight_decay: f64,
    pub rng_seed: u64,
    /// Algorithm keeps the b_i + bc_j terms; clearing this freezes them at 0.
    pub use_biases: bool,
}

impl Default for KeepConfig {
    fn default() -> Self {
        KeepConfig {
            dim: 100,
            learning_rate: 0.05,
            epochs: 300,
            batch_size: 1024,
            x_max_percentile: 75.0,
            alpha: 0.75,
            lambda: 1e-3,
            weight_decay: 0.0,
            rng_seed: 42,
            use_biases: true,
        }
    }
}

impl KeepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::config("dim", "must be >= 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be > 0"));
        }
        if self.epochs < 1 {
            return Err(Error::config("epochs", "must be >= 1"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        if !(self.x_max_percentile > 0.0 && self.x_max_percentile <= 100.0) {
            return Err(Error::config("x_max_percentile", "must be in (0, 100]"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("alpha", "must be in (0, 1]"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::config("lambda", "must be >= 0"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::config("weight_decay", "must be >= 0"));
        }
        Ok(())
    }
}

/// f(x) = (x / x_max)^alpha below the cutoff, 1 at or above it.
#[derive(Debug, Clone, Copy)]
pub struct WeightingFunction {
    pub x_max: f64,
    pub alpha: f64,
}

impl WeightingFunction {
    pub fn eval(&self, x: f64) -> f64 {
        if x < self.x_max {
            (x / self.x_max).powf(self.alpha)
        } else {
            1.0
        }
    }
}

/// Nearest-rank percentile of the nonzero counts.
pub fn resolve_x_max(x: &CooccurrenceMatrix, percentile: f64) -> Result<f64> {
    if x.nnz() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let counts: Vec<f64> = x.nonzero_counts().iter().map(|&c| c as f64).collect();
    Ok(percentile_nearest_rank(&counts, percentile))
}

/// Trained parameters; `w` is the exported embedding.
#[derive(Debug, Clone)]
pub struct KeepModel {
    dim: usize,
    vocab_size: usize,
    w: Vec<f64>,
    w_ctx: Vec<f64>,
    b: Vec<f64>,
    b_ctx: Vec<f64>,
    anchor: Option<Vec<f64>>,
}

impl KeepModel {
    pub fn from_parts(
        dim: usize,
        vocab_size: usize,
        w: Vec<f64>,
        w_ctx: Vec<f64>,
        b: Vec<f64>,
        b_ctx: Vec<f64>,
        anchor: Option<Vec<f64>>,
    ) -> Result<Self> {
        let vd = vocab_size * dim;
        if w.len() != vd || w_ctx.len() != vd || b.len() != vocab_size || b_ctx.len() != vocab_size {
            return Err(Error::ShapeMismatch("model parts disagree on V and d".into()));
        }
        if let Some(a) = &anchor {
            if a.len() != vd {
                return Err(Error::ShapeMismatch("anchor shape differs from w".into()));
            }
        }
        Ok(KeepModel {
            dim,
            vocab_size,
            w,
            w_ctx,
            b,
            b_ctx,
            anchor,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn w_ctx(&self) -> &[f64] {
        &self.w_ctx
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn b_ctx(&self) -> &[f64] {
        &self.b_ctx
    }

    pub fn anchor(&self) -> Option<&[f64]> {
        self.anchor.as_deref()
    }

    pub fn w_row(&self, i: usize) -> &[f64] {
        &self.w[i * self.dim..(i + 1) * self.dim]
    }

    fn finite(&self) -> bool {
        self.w.iter().all(|v| v.is_finite())
            && self.w_ctx.iter().all(|v| v.is_finite())
            && self.b.iter().all(|v| v.is_finite())
            && self.b_ctx.iter().all(|v| v.is_finite())
    }

    /// Frobenius distance of `w` from the anchor, relative to the anchor norm.
    pub fn relative_anchor_distance(&self) -> Option<f64> {
        let anchor = self.anchor.as_deref()?;
        let mut num = 0.0;
        let mut den = 0.0;
        for (x, a) in self.w.iter().zip(anchor) {
            num += (x - a) * (x - a);
            den += a * a;
        }
        Some((num / den).sqrt())
    }
}

/// Gradients shaped like the model parameters.
#[derive(Debug, Clone)]
pub struct KeepGradients {
    pub w: Vec<f64>,
    pub w_ctx: Vec<f64>,
    pub b: Vec<f64>,
    pub b_ctx: Vec<f64>,
}

/// Stored entries expanded to ordered pairs with precomputed ln and weight.
fn ordered_pairs(x: &CooccurrenceMatrix, wfn: &WeightingFunction) -> Vec<(u32, u32, f64, f64)> {
    let mut out = Vec::with_capacity(2 * x.nnz());
    for (i, j, c) in x.sorted_entries() {
        let lnx = (c as f64).ln();
        let f = wfn.eval(c as f64);
        out.push((i, j, lnx, f));
        out.push((j, i, lnx, f));
    }
    out
}

fn check_shapes(model: &KeepModel, x: &CooccurrenceMatrix) -> Result<()> {
    if model.vocab_size != x.vocab_size() {
        return Err(Error::ShapeMismatch(format!(
            "model has {} rows, matrix has {}",
            model.vocab_size,
            x.vocab_size()
        )));
    }
    Ok(())
}

/// Full objective value over all ordered nonzero pairs.
pub fn keep_loss(
    model: &KeepModel,
    x: &CooccurrenceMatrix,
    wfn: &WeightingFunction,
    lambda: f64,
) -> Result<f64> {
    check_shapes(model, x)?;
    if !model.finite() {
        return Err(Error::NonFinite {
            what: "model parameter",
            epoch: 0,
        });
    }
    let d = model.dim;
    let mut loss = 0.0;
    for (i, j, lnx, f) in ordered_pairs(x, wfn) {
        let (i, j) = (i as usize, j as usize);
        let mut dot = 0.0;
        for k in 0..d {
            dot += model.w[i * d + k] * model.w_ctx[j * d + k];
        }
        let e = dot + model.b[i] + model.b_ctx[j] - lnx;
        loss += f * e * e;
    }
    if lambda > 0.0 {
        if let Some(anchor) = &model.anchor {
            let mut reg = 0.0;
            for (x, a) in model.w.iter().zip(anchor) {
                reg += (x - a) * (x - a);
            }
            loss += lambda * reg;
        }
    }
    Ok(loss)
}

/// Exact analytic gradients of [`keep_loss`].
pub fn keep_gradients(
    model: &KeepModel,
    x: &CooccurrenceMatrix,
    wfn: &WeightingFunction,
    lambda: f64,
) -> Result<KeepGradients> {
    check_shapes(model, x)?;
    if !model.finite() {
        return Err(Error::NonFinite {
            what: "model parameter",
            epoch: 0,
        });
    }
    let d = model.dim;
    let v = model.vocab_size;
    let mut g = KeepGradients {
        w: vec![0.0; v * d],
        w_ctx: vec![0.0; v * d],
        b: vec![0.0; v],
        b_ctx: vec![0.0; v],
    };
    for (i, j, lnx, f) in ordered_pairs(x, wfn) {
        let (i, j) = (i as usize, j as usize);
        let mut dot = 0.0;
        for k in 0..d {
            dot += model.w[i * d + k] * model.w_ctx[j * d + k];
        }
        let e = dot + model.b[i] + model.b_ctx[j] - lnx;
        let coeff = 2.0 * f * e;
        for k in 0..d {
            g.w[i * d + k] += coeff * model.w_ctx[j * d + k];
            g.w_ctx[j * d + k] += coeff * model.w[i * d + k];
        }
        g.b[i] += coeff;
        g.b_ctx[j] += coeff;
    }
    if lambda > 0.0 {
        if let Some(anchor) = &model.anchor {
            for (gw, (x, a)) in g.w.iter_mut().zip(model.w.iter().zip(anchor)) {
                *gw += 2.0 * lambda * (x - a);
            }
        }
    }
    Ok(g)
}

pub struct KeepTrainOutcome {
    pub model: KeepModel,
    /// Streamed objective per epoch, evaluated at pre-update parameters.
    pub loss_trace: Vec<f64>,
}

/// Trains the model with AdamW; `w` starts from the anchor when one is given.
pub fn train_keep(
    x: &CooccurrenceMatrix,
    anchor: Option<&EmbeddingMatrix>,
    cfg: &KeepConfig,
    exec: &ExecPolicy,
) -> Result<KeepTrainOutcome> {
    cfg.validate()?;
    if x.nnz() == 0 {
        return Err(Error::EmptyMatrix);
    }
    let v = x.vocab_size();
    let d = cfg.dim;
    if let Some(a) = anchor {
        if a.dim() != d || a.vocab_size() != v {
            return Err(Error::ShapeMismatch(format!(
                "anchor is {}x{}, expected {}x{}",
                a.vocab_size(),
                a.dim(),
                v,
                d
            )));
        }
    }
    let wfn = WeightingFunction {
        x_max: resolve_x_max(x, cfg.x_max_percentile)?,
        alpha: cfg.alpha,
    };
    let pairs = ordered_pairs(x, &wfn);

    // Ordered-pair occurrences per target row; splits the anchor pull.
    let mut n_target = vec![0u32; v];
    for &(i, _, _, _) in &pairs {
        n_target[i as usize] += 1;
    }

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    init_rng.set_stream(0);
    let scale = 0.5 / d as f64;
    let anchor_f64 = anchor.map(|a| a.to_f64());
    let w: Vec<f64> = match &anchor_f64 {
        Some(a) => a.clone(),
        None => (0..v * d)
            .map(|_| (init_rng.gen::<f64>() - 0.5) * 2.0 * scale)
            .collect(),
    };
    let w_ctx: Vec<f64> = (0..v * d)
        .map(|_| (init_rng.gen::<f64>() - 0.5) * 2.0 * scale)
        .collect();
    let mut model = KeepModel::from_parts(d, v, w, w_ctx, vec![0.0; v], vec![0.0; v], anchor_f64)?;

    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    shuffle_rng.set_stream(1);
    let mut order: Vec<u32> = (0..pairs.len() as u32).collect();

    let hyper = AdamWParams {
        weight_decay: cfg.weight_decay,
        ..AdamWParams::default()
    };
    let mut opt_w = AdamW::new(v * d, hyper);
    let mut opt_wc = AdamW::new(v * d, hyper);
    let mut opt_b = AdamW::new(v, hyper);
    let mut opt_bc = AdamW::new(v, hyper);

    let threads = exec.effective_threads();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);

    if threads <= 1 {
        let mut scratch = BatchScratch::new(v, d);
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut shuffle_rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(cfg.batch_size) {
                let batch_loss = scratch.accumulate(&model, &pairs, batch, cfg, &n_target);
                if !batch_loss.is_finite() {
                    return Err(Error::NonFinite {
                        what: "training loss",
                        epoch: epoch + 1,
                    });
                }
                epoch_loss += batch_loss;
                let ctx_w = opt_w.begin_step(cfg.learning_rate);
                let ctx_wc = opt_wc.begin_step(cfg.learning_rate);
                let ctx_b = opt_b.begin_step(cfg.learning_rate);
                let ctx_bc = opt_bc.begin_step(cfg.learning_rate);
                for &i in &scratch.touched_w {
                    let off = i as usize * d;
                    opt_w.update_range(&ctx_w, &mut model.w, off, &scratch.gw[off..off + d]);
                }
                for &j in &scratch.touched_wc {
                    let off = j as usize * d;
                    opt_wc.update_range(&ctx_wc, &mut model.w_ctx, off, &scratch.gwc[off..off + d]);
                }
                if cfg.use_biases {
                    for &i in &scratch.touched_w {
                        let off = i as usize;
                        opt_b.update_range(&ctx_b, &mut model.b, off, &scratch.gb[off..off + 1]);
                    }
                    for &j in &scratch.touched_wc {
                        let off = j as usize;
                        opt_bc.update_range(&ctx_bc, &mut model.b_ctx, off, &scratch.gbc[off..off + 1]);
                    }
                }
                scratch.clear(d);
            }
            loss_trace.push(epoch_loss);
        }
    } else {
        // Parallel mode: ordered pairs sharded by target row; the context
        // side may race across workers, so this mode is validated
        // statistically rather than bit-exactly.
        let mut shard_of: Vec<usize> = Vec::with_capacity(pairs.len());
        for &(i, _, _, _) in &pairs {
            shard_of.push(i as usize % threads);
        }
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut shuffle_rng);
            let mut shards: Vec<Vec<u32>> = vec![Vec::new(); threads];
            for &idx in &order {
                shards[shard_of[idx as usize]].push(idx);
            }
            let shared = SharedModel {
                w: SharedParams::new(&mut model.w),
                w_ctx: SharedParams::new(&mut model.w_ctx),
                b: SharedParams::new(&mut model.b),
                b_ctx: SharedParams::new(&mut model.b_ctx),
                m_w: SharedParams::new(&mut opt_w.m),
                v_w: SharedParams::new(&mut opt_w.v),
                m_wc: SharedParams::new(&mut opt_wc.m),
                v_wc: SharedParams::new(&mut opt_wc.v),
                m_b: SharedParams::new(&mut opt_b.m),
                v_b: SharedParams::new(&mut opt_b.v),
                m_bc: SharedParams::new(&mut opt_bc.m),
                v_bc: SharedParams::new(&mut opt_bc.v),
            };
            let anchor_ref = model.anchor.as_deref();
            let losses: Vec<f64> = std::thread::scope(|scope| {
                let handles: Vec<_> = shards
                    .iter()
                    .map(|shard| {
                        let shared = &shared;
                        let pairs = &pairs;
                        let n_target = &n_target;
                        let base_step = epoch as u64 * shard.len().div_ceil(cfg.batch_size) as u64;
                        scope.spawn(move || {
                            run_shard(
                                shared, pairs, shard, cfg, n_target, anchor_ref, v, d, base_step,
                            )
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap()).collect()
            });
            let epoch_loss: f64 = losses.iter().sum();
            if !epoch_loss.is_finite() {
                return Err(Error::NonFinite {
                    what: "training loss",
                    epoch: epoch + 1,
                });
            }
            loss_trace.push(epoch_loss);
        }
    }

    if !model.finite() {
        return Err(Error::NonFinite {
            what: "model parameter",
            epoch: cfg.epochs,
        });
    }
    Ok(KeepTrainOutcome { model, loss_trace })
}

/// Target vectors in the shared embedding format.
pub fn export_final(model: &KeepModel) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::from_f64(&model.w, model.vocab_size, model.dim, EmbeddingKind::Final)
}

/// Dense gradient scratch reused across batches; cleared via touch lists.
struct BatchScratch {
    gw: Vec<f64>,
    gwc: Vec<f64>,
    gb: Vec<f64>,
    gbc: Vec<f64>,
    touched_w: Vec<u32>,
    touched_wc: Vec<u32>,
    hit_w: Vec<bool>,
    hit_wc: Vec<bool>,
    occurrences: Vec<u32>,
}

impl BatchScratch {
    fn new(v: usize, d: usize) -> Self {
        BatchScratch {
            gw: vec![0.0; v * d],
            gwc: vec![0.0; v * d],
            gb: vec![0.0; v],
            gbc: vec![0.0; v],
            touched_w: Vec::new(),
            touched_wc: Vec::new(),
            hit_w: vec![false; v],
            hit_wc: vec![false; v],
            occurrences: vec![0; v],
        }
    }

    /// Accumulates one batch's gradients, returning its loss contribution.
    fn accumulate(
        &mut self,
        model: &KeepModel,
        pairs: &[(u32, u32, f64, f64)],
        batch: &[u32],
        cfg: &KeepConfig,
        n_target: &[u32],
    ) -> f64 {
        let d = model.dim;
        let mut loss = 0.0;
        for &idx in batch {
            let (i, j, lnx, f) = pairs[idx as usize];
            let (iu, ju) = (i as usize, j as usize);
            let mut dot = 0.0;
            for k in 0..d {
                dot += model.w[iu * d + k] * model.w_ctx[ju * d + k];
            }
            let bias = if cfg.use_biases {
                model.b[iu] + model.b_ctx[ju]
            } else {
                0.0
            };
            let e = dot + bias - lnx;
            loss += f * e * e;
            let coeff = 2.0 * f * e;
            for k in 0..d {
                self.gw[iu * d + k] += coeff * model.w_ctx[ju * d + k];
                self.gwc[ju * d + k] += coeff * model.w[iu * d + k];
            }
            self.gb[iu] += coeff;
            self.gbc[ju] += coeff;
            if !self.hit_w[iu] {
                self.hit_w[iu] = true;
                self.touched_w.push(i);
            }
            if !self.hit_wc[ju] {
                self.hit_wc[ju] = true;
                self.touched_wc.push(j);
            }
            self.occurrences[iu] += 1;
        }
        if cfg.lambda > 0.0 {
            if let Some(anchor) = &model.anchor {
                for &i in &self.touched_w {
                    let iu = i as usize;
                    let scale = cfg.lambda * self.occurrences[iu] as f64 / n_target[iu] as f64;
                    let mut reg = 0.0;
                    for k in 0..d {
                        let delta = model.w[iu * d + k] - anchor[iu * d + k];
                        self.gw[iu * d + k] += 2.0 * scale * delta;
                        reg += delta * delta;
                    }
                    loss += scale * reg;
                }
            }
        }
        loss
    }

    fn clear(&mut self, d: usize) {
        for &i in &self.touched_w {
            let off = i as usize * d;
            self.gw[off..off + d].iter_mut().for_each(|x| *x = 0.0);
            self.gb[i as usize] = 0.0;
            self.occurrences[i as usize] = 0;
            self.hit_w[i as usize] = false;
        }
        for &j in &self.touched_wc {
            let off = j as usize * d;
            self.gwc[off..off + d].iter_mut().for_each(|x| *x = 0.0);
            self.gbc[j as usize] = 0.0;
            self.hit_wc[j as usize] = false;
        }
        self.touched_w.clear();
        self.touched_wc.clear();
    }
}

struct SharedModel {
    w: SharedParams,
    w_ctx: SharedParams,
    b: SharedParams,
    b_ctx: SharedParams,
    m_w: SharedParams,
    v_w: SharedParams,
    m_wc: SharedParams,
    v_wc: SharedParams,
    m_b: SharedParams,
    v_b: SharedParams,
    m_bc: SharedParams,
    v_bc: SharedParams,
}

/// One worker's epoch over its target-row shard in parallel mode.
#[allow(clippy::too_many_arguments)]
fn run_shard(
    shared: &SharedModel,
    pairs: &[(u32, u32, f64, f64)],
    shard: &[u32],
    cfg: &KeepConfig,
    n_target: &[u32],
    anchor: Option<&[f64]>,
    v: usize,
    d: usize,
    base_step: u64,
) -> f64 {
    let w = unsafe { shared.w.slice_mut(0, v * d) };
    let w_ctx = unsafe { shared.w_ctx.slice_mut(0, v * d) };
    let b = unsafe { shared.b.slice_mut(0, v) };
    let b_ctx = unsafe { shared.b_ctx.slice_mut(0, v) };
    let m_w = unsafe { shared.m_w.slice_mut(0, v * d) };
    let v_w = unsafe { shared.v_w.slice_mut(0, v * d) };
    let m_wc = unsafe { shared.m_wc.slice_mut(0, v * d) };
    let v_wc = unsafe { shared.v_wc.slice_mut(0, v * d) };
    let m_b = unsafe { shared.m_b.slice_mut(0, v) };
    let v_b = unsafe { shared.v_b.slice_mut(0, v) };
    let m_bc = unsafe { shared.m_bc.slice_mut(0, v) };
    let v_bc = unsafe { shared.v_bc.slice_mut(0, v) };

    let hyper = AdamWParams {
        weight_decay: cfg.weight_decay,
        ..AdamWParams::default()
    };
    let mut step = base_step;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; d];
    let mut grad_wc = vec![0.0; d];

    for batch in shard.chunks(cfg.batch_size) {
        step += 1;
        let t = step as f64;
        let ctx = crate::adamw::StepCtx {
            lr: cfg.learning_rate,
            beta1: hyper.beta1,
            beta2: hyper.beta2,
            epsilon: hyper.epsilon,
            weight_decay: hyper.weight_decay,
            bias_corr1: 1.0 - hyper.beta1.powf(t),
            bias_corr2: 1.0 - hyper.beta2.powf(t),
        };
        // Per-pair updates within the batch; target rows belong to this
        // shard, context rows may race with other workers.
        for &idx in batch {
            let (i, j, lnx, f) = pairs[idx as usize];
            let (iu, ju) = (i as usize, j as usize);
            let mut dot = 0.0;
            for k in 0..d {
                dot += w[iu * d + k] * w_ctx[ju * d + k];
            }
            let bias = if cfg.use_biases { b[iu] + b_ctx[ju] } else { 0.0 };
            let e = dot + bias - lnx;
            loss += f * e * e;
            let coeff = 2.0 * f * e;
            for k in 0..d {
                grad_w[k] = coeff * w_ctx[ju * d + k];
                grad_wc[k] = coeff * w[iu * d + k];
            }
            if cfg.lambda > 0.0 {
                if let Some(anchor) = anchor {
                    let scale = cfg.lambda / n_target[iu] as f64;
                    let mut reg = 0.0;
                    for k in 0..d {
                        let delta = w[iu * d + k] - anchor[iu * d + k];
                        grad_w[k] += 2.0 * scale * delta;
                        reg += delta * delta;
                    }
                    loss += scale * reg;
                }
            }
            adamw_apply(
                &ctx,
                &mut w[iu * d..iu * d + d],
                &mut m_w[iu * d..iu * d + d],
                &mut v_w[iu * d..iu * d + d],
                &grad_w,
            );
            adamw_apply(
                &ctx,
                &mut w_ctx[ju * d..ju * d + d],
                &mut m_wc[ju * d..ju * d + d],
                &mut v_wc[ju * d..ju * d + d],
                &grad_wc,
            );
            if cfg.use_biases {
                adamw_apply(&ctx, &mut b[iu..iu + 1], &mut m_b[iu..iu + 1], &mut v_b[iu..iu + 1], &[coeff]);
                adamw_apply(
                    &ctx,
                    &mut b_ctx[ju..ju + 1],
                    &mut m_bc[ju..ju + 1],
                    &mut v_bc[ju..ju + 1],
                    &[coeff],
                );
            }
        }
    }
    loss
}
