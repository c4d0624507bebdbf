//! AdamW with decoupled weight decay over flat f64 parameter buffers.
//!
//! Moments are kept per parameter; sparse training touches only the rows a
//! batch hits while bias correction follows the global step count.

#[derive(Debug, Clone, Copy)]
pub struct AdamWParams {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWParams {
    fn default() -> Self {
        AdamWParams {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Optimizer state for one flat parameter buffer.
#[derive(Debug, Clone)]
pub struct AdamW {
    pub(crate) m: Vec<f64>,
    pub(crate) v: Vec<f64>,
    hyper: AdamWParams,
    step: u64,
}

/// Per-step coefficients; copyable so row updates can borrow params freely.
#[derive(Debug, Clone, Copy)]
pub struct StepCtx {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
    pub bias_corr1: f64,
    pub bias_corr2: f64,
}

impl AdamW {
    pub fn new(n_params: usize, hyper: AdamWParams) -> Self {
        AdamW {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            hyper,
            step: 0,
        }
    }

    /// Advances the global step and returns the coefficients for it.
    pub fn begin_step(&mut self, lr: f64) -> StepCtx {
        self.step += 1;
        let t = self.step as f64;
        StepCtx {
            lr,
            beta1: self.hyper.beta1,
            beta2: self.hyper.beta2,
            epsilon: self.hyper.epsilon,
            weight_decay: self.hyper.weight_decay,
            bias_corr1: 1.0 - self.hyper.beta1.powf(t),
            bias_corr2: 1.0 - self.hyper.beta2.powf(t),
        }
    }

    /// Updates `params[offset..offset+len]` with `grads` under `ctx`.
    pub fn update_range(&mut self, ctx: &StepCtx, params: &mut [f64], offset: usize, grads: &[f64]) {
        let m = &mut self.m[offset..offset + grads.len()];
        let v = &mut self.v[offset..offset + grads.len()];
        adamw_apply(ctx, &mut params[offset..offset + grads.len()], m, v, grads);
    }
}

/// The element-wise AdamW rule, shared by the sequential and lock-free paths.
pub(crate) fn adamw_apply(ctx: &StepCtx, params: &mut [f64], m: &mut [f64], v: &mut [f64], grads: &[f64]) {
    for i in 0..grads.len() {
        let g = grads[i];
        if ctx.weight_decay != 0.0 {
            params[i] *= 1.0 - ctx.lr * ctx.weight_decay;
        }
        m[i] = ctx.beta1 * m[i] + (1.0 - ctx.beta1) * g;
        v[i] = ctx.beta2 * v[i] + (1.0 - ctx.beta2) * g * g;
        let m_hat = m[i] / ctx.bias_corr1;
        let v_hat = v[i] / ctx.bias_corr2;
        params[i] -= ctx.lr * m_hat / (v_hat.sqrt() + ctx.epsilon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_a_quadratic() {
        // f(x) = (x - 3)^2 from x = 0.
        let mut x = vec![0.0f64];
        let mut opt = AdamW::new(1, AdamWParams::default());
        for _ in 0..2000 {
            let g = 2.0 * (x[0] - 3.0);
            let ctx = opt.begin_step(0.05);
            opt.update_range(&ctx, &mut x, 0, &[g]);
        }
        assert!((x[0] - 3.0).abs() < 1e-3, "x = {}", x[0]);
    }

    #[test]
    fn weight_decay_shrinks_params() {
        let mut x = vec![10.0f64];
        let mut opt = AdamW::new(
            1,
            AdamWParams {
                weight_decay: 0.1,
                ..AdamWParams::default()
            },
        );
        let ctx = opt.begin_step(0.01);
        opt.update_range(&ctx, &mut x, 0, &[0.0]);
        assert!(x[0] < 10.0);
    }
}
