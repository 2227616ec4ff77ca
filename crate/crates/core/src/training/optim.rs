//! Parameter updates and the step-decay learning-rate schedule.
//!
//! Parameters and gradients are passed as parallel lists of slices
//! ("groups"), e.g. one group per weight tensor and one per bias vector.

use crate::error::{Error, Result};
use crate::training::config::{AdamConfig, TrainConfig};

/// Adam moments for every parameter group, plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub n: Vec<Vec<f64>>,
    pub t: u64,
}

impl AdamState {
    pub fn new<I: IntoIterator<Item = usize>>(group_sizes: I) -> Self {
        let m: Vec<Vec<f64>> = group_sizes.into_iter().map(|len| vec![0.0; len]).collect();
        Self {
            n: m.clone(),
            m,
            t: 0,
        }
    }
}

fn check_groups(params: &[&mut [f64]], grads: &[&[f64]]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::shape("optimizer", "parameter groups", params.len(), grads.len()));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.len() != g.len() {
            return Err(Error::shape("optimizer", "group length", p.len(), g.len()));
        }
    }
    for (gi, g) in grads.iter().enumerate() {
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of parameter group {gi} [{i}]")));
        }
    }
    Ok(())
}

/// One Adam update:
///
/// ```text
/// m_t = b1 m_{t-1} + (1 - b1) g
/// n_t = b2 n_{t-1} + (1 - b2) g^2
/// theta -= lr * m_t / (sqrt(n_t) + eps)
/// ```
///
/// Without bias correction the moments are used as-is; with it they are
/// divided by `1 - b1^t` and `1 - b2^t`. Nothing is modified if any
/// gradient is non-finite.
pub fn adam_step(
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    state: &mut AdamState,
    lr: f64,
    cfg: &AdamConfig,
) -> Result<()> {
    check_groups(params, grads)?;
    if state.m.len() != params.len() || state.m.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len()) {
        return Err(Error::Argument("Adam state does not match parameter groups".into()));
    }
    if !(lr > 0.0) {
        return Err(Error::Argument(format!("learning rate must be positive, got {lr}")));
    }
    state.t += 1;
    let (c1, c2) = if cfg.bias_correction {
        let t = state.t as i32;
        (1.0 - cfg.beta1.powi(t), 1.0 - cfg.beta2.powi(t))
    } else {
        (1.0, 1.0)
    };
    for (gi, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let (m, n) = (&mut state.m[gi], &mut state.n[gi]);
        for i in 0..p.len() {
            let gv = g[i];
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gv;
            n[i] = cfg.beta2 * n[i] + (1.0 - cfg.beta2) * gv * gv;
            let m_hat = m[i] / c1;
            let n_hat = n[i] / c2;
            p[i] -= lr * m_hat / (n_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok(())
}

/// Plain gradient descent: `theta -= lr * g`.
pub fn sgd_step(params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) -> Result<()> {
    check_groups(params, grads)?;
    if !(lr > 0.0) {
        return Err(Error::Argument(format!("learning rate must be positive, got {lr}")));
    }
    for (p, g) in params.iter_mut().zip(grads) {
        for (pv, gv) in p.iter_mut().zip(g.iter()) {
            *pv -= lr * gv;
        }
    }
    Ok(())
}

/// `lr0 * gamma^floor(epoch / interval)`.
pub fn lr_at_epoch(epoch: usize, cfg: &TrainConfig) -> f64 {
    let steps = (epoch / cfg.decay_interval_epochs.max(1)) as i32;
    cfg.lr0 * cfg.lr_decay.powi(steps)
}
