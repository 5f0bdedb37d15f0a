//! Losses, the SGD optimizer and the plain / distillation training loops.

mod loss;
mod train;

pub use loss::{argmax, cross_entropy, kd_loss, kl_div, softmax, softmax_temp, KdLoss, LossGrad, ProbVector};
pub use train::{evaluate, predict, train_plain, train_student_kd, training_active, EpochRecord, History};

use crate::error::{Error, Result};
use crate::network::{ParamGrads, ParamStore};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Weight of the hard-label term, in `[0, 1]`.
    pub alpha: f64,
    pub temperature: f64,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Multiply the soft term by τ².
    pub t_squared_scaling: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.5,
            temperature: 4.0,
            lr: 1e-4,
            momentum: 0.9,
            weight_decay: 5e-4,
            batch_size: 16,
            epochs: 10,
            seed: 0,
            t_squared_scaling: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Config(format!("{what} out of range: {v}")));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha", self.alpha);
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature", self.temperature);
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr", self.lr);
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", self.momentum);
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay", self.weight_decay);
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// One momentum step on every parameter:
/// `v ← m·v + g + wd·θ`, `θ ← θ − lr·v`.
pub fn sgd_step(params: &mut ParamStore, grads: &ParamGrads, cfg: &TrainConfig) -> Result<()> {
    for name in grads.keys() {
        if params.get(name).is_none() {
            return Err(Error::State(format!("gradient for unknown parameter {name}")));
        }
    }
    for (name, p) in params.iter_mut() {
        let g = grads
            .get(name)
            .ok_or_else(|| Error::State(format!("no gradient for parameter {name}")))?;
        if g.shape() != p.value.shape() {
            return Err(Error::shape("sgd_step", p.value.shape(), g.shape()));
        }
        for ((theta, v), &gi) in p.value.data_mut().iter_mut().zip(p.momentum.data_mut()).zip(g.data()) {
            *v = cfg.momentum * *v + gi + cfg.weight_decay * *theta;
            *theta -= cfg.lr * *v;
        }
    }
    Ok(())
}
