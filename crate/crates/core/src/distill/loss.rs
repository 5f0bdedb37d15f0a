use super::TrainConfig;
use crate::error::{Error, Result};

/// A probability distribution over classes.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Checks that every value lies in `[0, 1]` and the sum is one within 1e-9.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidShape("empty probability vector".into()));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidShape(format!("probabilities outside [0, 1]: {values:?}")));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidShape(format!("probabilities sum to {sum}")));
        }
        Ok(ProbVector(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest probability; the first one on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// A scalar loss and its gradient with respect to the logits.
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
}

pub fn softmax(z: &[f64]) -> Result<ProbVector> {
    softmax_temp(z, 1.0)
}

/// `exp(z_i / T) / Σ_j exp(z_j / T)` with max subtraction.
pub fn softmax_temp(z: &[f64], temperature: f64) -> Result<ProbVector> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Config(format!(
            "temperature must be positive and finite, got {temperature}"
        )));
    }
    if z.is_empty() {
        return Err(Error::InvalidShape("softmax of an empty logit vector".into()));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("softmax logits {z:?}"),
        });
    }
    let scaled: Vec<f64> = z.iter().map(|v| v / temperature).collect();
    let m = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|v| (v - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(ProbVector(exps.into_iter().map(|e| e / total).collect()))
}

/// `−log p[label]`; the gradient is with respect to the logits that
/// produced `p` through a plain softmax.
pub fn cross_entropy(p: &ProbVector, label: usize) -> Result<LossGrad> {
    if label >= p.len() {
        return Err(Error::InvalidShape(format!(
            "label {label} out of range for {} classes",
            p.len()
        )));
    }
    let mut grad = p.0.clone();
    grad[label] -= 1.0;
    Ok(LossGrad {
        loss: -p.0[label].ln(),
        grad,
    })
}

/// `Σ p_i log(p_i / q_i)`; the gradient is with respect to the logits that
/// produced `q` through a plain softmax, `q − p`.
pub fn kl_div(p: &ProbVector, q: &ProbVector) -> Result<LossGrad> {
    if p.len() != q.len() {
        return Err(Error::shape("kl_div", p.len(), q.len()));
    }
    let loss =
        p.0.iter()
            .zip(&q.0)
            .filter(|(&pi, _)| pi > 0.0)
            .map(|(&pi, &qi)| pi * (pi.ln() - qi.ln()))
            .sum::<f64>()
            .max(0.0);
    let grad = q.0.iter().zip(&p.0).map(|(qi, pi)| qi - pi).collect();
    Ok(LossGrad { loss, grad })
}

/// Distillation loss terms for one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct KdLoss {
    /// `α·hard + (1 − α)·soft`.
    pub loss: f64,
    /// Cross-entropy of the student against the label.
    pub hard: f64,
    /// KL divergence between the tempered distributions, times τ² when
    /// that scaling is enabled.
    pub soft: f64,
    pub grad: Vec<f64>,
}

/// Combined hard/soft loss with its gradient with respect to the student
/// logits. The teacher logits are constants.
pub fn kd_loss(student: &[f64], teacher: &[f64], label: usize, cfg: &TrainConfig) -> Result<KdLoss> {
    cfg.validate()?;
    if student.len() != teacher.len() {
        return Err(Error::shape("kd_loss", student.len(), teacher.len()));
    }
    let tau = cfg.temperature;
    let alpha = cfg.alpha;
    let hard = cross_entropy(&softmax(student)?, label)?;
    let soft = kl_div(&softmax_temp(teacher, tau)?, &softmax_temp(student, tau)?)?;
    let scale = if cfg.t_squared_scaling { tau * tau } else { 1.0 };
    let grad = hard
        .grad
        .iter()
        .zip(&soft.grad)
        .map(|(h, s)| alpha * h + (1.0 - alpha) * scale * s / tau)
        .collect();
    let soft_loss = scale * soft.loss;
    Ok(KdLoss {
        loss: alpha * hard.loss + (1.0 - alpha) * soft_loss,
        hard: hard.loss,
        soft: soft_loss,
        grad,
    })
}
