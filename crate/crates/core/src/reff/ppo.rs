use serde::{Deserialize, Serialize};

use super::{PolicyPair, ReffError, ToyPolicy};

/// One sampled response with its log-probability under the sampling policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub sequence: Vec<u8>,
    pub old_logp: f64,
    pub reward: f64,
}

/// Batch-mean baseline, optionally divided by the batch standard deviation.
/// A batch with identical rewards has all-zero advantages.
pub fn advantages(rewards: &[f64], whiten: bool) -> Vec<f64> {
    if rewards.is_empty() {
        return Vec::new();
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let centered: Vec<f64> = rewards.iter().map(|r| r - mean).collect();
    if !whiten {
        return centered;
    }
    let std = (centered.iter().map(|c| c * c).sum::<f64>() / n).sqrt();
    if std < 1e-12 {
        vec![0.0; rewards.len()]
    } else {
        centered.into_iter().map(|c| c / std).collect()
    }
}

/// Clipped surrogate `mean(min(r*A, clamp(r, 1-eps, 1+eps)*A))` with
/// `r = exp(logp_now - old_logp)`.
pub fn surrogate_objective(
    policy: &ToyPolicy,
    batch: &[Sample],
    advantages: &[f64],
    clip_epsilon: f64,
) -> Result<f64, ReffError> {
    let mut total = 0.0;
    for (s, &a) in batch.iter().zip(advantages) {
        let ratio = (policy.logp(&s.sequence)? - s.old_logp).exp();
        let clipped = ratio.clamp(1.0 - clip_epsilon, 1.0 + clip_epsilon);
        total += (ratio * a).min(clipped * a);
    }
    Ok(total / batch.len() as f64)
}

/// Analytic gradient of [`surrogate_objective`] with respect to the logits.
///
/// A sample contributes `A * r * ∇logp` while its unclipped term is the
/// minimum, and nothing once the clip is binding.
pub fn surrogate_gradient(
    policy: &ToyPolicy,
    batch: &[Sample],
    advantages: &[f64],
    clip_epsilon: f64,
) -> Result<Vec<f64>, ReffError> {
    let mut grad = vec![0.0; policy.logits().len()];
    for (s, &a) in batch.iter().zip(advantages) {
        let ratio = (policy.logp(&s.sequence)? - s.old_logp).exp();
        let active = (a > 0.0 && ratio <= 1.0 + clip_epsilon) || (a < 0.0 && ratio >= 1.0 - clip_epsilon);
        if !active {
            continue;
        }
        let w = a * ratio / batch.len() as f64;
        for (g, d) in grad.iter_mut().zip(policy.logp_gradient(&s.sequence)?) {
            *g += w * d;
        }
    }
    Ok(grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoStats {
    pub objective: f64,
    pub grad_norm: f64,
}

/// One gradient-ascent step on the clipped surrogate. Only the adapted
/// policy moves.
pub fn ppo_step(
    pair: &mut PolicyPair,
    batch: &[Sample],
    learning_rate: f64,
    clip_epsilon: f64,
    whiten: bool,
) -> Result<PpoStats, ReffError> {
    if batch.is_empty() {
        return Err(ReffError::InvalidConfig("PPO batch is empty".into()));
    }
    if batch.iter().any(|s| !s.old_logp.is_finite() || !s.reward.is_finite()) {
        return Err(ReffError::NonFinite("batch log-probabilities or rewards"));
    }
    let rewards: Vec<f64> = batch.iter().map(|s| s.reward).collect();
    let adv = advantages(&rewards, whiten);
    let objective = surrogate_objective(pair.adapted(), batch, &adv, clip_epsilon)?;
    let grad = surrogate_gradient(pair.adapted(), batch, &adv, clip_epsilon)?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(ReffError::NonFiniteGradient);
    }
    for (l, g) in pair.adapted_mut().logits_mut().iter_mut().zip(&grad) {
        *l += learning_rate * g;
    }
    if pair.adapted().logits().iter().any(|l| !l.is_finite()) {
        return Err(ReffError::NonFinite("logits after update"));
    }
    Ok(PpoStats {
        objective,
        grad_norm: grad.iter().map(|g| g * g).sum::<f64>().sqrt(),
    })
}

/// One ascent step on the mean log-likelihood of `targets`.
pub fn supervised_step(policy: &mut ToyPolicy, targets: &[Vec<u8>], learning_rate: f64) -> Result<(), ReffError> {
    if targets.is_empty() {
        return Err(ReffError::InvalidConfig("supervised batch is empty".into()));
    }
    let mut grad = vec![0.0; policy.logits().len()];
    for t in targets {
        for (g, d) in grad.iter_mut().zip(policy.logp_gradient(t)?) {
            *g += d / targets.len() as f64;
        }
    }
    for (l, g) in policy.logits_mut().iter_mut().zip(&grad) {
        *l += learning_rate * g;
    }
    Ok(())
}
