//! Checker-rewarded reinforcement at desk scale.
//!
//! A factorized toy policy learns a tag-wrapping format from checker scores,
//! with a KL penalty to a frozen uniform reference whose weight is adapted
//! toward a KL target, and PPO-clip updates. Everything is small enough that
//! KL divergences and pass rates are computed exactly.

mod controller;
mod env;
mod policy;
pub mod ppo;
mod train;

pub use controller::{update_beta, KlController, DEFAULT_HORIZON, DEFAULT_INIT_BETA, DEFAULT_KL_TARGET};
pub use env::{QuerySource, ToyFormatEnv, ToyQuery, CLOSE, OPEN, PAD};
pub use policy::{diversity_probe, exact_kl, PolicyPair, ToyPolicy};
pub use ppo::{ppo_step, PpoStats, Sample};
pub use train::{train, TrainConfig, TrainLog, TrainRecord, TrainSummary, NOMINAL_LEARNING_RATE, TOY_LR_SCALE};

#[derive(Debug, thiserror::Error)]
pub enum ReffError {
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("PPO gradient is not finite")]
    NonFiniteGradient,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("symbol {symbol} is outside the vocabulary of size {vocab}")]
    SymbolOutOfRange { symbol: u8, vocab: usize },
    #[error("training failed at batch {batch}: {source}")]
    Training {
        batch: usize,
        #[source]
        source: Box<ReffError>,
        /// Records logged before the failure.
        log: Box<TrainLog>,
    },
}

/// Checker score minus the weighted log-ratio between adapted and reference
/// policies: `score - beta * (logp_phi - logp_theta)`.
pub fn reward(score: f64, logp_phi: f64, logp_theta: f64, beta: f64) -> Result<f64, ReffError> {
    let r = score - beta * (logp_phi - logp_theta);
    if !(logp_phi.is_finite() && logp_theta.is_finite() && r.is_finite()) {
        return Err(ReffError::NonFinite("reward inputs"));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reward_examples() {
        assert_eq!(reward(1.0, -4.2, -4.2, 3.0).unwrap(), 1.0);
        assert!((reward(-1.0, -1.0, -3.0, 0.05).unwrap() + 1.1).abs() < 1e-12);
        assert!((reward(1.0, -6.0, -3.0, 0.1).unwrap() - 1.3).abs() < 1e-12);
        assert!(reward(1.0, f64::NEG_INFINITY, 0.0, 0.1).is_err());
    }
}
