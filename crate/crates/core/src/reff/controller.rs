use serde::{Deserialize, Serialize};

use super::ReffError;

pub const DEFAULT_INIT_BETA: f64 = 0.05;
pub const DEFAULT_KL_TARGET: f64 = 6.0;
pub const DEFAULT_HORIZON: f64 = 1000.0;

/// Adaptive weight on the KL penalty.
///
/// Each update applies `e = clamp((kl - target) / target, -0.2, 0.2)` and
/// `beta *= 1 + e * steps / horizon`. The ratio `steps / horizon` is capped
/// at 1 so a single update moves beta by at most 20% and beta stays positive.
/// A frozen controller keeps its beta (which may be 0) forever.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlController {
    beta: f64,
    target: f64,
    horizon: f64,
    frozen: bool,
}

impl Default for KlController {
    fn default() -> Self {
        KlController {
            beta: DEFAULT_INIT_BETA,
            target: DEFAULT_KL_TARGET,
            horizon: DEFAULT_HORIZON,
            frozen: false,
        }
    }
}

impl KlController {
    pub fn new(beta: f64, target: f64, horizon: f64) -> Result<Self, ReffError> {
        for (name, x) in [("beta", beta), ("target", target), ("horizon", horizon)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(ReffError::InvalidConfig(format!("{name} must be positive and finite, got {x}")));
            }
        }
        Ok(KlController {
            beta,
            target,
            horizon,
            frozen: false,
        })
    }

    /// A controller that never adapts. Unlike [`KlController::new`] it
    /// accepts `beta = 0`, which disables the penalty entirely.
    pub fn fixed(beta: f64) -> Result<Self, ReffError> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(ReffError::InvalidConfig(format!("beta must be non-negative and finite, got {beta}")));
        }
        Ok(KlController {
            beta,
            frozen: true,
            ..KlController::default()
        })
    }

    pub fn frozen(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn update(&mut self, observed_kl: f64, steps: usize) {
        if self.frozen {
            return;
        }
        let e = ((observed_kl - self.target) / self.target).clamp(-0.2, 0.2);
        let scale = (steps as f64 / self.horizon).min(1.0);
        self.beta *= 1.0 + e * scale;
    }
}

/// Value-style form of [`KlController::update`].
pub fn update_beta(mut controller: KlController, observed_kl: f64, steps: usize) -> KlController {
    controller.update(observed_kl, steps);
    controller
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn law() {
        let c = KlController::default();
        assert_eq!(update_beta(c, 6.0, 32).beta(), 0.05);
        assert!((update_beta(c, 12.0, 1000).beta() - 0.06).abs() < 1e-15);
        assert!((update_beta(c, 0.0, 500).beta() - 0.05 * 0.9).abs() < 1e-15);
    }

    #[test]
    fn frozen_and_validation() {
        let c = KlController::fixed(0.0).unwrap();
        assert_eq!(update_beta(c, 100.0, 1000).beta(), 0.0);
        assert!(KlController::new(0.0, 6.0, 1000.0).is_err());
        assert!(KlController::fixed(-1.0).is_err());
    }
}
