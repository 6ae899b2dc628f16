use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ReffError;

/// A sequence policy whose positions are independent categoricals.
///
/// Logits are stored row-major as `seq_len × vocab`. Because positions are
/// independent, sequence log-probabilities and KL divergences are exact sums
/// over positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy {
    seq_len: usize,
    vocab: usize,
    logits: Vec<f64>,
}

impl ToyPolicy {
    /// All-zero logits, i.e. uniform over `vocab^seq_len`.
    pub fn uniform(seq_len: usize, vocab: usize) -> Result<Self, ReffError> {
        ToyPolicy::from_logits(seq_len, vocab, vec![0.0; seq_len * vocab])
    }

    pub fn from_logits(seq_len: usize, vocab: usize, logits: Vec<f64>) -> Result<Self, ReffError> {
        if seq_len == 0 || !(2..=256).contains(&vocab) {
            return Err(ReffError::InvalidConfig(format!(
                "policy needs seq_len >= 1 and 2 <= vocab <= 256, got {seq_len}x{vocab}"
            )));
        }
        if logits.len() != seq_len * vocab {
            return Err(ReffError::ShapeMismatch {
                expected: seq_len * vocab,
                found: logits.len(),
            });
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(ReffError::NonFinite("logits"));
        }
        Ok(ToyPolicy { seq_len, vocab, logits })
    }

    /// A policy that emits `sequence` with probability 1 up to f64 underflow.
    pub fn deterministic(sequence: &[u8], vocab: usize) -> Result<Self, ReffError> {
        let mut logits = vec![-1000.0; sequence.len() * vocab];
        for (t, &s) in sequence.iter().enumerate() {
            if s as usize >= vocab {
                return Err(ReffError::SymbolOutOfRange { symbol: s, vocab });
            }
            logits[t * vocab + s as usize] = 0.0;
        }
        ToyPolicy::from_logits(sequence.len(), vocab, logits)
    }

    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub(crate) fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    fn row(&self, t: usize) -> &[f64] {
        &self.logits[t * self.vocab..(t + 1) * self.vocab]
    }

    /// Log-softmax of position `t`.
    pub fn log_probs_at(&self, t: usize) -> Vec<f64> {
        let row = self.row(t);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        row.iter().map(|x| x - log_z).collect()
    }

    pub fn probs_at(&self, t: usize) -> Vec<f64> {
        self.log_probs_at(t).into_iter().map(f64::exp).collect()
    }

    /// All position distributions, `seq_len` rows of `vocab` probabilities.
    pub fn prob_table(&self) -> Vec<Vec<f64>> {
        (0..self.seq_len).map(|t| self.probs_at(t)).collect()
    }

    fn check_shape(&self, sequence: &[u8]) -> Result<(), ReffError> {
        if sequence.len() != self.seq_len {
            return Err(ReffError::ShapeMismatch {
                expected: self.seq_len,
                found: sequence.len(),
            });
        }
        match sequence.iter().find(|&&s| s as usize >= self.vocab) {
            Some(&symbol) => Err(ReffError::SymbolOutOfRange { symbol, vocab: self.vocab }),
            None => Ok(()),
        }
    }

    pub fn logp(&self, sequence: &[u8]) -> Result<f64, ReffError> {
        self.check_shape(sequence)?;
        Ok(sequence
            .iter()
            .enumerate()
            .map(|(t, &s)| self.log_probs_at(t)[s as usize])
            .sum())
    }

    /// Gradient of `logp(sequence)` with respect to the logits:
    /// `1[v = s_t] - p_t(v)` at every position.
    pub fn logp_gradient(&self, sequence: &[u8]) -> Result<Vec<f64>, ReffError> {
        self.check_shape(sequence)?;
        let mut grad = Vec::with_capacity(self.logits.len());
        for (t, &s) in sequence.iter().enumerate() {
            for (v, p) in self.probs_at(t).into_iter().enumerate() {
                grad.push(if v == s as usize { 1.0 - p } else { -p });
            }
        }
        Ok(grad)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u8> {
        (0..self.seq_len)
            .map(|t| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let probs = self.probs_at(t);
                for (v, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return v as u8;
                    }
                }
                // Rounding left `acc` just below 1; fall back to the last
                // symbol with nonzero mass.
                probs.iter().rposition(|&p| p > 0.0).unwrap_or(self.vocab - 1) as u8
            })
            .collect()
    }
}

/// The frozen reference policy and the trainable adapted policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyPair {
    reference: ToyPolicy,
    adapted: ToyPolicy,
}

impl PolicyPair {
    /// Starts the adapted policy as a copy of the reference.
    pub fn new(reference: ToyPolicy) -> Self {
        PolicyPair {
            adapted: reference.clone(),
            reference,
        }
    }

    pub fn with_adapted(reference: ToyPolicy, adapted: ToyPolicy) -> Result<Self, ReffError> {
        if reference.seq_len != adapted.seq_len || reference.vocab != adapted.vocab {
            return Err(ReffError::ShapeMismatch {
                expected: reference.logits.len(),
                found: adapted.logits.len(),
            });
        }
        Ok(PolicyPair { reference, adapted })
    }

    pub fn reference(&self) -> &ToyPolicy {
        &self.reference
    }

    pub fn adapted(&self) -> &ToyPolicy {
        &self.adapted
    }

    pub(crate) fn adapted_mut(&mut self) -> &mut ToyPolicy {
        &mut self.adapted
    }
}

/// `KL(adapted ‖ reference)`, summed over positions in closed form.
pub fn exact_kl(pair: &PolicyPair) -> f64 {
    (0..pair.adapted.seq_len)
        .map(|t| {
            let lp = pair.adapted.log_probs_at(t);
            let lq = pair.reference.log_probs_at(t);
            lp.iter()
                .zip(&lq)
                .map(|(a, b)| {
                    let p = a.exp();
                    if p > 0.0 {
                        p * (a - b)
                    } else {
                        0.0
                    }
                })
                .sum::<f64>()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Fraction of distinct sequences among `n_samples` seeded draws.
pub fn diversity_probe(policy: &ToyPolicy, n_samples: usize, seed: u64) -> Result<f64, ReffError> {
    if n_samples == 0 {
        return Err(ReffError::InvalidConfig("diversity probe needs at least one sample".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let distinct: HashSet<Vec<u8>> = (0..n_samples).map(|_| policy.sample(&mut rng)).collect();
    Ok(distinct.len() as f64 / n_samples as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_policy_rows_sum_to_one() {
        let p = ToyPolicy::uniform(6, 8).unwrap();
        for row in p.prob_table() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!((p.logp(&[0, 1, 2, 3, 4, 5]).unwrap() - 6.0 * (1.0f64 / 8.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn kl_closed_form() {
        let r = ToyPolicy::uniform(1, 2).unwrap();
        let a = ToyPolicy::deterministic(&[0], 2).unwrap();
        let pair = PolicyPair::with_adapted(r.clone(), a).unwrap();
        assert!((exact_kl(&pair) - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(exact_kl(&PolicyPair::new(r)), 0.0);
    }

    #[test]
    fn deterministic_policy_has_one_distinct_sample() {
        let p = ToyPolicy::deterministic(&[0, 3, 3, 1], 8).unwrap();
        assert_eq!(diversity_probe(&p, 50, 1).unwrap(), 1.0 / 50.0);
    }

    #[test]
    fn shape_errors() {
        let p = ToyPolicy::uniform(3, 4).unwrap();
        assert!(p.logp(&[0, 1]).is_err());
        assert!(p.logp(&[0, 1, 4]).is_err());
        assert!(ToyPolicy::from_logits(2, 2, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    }
}
