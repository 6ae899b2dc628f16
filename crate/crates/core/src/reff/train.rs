use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ppo::{ppo_step, supervised_step, Sample};
use super::{diversity_probe, exact_kl, reward, KlController, PolicyPair, QuerySource, ReffError, ToyFormatEnv};

/// The learning rate used for LLM adapters. It is far too small for a
/// 48-parameter policy, so [`TrainConfig`] multiplies it by `lr_scale`.
pub const NOMINAL_LEARNING_RATE: f64 = 1.41e-5;
pub const TOY_LR_SCALE: f64 = 5.0e4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_scale: f64,
    pub clip_epsilon: f64,
    pub whiten_advantages: bool,
    /// Supervised steps run before RL when a warm start is requested.
    pub warm_start_steps: usize,
    pub diversity_samples: usize,
}

impl TrainConfig {
    pub fn new(seed: u64) -> Self {
        TrainConfig {
            seed,
            epochs: 3,
            batch_size: 32,
            learning_rate: NOMINAL_LEARNING_RATE,
            lr_scale: TOY_LR_SCALE,
            clip_epsilon: 0.2,
            whiten_advantages: false,
            warm_start_steps: 100,
            diversity_samples: 1000,
        }
    }

    pub fn effective_learning_rate(&self) -> f64 {
        self.learning_rate * self.lr_scale
    }

    pub fn validate(&self) -> Result<(), ReffError> {
        let bad = |what: &str| Err(ReffError::InvalidConfig(what.to_string()));
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.effective_learning_rate().is_finite() && self.effective_learning_rate() > 0.0) {
            return bad("learning rate must be positive and finite");
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return bad("clip_epsilon must lie in (0, 1)");
        }
        if self.diversity_samples == 0 {
            return bad("diversity_samples must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub batch: usize,
    /// Pass rate of the batch's samples.
    pub ffr: f64,
    pub mean_reward: f64,
    /// Exact KL after the batch's update.
    pub kl: f64,
    /// Penalty weight after the controller update.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub seed: u64,
    pub query_source: QuerySource,
    pub warm_start: bool,
    pub batches: usize,
    /// Exact pass probability of the reference policy.
    pub baseline_ffr: f64,
    /// Exact pass probability of the adapted policy after training.
    pub final_ffr: f64,
    /// Mean batch pass rate over the last epoch.
    pub final_epoch_ffr: Option<f64>,
    pub final_kl: f64,
    /// Mean KL over the last 10% of batches.
    pub tail_mean_kl: Option<f64>,
    pub final_beta: f64,
    /// Distinct fraction of samples from the final adapted policy.
    pub diversity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    pub summary: Option<TrainSummary>,
}

impl TrainLog {
    /// One JSON object per batch record.
    pub fn write_records<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn tail_mean(values: impl ExactSizeIterator<Item = f64> + DoubleEndedIterator, fraction: f64) -> Option<f64> {
    let n = values.len();
    if n == 0 {
        return None;
    }
    let k = ((n as f64 * fraction).ceil() as usize).max(1);
    Some(values.rev().take(k).sum::<f64>() / k as f64)
}

/// Runs checker-rewarded PPO on the toy task.
///
/// With `warm_start`, the adapted policy first takes supervised steps on the
/// training pool's target strings. Then, for each epoch, the query pool is
/// shuffled and consumed in batches: one sample per query, checker score
/// minus the KL penalty as reward, one PPO step, one controller update.
/// Queries carry no information the policy can condition on, so they only
/// fix the batch structure.
pub fn train(
    env: &ToyFormatEnv,
    pair: &mut PolicyPair,
    controller: &mut KlController,
    config: &TrainConfig,
    query_source: QuerySource,
    warm_start: bool,
) -> Result<TrainLog, ReffError> {
    config.validate()?;
    if pair.adapted().seq_len() != env.seq_len() || pair.adapted().vocab() != env.vocab() {
        return Err(ReffError::ShapeMismatch {
            expected: env.seq_len() * env.vocab(),
            found: pair.adapted().logits().len(),
        });
    }
    let lr = config.effective_learning_rate();
    let baseline_ffr = env.exact_ffr(pair.reference())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut log = TrainLog { records: Vec::new(), summary: None };

    if warm_start {
        let targets: Vec<Vec<u8>> = env.queries(QuerySource::Trn).into_iter().map(|q| q.target).collect();
        for chunk in targets.chunks(config.batch_size).cycle().take(config.warm_start_steps) {
            supervised_step(pair.adapted_mut(), chunk, lr)?;
        }
    }

    let mut queries = env.queries(query_source);
    let batches_per_epoch = queries.len() / config.batch_size;
    for _epoch in 0..config.epochs {
        queries.shuffle(&mut rng);
        for chunk in queries.chunks_exact(config.batch_size) {
            let batch_index = log.records.len();
            match run_batch(env, pair, controller, config, chunk.len(), lr, &mut rng) {
                Ok(mut record) => {
                    record.batch = batch_index;
                    log.records.push(record);
                }
                Err(e) => {
                    return Err(ReffError::Training {
                        batch: batch_index,
                        source: Box::new(e),
                        log: Box::new(log),
                    })
                }
            }
        }
    }

    let final_epoch_ffr = if batches_per_epoch > 0 && !log.records.is_empty() {
        let last = &log.records[log.records.len().saturating_sub(batches_per_epoch)..];
        Some(last.iter().map(|r| r.ffr).sum::<f64>() / last.len() as f64)
    } else {
        None
    };
    log.summary = Some(TrainSummary {
        seed: config.seed,
        query_source,
        warm_start,
        batches: log.records.len(),
        baseline_ffr,
        final_ffr: env.exact_ffr(pair.adapted())?,
        final_epoch_ffr,
        final_kl: exact_kl(pair),
        tail_mean_kl: tail_mean(log.records.iter().map(|r| r.kl), 0.1),
        final_beta: controller.beta(),
        diversity: diversity_probe(pair.adapted(), config.diversity_samples, config.seed.wrapping_add(1))?,
    });
    Ok(log)
}

fn run_batch(
    env: &ToyFormatEnv,
    pair: &mut PolicyPair,
    controller: &mut KlController,
    config: &TrainConfig,
    n: usize,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> Result<TrainRecord, ReffError> {
    let beta = controller.beta();
    let mut batch = Vec::with_capacity(n);
    let mut passes = 0usize;
    for _ in 0..n {
        let sequence = pair.adapted().sample(rng);
        let logp_phi = pair.adapted().logp(&sequence)?;
        let logp_theta = pair.reference().logp(&sequence)?;
        let score = env.score(&sequence);
        if score > 0.0 {
            passes += 1;
        }
        batch.push(Sample {
            reward: reward(score, logp_phi, logp_theta, beta)?,
            sequence,
            old_logp: logp_phi,
        });
    }
    let mean_reward = batch.iter().map(|s| s.reward).sum::<f64>() / n as f64;
    ppo_step(pair, &batch, lr, config.clip_epsilon, config.whiten_advantages)?;
    let kl = exact_kl(pair);
    if !kl.is_finite() {
        return Err(ReffError::NonFinite("KL divergence"));
    }
    controller.update(kl, n);
    Ok(TrainRecord {
        batch: 0,
        ffr: passes as f64 / n as f64,
        mean_reward,
        kl,
        beta: controller.beta(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reff::ToyPolicy;

    fn small_env() -> ToyFormatEnv {
        ToyFormatEnv::new(6, 8, 320).unwrap()
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let env = small_env();
        let mut pair = PolicyPair::new(ToyPolicy::uniform(6, 8).unwrap());
        let before = pair.clone();
        let config = TrainConfig { epochs: 0, ..TrainConfig::new(7) };
        let log = train(&env, &mut pair, &mut KlController::default(), &config, QuerySource::Tst, false).unwrap();
        let s = log.summary.unwrap();
        assert_eq!(pair, before);
        assert!(log.records.is_empty());
        assert_eq!(s.final_ffr, s.baseline_ffr);
        assert_eq!(s.final_kl, 0.0);
    }

    #[test]
    fn same_seed_same_log() {
        let env = small_env();
        let run = || {
            let mut pair = PolicyPair::new(ToyPolicy::uniform(6, 8).unwrap());
            train(&env, &mut pair, &mut KlController::default(), &TrainConfig::new(3), QuerySource::Tst, true).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 30);
    }

    #[test]
    fn tail_mean_uses_last_tenth() {
        let v = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 5.0, 7.0];
        assert_eq!(tail_mean(v.iter().copied(), 0.1), Some(6.0));
        assert_eq!(tail_mean(std::iter::empty::<f64>().collect::<Vec<_>>().into_iter(), 0.1), None);
    }
}
