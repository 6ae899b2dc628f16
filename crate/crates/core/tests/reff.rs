use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use formatkit::reff::ppo::{advantages, surrogate_gradient, surrogate_objective};
use formatkit::reff::{
    exact_kl, reward, train, KlController, PolicyPair, QuerySource, Sample, ToyFormatEnv, ToyPolicy, TrainConfig,
};

/// A tenth of the default pool keeps debug-build runs quick.
fn small_env() -> ToyFormatEnv {
    ToyFormatEnv::new(6, 8, 3200).unwrap()
}

fn random_policy(seed: u64, scale: f64) -> ToyPolicy {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logits = (0..48).map(|_| rng.random_range(-scale..scale)).collect();
    ToyPolicy::from_logits(6, 8, logits).unwrap()
}

proptest! {
    #[test]
    fn reward_is_score_minus_weighted_log_ratio(
        score in prop_oneof![Just(1.0), Just(-1.0)],
        phi in -30.0f64..0.0,
        theta in -30.0f64..0.0,
        beta in 0.0f64..5.0,
    ) {
        let r = reward(score, phi, theta, beta).unwrap();
        prop_assert!((r - (score - beta * (phi - theta))).abs() < 1e-12);
        prop_assert_eq!(reward(score, phi, theta, 0.0).unwrap(), score);
        prop_assert_eq!(reward(score, phi, phi, beta).unwrap(), score);
    }
}

#[test]
fn reward_rejects_non_finite_inputs() {
    assert!(reward(1.0, f64::NEG_INFINITY, -1.0, 0.1).is_err());
    assert!(reward(1.0, -1.0, f64::NAN, 0.1).is_err());
}

#[test]
fn exact_kl_matches_a_monte_carlo_estimate() {
    let pair = PolicyPair::with_adapted(ToyPolicy::uniform(6, 8).unwrap(), random_policy(3, 2.0)).unwrap();
    let exact = exact_kl(&pair);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20_000;
    let draws: Vec<f64> = (0..n)
        .map(|_| {
            let s = pair.adapted().sample(&mut rng);
            pair.adapted().logp(&s).unwrap() - pair.reference().logp(&s).unwrap()
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - exact).abs() < 3.0 * se, "exact {exact}, estimate {mean} ± {se}");
}

#[test]
fn surrogate_gradient_matches_finite_differences() {
    let env = ToyFormatEnv::default();
    let h = 1e-6;
    let mut checked = 0;
    for seed in 0..40u64 {
        let old = random_policy(seed, 1.0);
        let now = random_policy(seed + 1000, 0.05);
        let now = ToyPolicy::from_logits(6, 8, old.logits().iter().zip(now.logits()).map(|(a, b)| a + b).collect()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let batch: Vec<Sample> = (0..8)
            .map(|_| {
                let sequence = old.sample(&mut rng);
                Sample {
                    old_logp: old.logp(&sequence).unwrap(),
                    reward: env.score(&sequence) + 0.1 * sequence[1] as f64,
                    sequence,
                }
            })
            .collect();
        let rewards: Vec<f64> = batch.iter().map(|s| s.reward).collect();
        let adv = advantages(&rewards, false);
        let grad = surrogate_gradient(&now, &batch, &adv, 0.2).unwrap();
        for k in 0..48 {
            let shifted = |d: f64| {
                let mut l = now.logits().to_vec();
                l[k] += d;
                surrogate_objective(&ToyPolicy::from_logits(6, 8, l).unwrap(), &batch, &adv, 0.2).unwrap()
            };
            let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
            let tol = 1e-5 * grad[k].abs().max(1e-3);
            assert!((fd - grad[k]).abs() < tol, "seed {seed} logit {k}: analytic {} vs numeric {fd}", grad[k]);
            checked += 1;
        }
    }
    assert_eq!(checked, 40 * 48);
}

fn run(env: &ToyFormatEnv, controller: &mut KlController, config: &TrainConfig, warm: bool) -> (PolicyPair, formatkit::reff::TrainSummary) {
    let mut pair = PolicyPair::new(ToyPolicy::uniform(6, 8).unwrap());
    let log = train(env, &mut pair, controller, config, QuerySource::Tst, warm).unwrap();
    (pair, log.summary.unwrap())
}

#[test]
fn training_never_moves_the_reference() {
    let env = small_env();
    let mut c = KlController::new(0.05, 6.0, 1000.0).unwrap();
    let (pair, summary) = run(&env, &mut c, &TrainConfig::new(1), false);
    assert_eq!(pair.reference(), &ToyPolicy::uniform(6, 8).unwrap());
    assert_ne!(pair.adapted(), pair.reference());
    assert!(summary.final_ffr > summary.baseline_ffr);
}

#[test]
fn zero_epochs_leave_the_baseline() {
    let env = small_env();
    let config = TrainConfig { epochs: 0, ..TrainConfig::new(4) };
    let mut c = KlController::new(0.05, 6.0, 1000.0).unwrap();
    let (_, summary) = run(&env, &mut c, &config, false);
    assert_eq!(summary.batches, 0);
    assert_eq!(summary.final_ffr, summary.baseline_ffr);
    assert!((summary.baseline_ffr - 1295.0 / 262_144.0).abs() < 1e-12);
    assert_eq!(summary.final_kl, 0.0);
    assert_eq!(summary.final_beta, 0.05);
}

#[test]
fn warm_start_alone_raises_ffr() {
    let env = small_env();
    let config = TrainConfig { epochs: 0, ..TrainConfig::new(4) };
    let mut c = KlController::new(0.05, 6.0, 1000.0).unwrap();
    let (_, summary) = run(&env, &mut c, &config, true);
    assert!(summary.final_ffr > 10.0 * summary.baseline_ffr, "{summary:?}");
}

#[test]
fn a_heavy_fixed_penalty_keeps_the_policy_closer() {
    let env = small_env();
    let config = TrainConfig::new(2);
    let mut adaptive = KlController::new(0.05, 6.0, 1000.0).unwrap();
    let mut heavy = KlController::fixed(10.0).unwrap();
    let (_, a) = run(&env, &mut adaptive, &config, false);
    let (_, h) = run(&env, &mut heavy, &config, false);
    assert!(h.final_kl < a.final_kl, "beta=10 KL {} vs adaptive KL {}", h.final_kl, a.final_kl);
    assert_eq!(h.final_beta, 10.0);
}

#[test]
fn runs_are_reproducible_per_seed() {
    let env = small_env();
    let config = TrainConfig { epochs: 1, ..TrainConfig::new(9) };
    let once = || {
        let mut c = KlController::new(0.05, 6.0, 1000.0).unwrap();
        let mut pair = PolicyPair::new(ToyPolicy::uniform(6, 8).unwrap());
        train(&env, &mut pair, &mut c, &config, QuerySource::Tst, false).unwrap()
    };
    assert_eq!(once(), once());
}
