mod common;

use auvrl::approx::{Activation, Mlp};
use auvrl::pg::{
    clipped_surrogate, compute_gae, normalized, ppo_loss, ppo_ratio, reinforce_gradient, rewards_to_go,
    value_network, GaussianPolicy, PgStep, PpoConfig, RolloutBatch,
};
use common::{central_diff, random_vec, relative_error, FD_STEP};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_policy(rng: &mut ChaCha8Rng) -> GaussianPolicy {
    let obs = rng.random_range(1..=5);
    let actions = rng.random_range(1..=3);
    let hidden: Vec<usize> = (0..rng.random_range(0..=2)).map(|_| rng.random_range(2..=8)).collect();
    let limits: Vec<f64> = (0..actions).map(|_| rng.random_range(0.5..5.0)).collect();
    let mut p = GaussianPolicy::init(obs, &hidden, &limits, 0.0, rng.random()).unwrap();
    let n = p.num_params();
    p.set_params(&random_vec(rng, n, 0.8)).unwrap();
    p
}

fn random_steps(rng: &mut ChaCha8Rng, policy: &GaussianPolicy, len: usize) -> Vec<PgStep> {
    let obs = policy.mean_net().input_width();
    (0..len)
        .map(|_| {
            let s = random_vec(rng, obs, 1.5);
            let z = policy.sample(&s, rng).unwrap();
            PgStep { s, z, r: rng.random_range(-1.0..1.0) }
        })
        .collect()
}

#[test]
fn log_prob_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let policy = random_policy(&mut rng);
        let step = random_steps(&mut rng, &policy, 1).remove(0);
        let (_, g) = policy.log_prob_gradient(&step.s, &step.z).unwrap();
        let mut probe = policy.clone();
        let fd = central_diff(&policy.params(), FD_STEP, |p| {
            probe.set_params(p).unwrap();
            probe.log_prob(&step.s, &step.z).unwrap()
        });
        worst = worst.max(relative_error(&g, &fd));
    }
    assert!(worst <= 1e-4, "worst relative error {worst:e}");
}

#[test]
fn reinforce_gradient_differentiates_the_score_surrogate() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let gamma = 0.95;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let policy = random_policy(&mut rng);
        let trajectories: Vec<Vec<PgStep>> = (0..rng.random_range(1..=3))
            .map(|_| {
                let len = rng.random_range(1..=6);
                random_steps(&mut rng, &policy, len)
            })
            .collect();
        let g = reinforce_gradient(&policy, &trajectories, gamma).unwrap();

        // mean over steps of log π_θ(z|s)·G with the returns held fixed
        let total: usize = trajectories.iter().map(Vec::len).sum();
        let mut probe = policy.clone();
        let fd = central_diff(&policy.params(), FD_STEP, |p| {
            probe.set_params(p).unwrap();
            let mut sum = 0.0;
            for traj in &trajectories {
                let rewards: Vec<f64> = traj.iter().map(|s| s.r).collect();
                for (step, ret) in traj.iter().zip(rewards_to_go(&rewards, gamma)) {
                    sum += probe.log_prob(&step.s, &step.z).unwrap() * ret;
                }
            }
            sum / total as f64
        });
        worst = worst.max(relative_error(&g, &fd));
    }
    assert!(worst <= 1e-3, "worst relative error {worst:e}");
}

#[test]
fn gae_matches_the_explicit_double_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let (gamma, lambda) = (0.97, 0.9);
    for _ in 0..50 {
        let n = 20;
        let rewards = random_vec(&mut rng, n, 2.0);
        let values = random_vec(&mut rng, n, 3.0);
        let ends: Vec<bool> = (0..n).map(|t| t + 1 == n || rng.random_bool(0.15)).collect();
        let next_values: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(-3.0..3.0) })
            .collect();
        let (adv, targets) = compute_gae(&rewards, &values, &next_values, &ends, gamma, lambda).unwrap();

        for t in 0..n {
            let mut expected = 0.0;
            let mut weight = 1.0;
            for k in t..n {
                expected += weight * (rewards[k] + gamma * next_values[k] - values[k]);
                if ends[k] {
                    break;
                }
                weight *= gamma * lambda;
            }
            assert!((adv[t] - expected).abs() <= 1e-10, "t={t}: {} vs {expected}", adv[t]);
            assert!((targets[t] - adv[t] - values[t]).abs() <= 1e-12);
        }
    }
}

#[test]
fn ratio_matches_the_closed_form_for_unit_gaussians() {
    // μ_old = 0, μ = b, σ = 1: ratio = exp(b·z − b²/2)
    let mut old_mean = Mlp::zeros(&[1, 1], &[Activation::Linear]).unwrap();
    old_mean.set_params(&[0.0, 0.0]).unwrap();
    let old = GaussianPolicy::new(old_mean, vec![0.0], vec![1.0]).unwrap();
    for (b, z) in [(0.3, 0.5), (-1.2, 0.1), (0.8, -2.0), (2.0, 1.5)] {
        let mut mean = Mlp::zeros(&[1, 1], &[Activation::Linear]).unwrap();
        mean.set_params(&[0.0, b]).unwrap();
        let new = GaussianPolicy::new(mean, vec![0.0], vec![1.0]).unwrap();
        let old_lp = old.log_prob(&[0.4], &[z]).unwrap();
        let ratio = ppo_ratio(&new, old_lp, &[0.4], &[z]).unwrap();
        let expected = (b * z - 0.5 * b * b).exp();
        assert!((ratio - expected).abs() <= 1e-12 * expected, "{ratio} vs {expected}");
    }
}

#[test]
fn ratio_is_exactly_one_at_the_old_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..100 {
        let policy = random_policy(&mut rng);
        let step = random_steps(&mut rng, &policy, 1).remove(0);
        let old_lp = policy.log_prob(&step.s, &step.z).unwrap();
        assert_eq!(ppo_ratio(&policy, old_lp, &step.s, &step.z).unwrap(), 1.0);
    }
}

fn batch_at_old_parameters(rng: &mut ChaCha8Rng, policy: &GaussianPolicy, n: usize) -> RolloutBatch {
    let steps = random_steps(rng, policy, n);
    RolloutBatch {
        old_log_probs: steps.iter().map(|s| policy.log_prob(&s.s, &s.z).unwrap()).collect(),
        advantages: random_vec(rng, n, 2.0),
        value_targets: random_vec(rng, n, 2.0),
        obs: steps.iter().map(|s| s.s.clone()).collect(),
        z: steps.iter().map(|s| s.z.clone()).collect(),
        ..RolloutBatch::default()
    }
}

#[test]
fn clipped_gradient_equals_surrogate_gradient_at_old_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let cfg = PpoConfig { entropy_coef: 0.0, ..PpoConfig::default() };
    for _ in 0..100 {
        let policy = random_policy(&mut rng);
        let n = rng.random_range(1..=16);
        let batch = batch_at_old_parameters(&mut rng, &policy, n);
        let value = value_network(policy.mean_net().input_width(), &[4], 0).unwrap();
        let idx: Vec<usize> = (0..n).collect();
        let mut gp = vec![0.0; policy.num_params()];
        let mut gv = vec![0.0; value.num_params()];
        ppo_loss(&policy, &value, &batch, &idx, &cfg, Some((&mut gp, &mut gv))).unwrap();

        // ∇ mean(w·Â) at w = 1 is mean(Â·∇log π)
        let mut plain = vec![0.0; policy.num_params()];
        for i in 0..n {
            let (_, g) = policy.log_prob_gradient(&batch.obs[i], &batch.z[i]).unwrap();
            for (p, gi) in plain.iter_mut().zip(g) {
                *p += batch.advantages[i] * gi / n as f64;
            }
        }
        let neg: Vec<f64> = gp.iter().map(|g| -g).collect();
        let err = relative_error(&neg, &plain);
        assert!(err <= 1e-12, "relative error {err:e}");
    }
}

#[test]
fn entropy_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let mut policy = GaussianPolicy::init(3, &[8], &[2.0, 5.0], 0.0, 1).unwrap();
    let mut params = policy.params();
    let n = params.len();
    params[n - 2] = 0.4;
    params[n - 1] = -0.7;
    policy.set_params(&params).unwrap();
    let s = [0.2, -0.5, 1.0];
    let samples = 1_000_000;
    let mut sum = 0.0;
    for _ in 0..samples {
        let z = policy.sample(&s, &mut rng).unwrap();
        sum -= policy.log_prob(&s, &z).unwrap();
    }
    let mc = sum / samples as f64;
    let exact = policy.entropy();
    assert!((mc - exact).abs() <= 0.01 * exact.abs(), "MC {mc} vs closed form {exact}");
}

proptest! {
    #[test]
    fn clipped_objective_never_exceeds_the_plain_surrogate(
        ratio in 0.0f64..5.0, adv in 1e-6f64..10.0, eps in 0.01f64..0.5,
    ) {
        let (clipped, _) = clipped_surrogate(ratio, adv, eps);
        prop_assert!(clipped <= ratio * adv);
    }

    #[test]
    fn normalization_keeps_the_best_sample(values in prop::collection::vec(-50.0f64..50.0, 2..40)) {
        let spread = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - values.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-6);
        let argmax = |x: &[f64]| {
            x.iter().enumerate().fold(0, |best, (i, v)| if *v > x[best] { i } else { best })
        };
        prop_assert_eq!(argmax(&normalized(&values)), argmax(&values));
    }
}

#[test]
fn ratio_stays_finite_far_in_the_tails() {
    let unit = |b: f64| {
        let mut mean = Mlp::zeros(&[1, 1], &[Activation::Linear]).unwrap();
        mean.set_params(&[0.0, b]).unwrap();
        GaussianPolicy::new(mean, vec![0.0], vec![1.0]).unwrap()
    };
    let (old, new) = (unit(0.0), unit(0.5));
    let z = [50.0];
    let ratio = ppo_ratio(&new, old.log_prob(&[0.0], &z).unwrap(), &[0.0], &z).unwrap();
    assert!(ratio.is_finite() && ratio > 0.0, "{ratio}");
    assert!((ratio.ln() - (0.5 * 50.0 - 0.125)).abs() < 1e-9);
}

#[test]
fn clip_term_is_the_mean_advantage_at_unit_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    let policy = random_policy(&mut rng);
    let batch = batch_at_old_parameters(&mut rng, &policy, 12);
    let value = value_network(policy.mean_net().input_width(), &[4], 0).unwrap();
    let idx: Vec<usize> = (0..12).collect();
    let loss = ppo_loss(&policy, &value, &batch, &idx, &PpoConfig::default(), None).unwrap();
    let mean = batch.advantages.iter().sum::<f64>() / 12.0;
    assert!((loss.clip - mean).abs() <= 1e-12, "{} vs {mean}", loss.clip);
}
