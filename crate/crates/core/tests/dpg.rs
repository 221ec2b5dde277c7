mod common;

use auvrl::dpg::{train_dpg, DpgAgent, DpgConfig, PrioritizedBuffer, Transition};
use auvrl::env::{ContinuousEnv, Step};
use auvrl::rng::{SeedStreams, SimRng};
use common::{central_diff, random_vec, relative_error, FD_STEP};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_transition<R: Rng>(rng: &mut R, obs: usize, limits: &[f64]) -> Transition {
    Transition {
        s: random_vec(rng, obs, 1.5),
        u: limits.iter().map(|l| rng.random_range(-l..*l)).collect(),
        r: rng.random_range(-2.0..0.0),
        s_next: random_vec(rng, obs, 1.5),
        done: rng.random_bool(0.2),
    }
}

fn small_agent(seed: u64) -> DpgAgent {
    let cfg = DpgConfig {
        actor_hidden: vec![6],
        critic_hidden: vec![8, 5],
        ..DpgConfig::default()
    };
    DpgAgent::new(3, &[40.0, 40.0], cfg, seed).unwrap()
}

/// Perturbs every network (online and target) so that they no longer coincide.
fn scramble(agent: &mut DpgAgent, rng: &mut ChaCha8Rng) {
    let n = agent.actor().num_params();
    agent.actor_mut().set_params(&random_vec(rng, n, 0.8)).unwrap();
    let n = agent.critic().num_params();
    agent.critic_mut().set_params(&random_vec(rng, n, 0.8)).unwrap();
    agent.soft_update();
}

#[test]
fn two_priorities_are_drawn_in_proportion() {
    let mut buf = PrioritizedBuffer::new(8, 1.0, 1e-3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = buf.push(random_transition(&mut rng, 1, &[1.0]));
    let b = buf.push(random_transition(&mut rng, 1, &[1.0]));
    buf.update_priorities(&[a, b], &[1.0, 3.0]).unwrap();
    let mut sampler = SeedStreams::new(1).stream("sampling");
    let draws = 100_000;
    let hits = (0..draws)
        .filter(|_| buf.sample(1, 0.4, &mut sampler).unwrap().indices[0] == b)
        .count();
    let freq = hits as f64 / draws as f64;
    assert!((freq - 0.75).abs() <= 0.02, "frequency {freq}");
}

#[test]
fn sum_tree_root_tracks_leaves_through_mixed_operations() {
    let (capacity, alpha, floor) = (1000, 0.6, 1e-3);
    let mut buf = PrioritizedBuffer::new(capacity, alpha, floor).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut sampler = SeedStreams::new(2).stream("sampling");
    let mut shadow = vec![0.0f64; capacity];
    for _ in 0..100_000 {
        match rng.random_range(0..3) {
            0 => {
                let max = buf.max_priority();
                let slot = buf.push(random_transition(&mut rng, 2, &[1.0]));
                shadow[slot] = max.powf(alpha);
            }
            1 if !buf.is_empty() => {
                let slots: Vec<usize> = (0..4).map(|_| rng.random_range(0..buf.len())).collect();
                let prios: Vec<f64> = (0..4).map(|_| rng.random_range(0.0..50.0)).collect();
                buf.update_priorities(&slots, &prios).unwrap();
                for (s, p) in slots.iter().zip(&prios) {
                    shadow[*s] = p.max(floor).powf(alpha);
                }
            }
            _ if buf.len() >= 8 => {
                buf.sample(8, 0.5, &mut sampler).unwrap();
            }
            _ => {}
        }
    }
    let leaves: f64 = shadow.iter().sum();
    let root = buf.tree().total();
    assert!((root - leaves).abs() <= 1e-6 * leaves, "root {root}, leaves {leaves}");
    assert!((root - buf.tree().leaf_sum()).abs() <= 1e-6 * leaves);
}

proptest! {
    #[test]
    fn eviction_is_first_in_first_out(capacity in 1usize..20, extra in 0usize..30) {
        let mut buf = PrioritizedBuffer::new(capacity, 0.6, 1e-3).unwrap();
        for i in 0..capacity + extra {
            buf.push(Transition { s: vec![i as f64], u: vec![0.0], r: 0.0, s_next: vec![0.0], done: false });
        }
        let mut kept: Vec<usize> = (0..buf.len()).map(|k| buf.get(k).unwrap().s[0] as usize).collect();
        kept.sort_unstable();
        prop_assert_eq!(kept, (extra..capacity + extra).collect::<Vec<_>>());
    }

    #[test]
    fn acting_ignores_the_critic(seed in any::<u64>(), s in prop::collection::vec(-2.0f64..2.0, 3)) {
        let mut agent = small_agent(seed);
        let before = agent.act(&s, true, &mut SimRng::seed_from_u64(seed)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let n = agent.critic().num_params();
        agent.critic_mut().set_params(&random_vec(&mut rng, n, 3.0)).unwrap();
        let after = agent.act(&s, true, &mut SimRng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(before, after);
    }
}

#[test]
fn batch_priorities_match_scalar_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agent = small_agent(3);
    scramble(&mut agent, &mut rng);
    let limits = agent.limits().to_vec();
    let batch: Vec<Transition> = (0..32).map(|_| random_transition(&mut rng, 3, &limits)).collect();
    let (_, _, td) = agent.critic_gradient(&batch, &[1.0; 32]).unwrap();
    let floor = agent.cfg.priority_floor;
    for (t, d) in batch.iter().zip(&td) {
        // y = r + γ Q'(s', μ'(s')), Q(s, u) with actions scaled by their limits
        let a_next = agent.actor_target().forward(&t.s_next).unwrap();
        let bootstrap = if t.done {
            0.0
        } else {
            agent.critic_target().forward(&[t.s_next.clone(), a_next].concat()).unwrap()[0]
        };
        let y = t.r + agent.cfg.gamma * bootstrap;
        let scaled: Vec<f64> = t.u.iter().zip(&limits).map(|(u, l)| u / l).collect();
        let q = agent.critic().forward(&[t.s.clone(), scaled].concat()).unwrap()[0];
        let expected = (y - q).abs().max(floor);
        assert!((d.max(floor) - expected).abs() <= 1e-10);
        assert!((agent.priority(t).unwrap() - expected).abs() <= 1e-10);
    }
}

#[test]
fn repeated_critic_updates_descend_on_a_fixed_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut agent = small_agent(4);
    agent.cfg.critic_lr = 1e-4;
    let mut agent = DpgAgent::from_checkpoint(&agent.to_checkpoint()).unwrap();
    scramble(&mut agent, &mut rng);
    let limits = agent.limits().to_vec();
    let batch: Vec<Transition> = (0..16).map(|_| random_transition(&mut rng, 3, &limits)).collect();
    let weights: Vec<f64> = (0..16).map(|_| rng.random_range(0.2..1.0)).collect();
    let mut last = agent.critic_gradient(&batch, &weights).unwrap().1;
    for step in 0..20 {
        agent.critic_update(&batch, &weights).unwrap();
        let loss = agent.critic_gradient(&batch, &weights).unwrap().1;
        assert!(loss < last, "loss rose at step {step}: {last} -> {loss}");
        last = loss;
    }
}

#[test]
fn zero_importance_weights_give_zero_critic_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut agent = small_agent(5);
    scramble(&mut agent, &mut rng);
    let batch: Vec<Transition> = (0..8).map(|_| random_transition(&mut rng, 3, &[40.0, 40.0])).collect();
    let (grad, loss, _) = agent.critic_gradient(&batch, &[0.0; 8]).unwrap();
    assert!(grad.iter().all(|g| *g == 0.0));
    assert_eq!(loss, 0.0);
}

#[test]
fn actor_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let mut agent = small_agent(100 + i);
        scramble(&mut agent, &mut rng);
        let states: Vec<Vec<f64>> = (0..4).map(|_| random_vec(&mut rng, 3, 1.5)).collect();
        let refs: Vec<&[f64]> = states.iter().map(Vec::as_slice).collect();
        let analytic = agent.actor_gradient(&refs).unwrap();
        let theta = agent.actor().params().to_vec();
        let mut probe = agent.clone();
        let fd = central_diff(&theta, FD_STEP, |p| {
            probe.actor_mut().set_params(p).unwrap();
            states
                .iter()
                .map(|s| probe.q_value(s, &probe.policy(s).unwrap()).unwrap())
                .sum::<f64>()
                / states.len() as f64
        });
        worst = worst.max(relative_error(&analytic, &fd));
    }
    assert!(worst <= 1e-3, "worst relative error {worst:e}");
}

/// Discrete-time double integrator `p' = p + hv + h²u/2`, `v' = v + hu` with a
/// quadratic cost. The optimal law is linear, `u = −K·[p, v]`.
#[derive(Clone)]
struct DoubleIntegrator {
    state: [f64; 2],
    steps: usize,
}

const H: f64 = 0.5;
const GAMMA: f64 = 0.9;
const COST: [f64; 3] = [1.0, 0.1, 0.1];
const U_MAX: f64 = 5.0;
const HORIZON: usize = 30;
/// Episodes are cut (not terminated) once the state leaves this box.
const BOUND: f64 = 3.0;

fn integrator_next(s: [f64; 2], u: f64) -> [f64; 2] {
    [s[0] + H * s[1] + 0.5 * H * H * u, s[1] + H * u]
}

fn integrator_reward(s: [f64; 2], u: f64) -> f64 {
    -(COST[0] * s[0] * s[0] + COST[1] * s[1] * s[1] + COST[2] * u * u)
}

impl ContinuousEnv for DoubleIntegrator {
    fn observation_width(&self) -> usize {
        2
    }
    fn action_limits(&self) -> Vec<f64> {
        vec![U_MAX]
    }
    fn reset(&mut self, rng: &mut SimRng) -> Vec<f64> {
        self.state = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        self.steps = 0;
        self.state.to_vec()
    }
    fn step(&mut self, action: &[f64]) -> auvrl::Result<Step> {
        let u = action[0].clamp(-U_MAX, U_MAX);
        let reward = integrator_reward(self.state, u);
        self.state = integrator_next(self.state, u);
        self.steps += 1;
        Ok(Step {
            obs: self.state.to_vec(),
            reward,
            done: self.steps >= HORIZON || self.state[0].abs() > BOUND || self.state[1].abs() > BOUND,
            terminal: false,
        })
    }
    fn max_steps(&self) -> usize {
        HORIZON
    }
    fn tracking_error(&self) -> f64 {
        self.state[0].abs()
    }
    fn trajectory_header(&self) -> &'static [&'static str] {
        &["p", "v"]
    }
    fn trajectory_row(&self) -> Vec<f64> {
        self.state.to_vec()
    }
}

/// Value iteration on a dense state grid with bilinear interpolation, then the
/// linear gain fitted to the greedy action near the origin.
fn grid_value_iteration_gain() -> [f64; 2] {
    let (n, span) = (121usize, 3.0);
    let cell = 2.0 * span / (n - 1) as f64;
    let actions: Vec<f64> = (0..=200).map(|i| -U_MAX + 2.0 * U_MAX * i as f64 / 200.0).collect();
    let interp = |v: &[f64], s: [f64; 2]| -> f64 {
        let fx = ((s[0] + span) / cell).clamp(0.0, (n - 1) as f64 - 1e-9);
        let fy = ((s[1] + span) / cell).clamp(0.0, (n - 1) as f64 - 1e-9);
        let (i, j) = (fx.floor() as usize, fy.floor() as usize);
        let (a, b) = (fx - i as f64, fy - j as f64);
        let at = |i: usize, j: usize| v[i * n + j];
        (1.0 - a) * (1.0 - b) * at(i, j)
            + a * (1.0 - b) * at(i + 1, j)
            + (1.0 - a) * b * at(i, j + 1)
            + a * b * at(i + 1, j + 1)
    };
    let point = |i: usize, j: usize| [-span + i as f64 * cell, -span + j as f64 * cell];
    let mut v = vec![0.0; n * n];
    for _ in 0..400 {
        let next: Vec<f64> = (0..n * n)
            .map(|k| {
                let s = point(k / n, k % n);
                actions
                    .iter()
                    .map(|&u| integrator_reward(s, u) + GAMMA * interp(&v, integrator_next(s, u)))
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let change = next.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        v = next;
        if change < 1e-9 {
            break;
        }
    }
    let fine: Vec<f64> = (0..=2000).map(|i| -U_MAX + 2.0 * U_MAX * i as f64 / 2000.0).collect();
    let samples: Vec<([f64; 2], f64)> = (-3..=3)
        .flat_map(|i| (-3..=3).map(move |j| [0.25 * i as f64, 0.25 * j as f64]))
        .map(|s| {
            let u = fine
                .iter()
                .copied()
                .max_by(|a, b| {
                    let qa = integrator_reward(s, *a) + GAMMA * interp(&v, integrator_next(s, *a));
                    let qb = integrator_reward(s, *b) + GAMMA * interp(&v, integrator_next(s, *b));
                    qa.total_cmp(&qb)
                })
                .unwrap();
            (s, u)
        })
        .collect();
    fit_gain(&samples)
}

/// Least-squares `K` in `u ≈ −K·s`.
fn fit_gain(samples: &[([f64; 2], f64)]) -> [f64; 2] {
    let (mut a, mut b) = ([[0.0; 2]; 2], [0.0; 2]);
    for (s, u) in samples {
        for i in 0..2 {
            b[i] -= s[i] * u;
            for j in 0..2 {
                a[i][j] += s[i] * s[j];
            }
        }
    }
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    [
        (a[1][1] * b[0] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ]
}

/// Discounted Riccati recursion for the same problem.
fn riccati_gain() -> [f64; 2] {
    let b = [0.5 * H * H, H];
    let mut p = [[0.0f64; 2]; 2];
    let mut k = [0.0; 2];
    for _ in 0..10_000 {
        let pb = [p[0][0] * b[0] + p[0][1] * b[1], p[1][0] * b[0] + p[1][1] * b[1]];
        let bpb = b[0] * pb[0] + b[1] * pb[1];
        // bᵀPA with A = [[1, h], [0, 1]]
        let bpa = [pb[0], H * pb[0] + pb[1]];
        let denom = COST[2] + GAMMA * bpb;
        k = [GAMMA * bpa[0] / denom, GAMMA * bpa[1] / denom];
        let apa = [
            [p[0][0], H * p[0][0] + p[0][1]],
            [H * p[0][0] + p[1][0], H * H * p[0][0] + H * (p[0][1] + p[1][0]) + p[1][1]],
        ];
        let q = [[COST[0], 0.0], [0.0, COST[1]]];
        for i in 0..2 {
            for j in 0..2 {
                p[i][j] = q[i][j] + GAMMA * (apa[i][j] - bpa[i] * k[j]);
            }
        }
    }
    k
}

fn gain_error(k: [f64; 2], reference: [f64; 2]) -> f64 {
    let diff = ((k[0] - reference[0]).powi(2) + (k[1] - reference[1]).powi(2)).sqrt();
    diff / (reference[0].powi(2) + reference[1].powi(2)).sqrt()
}

#[test]
fn grid_oracle_agrees_with_riccati() {
    let (grid, exact) = (grid_value_iteration_gain(), riccati_gain());
    assert!(gain_error(grid, exact) < 0.05, "grid {grid:?}, riccati {exact:?}");
}

#[test]
fn dpg_learns_the_double_integrator_gain() {
    let oracle = grid_value_iteration_gain();
    let cfg = DpgConfig {
        gamma: GAMMA,
        actor_hidden: vec![32, 32],
        critic_hidden: vec![64, 64],
        episodes: 500,
        warmup_steps: 500,
        reward_scale: 0.1,
        ..DpgConfig::default()
    };
    let mut env = DoubleIntegrator {
        state: [0.0; 2],
        steps: 0,
    };
    let run = train_dpg(&mut env, &cfg, &SeedStreams::new(0), &[]).unwrap();
    let samples: Vec<([f64; 2], f64)> = (-3..=3)
        .flat_map(|i| (-3..=3).map(move |j| [0.25 * i as f64, 0.25 * j as f64]))
        .map(|s| (s, run.agent.policy(&s).unwrap()[0]))
        .collect();
    let learned = fit_gain(&samples);
    let err = gain_error(learned, oracle);
    assert!(err <= 0.15, "learned {learned:?}, oracle {oracle:?}, relative error {err}");
}
