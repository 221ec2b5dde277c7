//! Value-based reinforcement learning on finite MDPs.
//!
//! One-step temporal-difference control (SARSA and Q-learning), first-visit Monte Carlo
//! evaluation, ε-greedy exploration and value iteration. Value iteration is also the
//! reference solver the learned tables are checked against.

use std::collections::HashSet;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Dense |S|×|A| action-value table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self::filled(n_states, n_actions, 0.0)
    }

    pub fn filled(n_states: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![value; n_states * n_actions],
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_value(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action; ties go to the lowest index.
    pub fn greedy_action(&self, s: usize) -> usize {
        self.greedy_action_within(s, 0.0)
    }

    /// Lowest-index action whose value is within `tolerance` of the row maximum.
    pub fn greedy_action_within(&self, s: usize, tolerance: f64) -> usize {
        let best = self.max_value(s);
        self.row(s)
            .iter()
            .position(|v| *v >= best - tolerance)
            .unwrap_or(0)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["state", "action", "value"])?;
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                w.write_record([s.to_string(), a.to_string(), self.get(s, a).to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io("<q-table>", e))?;
        Ok(())
    }
}

/// A finite MDP with dense transition tensor `p(s′|s,a)` and expected rewards `r(s,a)`.
///
/// Terminal states end episodes; they are treated as absorbing with zero value.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
    terminal: Vec<bool>,
    start: Vec<f64>,
    gamma: f64,
}

impl FiniteMdp {
    /// All-zero MDP with state 0 as the start; fill with the setters and `validate`.
    pub fn zeros(n_states: usize, n_actions: usize, gamma: f64) -> Self {
        let mut start = vec![0.0; n_states];
        if n_states > 0 {
            start[0] = 1.0;
        }
        Self {
            n_states,
            n_actions,
            transitions: vec![0.0; n_states * n_actions * n_states],
            rewards: vec![0.0; n_states * n_actions],
            terminal: vec![false; n_states],
            start,
            gamma,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn set_transition(&mut self, s: usize, a: usize, next: usize, p: f64) {
        self.transitions[(s * self.n_actions + a) * self.n_states + next] = p;
    }

    pub fn transition(&self, s: usize, a: usize, next: usize) -> f64 {
        self.transitions[(s * self.n_actions + a) * self.n_states + next]
    }

    fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let i = (s * self.n_actions + a) * self.n_states;
        &self.transitions[i..i + self.n_states]
    }

    pub fn set_reward(&mut self, s: usize, a: usize, r: f64) {
        self.rewards[s * self.n_actions + a] = r;
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn set_terminal(&mut self, s: usize, terminal: bool) {
        self.terminal[s] = terminal;
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn set_start_state(&mut self, s: usize) {
        self.start.iter_mut().for_each(|p| *p = 0.0);
        self.start[s] = 1.0;
    }

    pub fn set_start_distribution(&mut self, start: Vec<f64>) {
        self.start = start;
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::domain(format!("discount must lie in (0, 1], got {}", self.gamma)));
        }
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.transition_row(s, a);
                if row.iter().any(|p| !(*p >= 0.0)) {
                    return Err(Error::domain(format!("negative probability at ({s}, {a})")));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::domain(format!(
                        "p(.|{s},{a}) sums to {total}, expected 1"
                    )));
                }
                if !self.reward(s, a).is_finite() {
                    return Err(Error::domain(format!("non-finite reward at ({s}, {a})")));
                }
            }
        }
        let total: f64 = self.start.iter().sum();
        if self.start.len() != self.n_states || (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain("start distribution must sum to 1"));
        }
        Ok(())
    }

    fn sample_categorical(weights: &[f64], rng: &mut SimRng) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        // rounding left a sliver of mass: take the last state with support
        weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }

    pub fn sample_start(&self, rng: &mut SimRng) -> usize {
        Self::sample_categorical(&self.start, rng)
    }

    pub fn sample_next(&self, s: usize, a: usize, rng: &mut SimRng) -> usize {
        Self::sample_categorical(self.transition_row(s, a), rng)
    }

    /// One-step lookahead `r(s,a) + γ Σ p(s′|s,a) V(s′)`.
    pub fn backup(&self, values: &[f64], s: usize, a: usize) -> f64 {
        let expected: f64 = self
            .transition_row(s, a)
            .iter()
            .zip(values)
            .map(|(p, v)| p * v)
            .sum();
        self.reward(s, a) + self.gamma * expected
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TdRule {
    Sarsa,
    QLearning,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TabularTransition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    /// No bootstrap past terminal states.
    pub terminal: bool,
}

/// One-step TD update `Q(s,a) ← Q(s,a) + α(Y − Q(s,a))`. Returns the TD error.
///
/// The target is `r + γQ(s′,a′)` for SARSA and `r + γ max_a Q(s′,a)` for Q-learning.
pub fn td_update(
    table: &mut QTable,
    t: &TabularTransition,
    alpha: f64,
    gamma: f64,
    rule: TdRule,
    next_action: Option<usize>,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::domain(format!("learning rate must lie in [0, 1], got {alpha}")));
    }
    let bootstrap = match rule {
        TdRule::Sarsa => {
            let a = next_action
                .ok_or_else(|| Error::domain("SARSA update needs the next action"))?;
            table.get(t.next_state, a)
        }
        TdRule::QLearning => table.max_value(t.next_state),
    };
    let target = if t.terminal {
        t.reward
    } else {
        t.reward + gamma * bootstrap
    };
    let q = table.get(t.state, t.action);
    let delta = target - q;
    table.set(t.state, t.action, q + alpha * delta);
    Ok(delta)
}

/// Greedy with probability `1 − ε`, uniform over actions otherwise.
pub fn epsilon_greedy(table: &QTable, state: usize, epsilon: f64, rng: &mut SimRng) -> usize {
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..table.n_actions())
    } else {
        table.greedy_action(state)
    }
}

/// First-visit Monte Carlo state values from `(state, reward)` episodes.
///
/// Each reward is the one received after acting in the paired state. States never
/// visited map to `None`.
pub fn mc_evaluate(
    episodes: &[Vec<(usize, f64)>],
    gamma: f64,
    n_states: usize,
) -> Result<Vec<Option<f64>>> {
    if episodes.is_empty() {
        return Err(Error::domain("Monte Carlo evaluation needs at least one episode"));
    }
    let mut sums = vec![0.0; n_states];
    let mut counts = vec![0usize; n_states];
    let mut returns = Vec::new();
    for ep in episodes {
        returns.clear();
        returns.resize(ep.len(), 0.0);
        let mut g = 0.0;
        for (i, (_, r)) in ep.iter().enumerate().rev() {
            g = r + gamma * g;
            returns[i] = g;
        }
        let mut seen = HashSet::new();
        for (i, (s, _)) in ep.iter().enumerate() {
            if *s >= n_states {
                return Err(Error::domain(format!("state {s} out of range {n_states}")));
            }
            if seen.insert(*s) {
                sums[*s] += returns[i];
                counts[*s] += 1;
            }
        }
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .map(|(s, c)| (c > 0).then(|| s / c as f64))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueIteration {
    pub values: Vec<f64>,
    pub q: QTable,
    pub policy: Vec<usize>,
    /// Sup-norm Bellman residual of `values`.
    pub residual: f64,
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 1_000_000;

pub fn value_iteration(mdp: &FiniteMdp, tol: f64) -> Result<ValueIteration> {
    value_iteration_from(mdp, tol, vec![0.0; mdp.n_states()])
}

/// Synchronous value iteration from `initial` until the Bellman residual is `≤ tol`.
pub fn value_iteration_from(mdp: &FiniteMdp, tol: f64, initial: Vec<f64>) -> Result<ValueIteration> {
    if !(mdp.gamma() < 1.0) {
        return Err(Error::Unsupported(format!(
            "value iteration needs a discount below 1, got {}",
            mdp.gamma()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be > 0"));
    }
    if initial.len() != mdp.n_states() {
        return Err(Error::domain("initial value vector has the wrong length"));
    }
    mdp.validate()?;
    let apply = |v: &[f64]| -> Vec<f64> {
        (0..mdp.n_states())
            .map(|s| {
                if mdp.is_terminal(s) {
                    0.0
                } else {
                    (0..mdp.n_actions())
                        .map(|a| mdp.backup(v, s, a))
                        .fold(f64::NEG_INFINITY, f64::max)
                }
            })
            .collect()
    };
    let sup = |a: &[f64], b: &[f64]| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));

    let mut values = initial;
    let mut next = apply(&values);
    let mut residual = sup(&next, &values);
    let mut sweeps = 1;
    while residual > tol {
        if sweeps >= MAX_SWEEPS {
            return Err(Error::domain("value iteration did not converge"));
        }
        values = next;
        next = apply(&values);
        residual = sup(&next, &values);
        sweeps += 1;
    }
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let v = if mdp.is_terminal(s) { 0.0 } else { mdp.backup(&values, s, a) };
            q.set(s, a, v);
        }
    }
    let tie = 10.0 * tol;
    let policy = (0..mdp.n_states()).map(|s| q.greedy_action_within(s, tie)).collect();
    Ok(ValueIteration {
        values,
        q,
        policy,
        residual,
        sweeps,
    })
}

/// Schedules and episode limits for tabular TD control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TabularConfig {
    pub rule: TdRule,
    pub episodes: usize,
    pub alpha: f64,
    /// Multiplicative per-episode decay of α, floored at `alpha_min`.
    pub alpha_decay: f64,
    pub alpha_min: f64,
    pub epsilon: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    /// Start each episode from a uniformly drawn candidate state instead of ρ₀.
    pub exploring_starts: bool,
    pub max_steps: usize,
}

impl Default for TabularConfig {
    fn default() -> Self {
        Self {
            rule: TdRule::QLearning,
            episodes: 3000,
            alpha: 1.0,
            alpha_decay: 0.999,
            alpha_min: 0.1,
            epsilon: 1.0,
            epsilon_decay: 0.998,
            epsilon_min: 0.1,
            exploring_starts: true,
            max_steps: 100,
        }
    }
}

impl TabularConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("alpha_min", self.alpha_min),
            ("epsilon", self.epsilon),
            ("epsilon_min", self.epsilon_min),
            ("alpha_decay", self.alpha_decay),
            ("epsilon_decay", self.epsilon_decay),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("tabular.{name}"), "must lie in [0, 1]"));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::config("tabular.max_steps", "must be >= 1"));
        }
        Ok(())
    }

    fn schedule(&self, episode: usize) -> (f64, f64) {
        let k = episode as i32;
        (
            (self.alpha * self.alpha_decay.powi(k)).max(self.alpha_min),
            (self.epsilon * self.epsilon_decay.powi(k)).max(self.epsilon_min),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TabularEpisode {
    pub ret: f64,
    pub steps: usize,
}

/// ε-greedy TD control (SARSA or Q-learning) on a sampled MDP.
///
/// `starts` lists admissible exploring-start states; ignored unless exploring starts
/// are enabled.
pub fn train_td_control(
    mdp: &FiniteMdp,
    cfg: &TabularConfig,
    starts: &[usize],
    rng: &mut SimRng,
) -> Result<(QTable, Vec<TabularEpisode>)> {
    cfg.validate()?;
    mdp.validate()?;
    if cfg.exploring_starts && starts.is_empty() {
        return Err(Error::domain("exploring starts need candidate states"));
    }
    let gamma = mdp.gamma();
    let mut q = QTable::zeros(mdp.n_states(), mdp.n_actions());
    let mut curve = Vec::with_capacity(cfg.episodes);
    for ep in 0..cfg.episodes {
        let (alpha, epsilon) = cfg.schedule(ep);
        let mut s = if cfg.exploring_starts {
            starts[rng.random_range(0..starts.len())]
        } else {
            mdp.sample_start(rng)
        };
        let mut a = epsilon_greedy(&q, s, epsilon, rng);
        let mut ret = 0.0;
        let mut discount = 1.0;
        let mut steps = 0;
        while !mdp.is_terminal(s) && steps < cfg.max_steps {
            let next = mdp.sample_next(s, a, rng);
            let r = mdp.reward(s, a);
            let terminal = mdp.is_terminal(next);
            let next_a = epsilon_greedy(&q, next, epsilon, rng);
            let t = TabularTransition {
                state: s,
                action: a,
                reward: r,
                next_state: next,
                terminal,
            };
            td_update(&mut q, &t, alpha, gamma, cfg.rule, Some(next_a))?;
            ret += discount * r;
            discount *= gamma;
            steps += 1;
            s = next;
            a = next_a;
        }
        curve.push(TabularEpisode { ret, steps });
    }
    Ok((q, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn one_state(gamma: f64) -> FiniteMdp {
        let mut m = FiniteMdp::zeros(1, 1, gamma);
        m.set_transition(0, 0, 0, 1.0);
        m.set_reward(0, 0, 1.0);
        m
    }

    fn t(reward: f64) -> TabularTransition {
        TabularTransition {
            state: 0,
            action: 0,
            reward,
            next_state: 1,
            terminal: false,
        }
    }

    #[test]
    fn td_arithmetic() {
        let mut q = QTable::zeros(2, 2);
        let delta = td_update(&mut q, &t(1.0), 1.0, 0.5, TdRule::QLearning, None).unwrap();
        assert_eq!(q.get(0, 0), 1.0);
        assert_eq!(delta, 1.0);
    }

    #[test]
    fn zero_alpha_is_noop() {
        let mut q = QTable::filled(2, 2, 0.3);
        let before = q.clone();
        td_update(&mut q, &t(5.0), 0.0, 0.9, TdRule::QLearning, None).unwrap();
        assert_eq!(q, before);
    }

    #[test]
    fn sarsa_requires_next_action() {
        let mut q = QTable::zeros(2, 2);
        let err = td_update(&mut q, &t(1.0), 0.5, 0.9, TdRule::Sarsa, None).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        q.set(1, 1, 4.0);
        td_update(&mut q, &t(1.0), 1.0, 0.5, TdRule::Sarsa, Some(1)).unwrap();
        assert_eq!(q.get(0, 0), 3.0);
    }

    #[test]
    fn repeated_updates_reach_geometric_fixed_point() {
        let mut q = QTable::zeros(1, 1);
        let tr = TabularTransition {
            state: 0,
            action: 0,
            reward: 1.0,
            next_state: 0,
            terminal: false,
        };
        for _ in 0..200 {
            td_update(&mut q, &tr, 0.5, 0.5, TdRule::QLearning, None).unwrap();
        }
        assert!((q.get(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_state_value_iteration() {
        let vi = value_iteration(&one_state(0.5), 1e-12).unwrap();
        assert!((vi.values[0] - 2.0).abs() < 1e-11);
        assert!(vi.residual <= 1e-12);
    }

    #[test]
    fn zero_rewards_give_zero_values() {
        let mut m = FiniteMdp::zeros(3, 2, 0.9);
        for s in 0..3 {
            for a in 0..2 {
                m.set_transition(s, a, (s + a) % 3, 1.0);
            }
        }
        let vi = value_iteration(&m, 1e-10).unwrap();
        assert!(vi.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn undiscounted_is_unsupported() {
        let err = value_iteration(&one_state(1.0), 1e-8).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
    }

    #[test]
    fn invalid_transition_rows_are_rejected() {
        let mut m = one_state(0.5);
        m.set_transition(0, 0, 0, 0.9);
        assert!(m.validate().is_err());
    }

    #[test]
    fn epsilon_zero_is_greedy_with_lowest_tie() {
        let mut rng = SimRng::seed_from_u64(1);
        let mut q = QTable::zeros(1, 4);
        assert_eq!(epsilon_greedy(&q, 0, 0.0, &mut rng), 0);
        q.set(0, 2, 1.0);
        q.set(0, 3, 1.0);
        for _ in 0..100 {
            assert_eq!(epsilon_greedy(&q, 0, 0.0, &mut rng), 2);
        }
    }

    #[test]
    fn mc_simple_cases() {
        let v = mc_evaluate(&[vec![(0, 1.0)]], 0.3, 1).unwrap();
        assert_eq!(v[0], Some(1.0));
        let v = mc_evaluate(&[vec![(0, 0.0)], vec![(0, 2.0)]], 0.9, 2).unwrap();
        assert_eq!(v, vec![Some(1.0), None]);
        assert!(mc_evaluate(&[], 0.9, 1).is_err());
    }

    #[test]
    fn mc_counts_first_visit_only() {
        // state 0 visited twice; only the first visit's return counts
        let v = mc_evaluate(&[vec![(0, 1.0), (0, 1.0)]], 1.0, 1).unwrap();
        assert_eq!(v[0], Some(2.0));
    }

    #[test]
    fn q_table_csv() {
        let mut q = QTable::zeros(2, 2);
        q.set(1, 0, -2.5);
        let mut buf = Vec::new();
        q.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "state,action,value\n0,0,0\n0,1,0\n1,0,-2.5\n1,1,0\n");
    }
}
