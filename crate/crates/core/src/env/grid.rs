//! A deterministic way-point grid-world for the tabular methods.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::FiniteMdp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridAction {
    North,
    South,
    East,
    West,
}

impl GridAction {
    pub const ALL: [GridAction; 4] = [
        GridAction::North,
        GridAction::South,
        GridAction::East,
        GridAction::West,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    fn delta(self) -> (i64, i64) {
        match self {
            GridAction::North => (0, -1),
            GridAction::South => (0, 1),
            GridAction::East => (1, 0),
            GridAction::West => (-1, 0),
        }
    }
}

/// Cells are `[column, row]`, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    pub start: [usize; 2],
    pub goal: [usize; 2],
    pub obstacles: Vec<[usize; 2]>,
    /// Reward of every move, including the one that enters the goal.
    pub step_reward: f64,
    /// Bonus added when the goal is entered.
    pub goal_reward: f64,
    pub gamma: f64,
    /// Step cap per episode.
    pub max_steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            width: 5,
            height: 5,
            start: [0, 4],
            goal: [4, 0],
            obstacles: vec![[1, 1], [2, 1], [3, 3], [2, 3]],
            step_reward: -1.0,
            goal_reward: 0.0,
            gamma: 0.9,
            max_steps: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridWorld {
    cfg: GridConfig,
    blocked: Vec<bool>,
}

impl GridWorld {
    pub fn new(cfg: GridConfig) -> Result<Self> {
        if cfg.width == 0 || cfg.height == 0 {
            return Err(Error::config("grid.width", "grid must be non-empty"));
        }
        let inside = |c: &[usize; 2]| c[0] < cfg.width && c[1] < cfg.height;
        if !inside(&cfg.start) {
            return Err(Error::config("grid.start", "outside the grid"));
        }
        if !inside(&cfg.goal) {
            return Err(Error::config("grid.goal", "outside the grid"));
        }
        if let Some(o) = cfg.obstacles.iter().find(|o| !inside(o)) {
            return Err(Error::config("grid.obstacles", format!("{o:?} outside the grid")));
        }
        if cfg.obstacles.contains(&cfg.start) {
            return Err(Error::config("grid.start", "start cell is an obstacle"));
        }
        if cfg.obstacles.contains(&cfg.goal) {
            return Err(Error::config("grid.goal", "goal cell is an obstacle"));
        }
        if !(cfg.gamma > 0.0 && cfg.gamma <= 1.0) {
            return Err(Error::config("grid.gamma", "must lie in (0, 1]"));
        }
        if !cfg.step_reward.is_finite() || !cfg.goal_reward.is_finite() {
            return Err(Error::config("grid.step_reward", "rewards must be finite"));
        }
        let mut blocked = vec![false; cfg.width * cfg.height];
        for o in &cfg.obstacles {
            blocked[o[1] * cfg.width + o[0]] = true;
        }
        let world = Self { cfg, blocked };
        if world.distances_to_goal()[world.start()].is_none() {
            return Err(Error::config("grid.goal", "goal is unreachable from start"));
        }
        Ok(world)
    }

    pub fn config(&self) -> &GridConfig {
        &self.cfg
    }

    pub fn n_cells(&self) -> usize {
        self.cfg.width * self.cfg.height
    }

    pub fn cell_index(&self, c: [usize; 2]) -> usize {
        c[1] * self.cfg.width + c[0]
    }

    pub fn cell_at(&self, index: usize) -> [usize; 2] {
        [index % self.cfg.width, index / self.cfg.width]
    }

    pub fn start(&self) -> usize {
        self.cell_index(self.cfg.start)
    }

    pub fn goal(&self) -> usize {
        self.cell_index(self.cfg.goal)
    }

    pub fn is_blocked(&self, cell: usize) -> bool {
        self.blocked[cell]
    }

    fn neighbour(&self, cell: usize, action: GridAction) -> usize {
        let [c, r] = self.cell_at(cell);
        let (dc, dr) = action.delta();
        let (nc, nr) = (c as i64 + dc, r as i64 + dr);
        if nc < 0 || nr < 0 || nc >= self.cfg.width as i64 || nr >= self.cfg.height as i64 {
            return cell;
        }
        let next = self.cell_index([nc as usize, nr as usize]);
        if self.blocked[next] {
            cell
        } else {
            next
        }
    }

    /// Deterministic move. Walls and obstacles leave the cell unchanged; the goal absorbs.
    pub fn step(&self, cell: usize, action: GridAction) -> (usize, f64, bool) {
        if cell == self.goal() {
            return (cell, 0.0, true);
        }
        let next = self.neighbour(cell, action);
        if next == self.goal() {
            (next, self.cfg.step_reward + self.cfg.goal_reward, true)
        } else {
            (next, self.cfg.step_reward, false)
        }
    }

    /// Shortest-path move counts to the goal by breadth-first search (`None` if cut off).
    pub fn distances_to_goal(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n_cells()];
        let goal = self.goal();
        dist[goal] = Some(0);
        let mut queue = VecDeque::from([goal]);
        while let Some(cell) = queue.pop_front() {
            let d = dist[cell].unwrap();
            for prev in 0..self.n_cells() {
                if self.blocked[prev] || dist[prev].is_some() || prev == goal {
                    continue;
                }
                if GridAction::ALL.iter().any(|a| self.neighbour(prev, *a) == cell) {
                    dist[prev] = Some(d + 1);
                    queue.push_back(prev);
                }
            }
        }
        dist
    }

    /// The grid as a finite MDP; the goal is terminal, obstacle cells are unreachable.
    pub fn to_mdp(&self) -> FiniteMdp {
        let n = self.n_cells();
        let mut mdp = FiniteMdp::zeros(n, 4, self.cfg.gamma);
        for s in 0..n {
            for a in GridAction::ALL {
                let (next, reward, _) = self.step(s, a);
                mdp.set_transition(s, a.index(), next, 1.0);
                mdp.set_reward(s, a.index(), reward);
            }
        }
        mdp.set_terminal(self.goal(), true);
        mdp.set_start_state(self.start());
        mdp
    }
}
