use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::grid::{execute_plan_with, LowLevelPolicy, LowLevelValue, Maze, StateId, Task};
use crate::par::{self, Execution};
use crate::rng::{derive_rng, Stream};

use super::MAX_EXACT_CELLS;

/// With probability `1 - epsilon` steps along a shortest path to the sub-goal, otherwise
/// to a uniformly random empty neighbour. Ties between shortest-path steps go to the
/// first neighbour in up, down, left, right order.
#[derive(Clone, Debug)]
pub struct StochasticTestPolicy {
    pub epsilon: f64,
    width: usize,
    index: Vec<u32>,
    dist: Vec<u32>,
    n: usize,
}

impl StochasticTestPolicy {
    pub fn new(maze: &Maze, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Config(format!("epsilon {epsilon} outside [0, 1]")));
        }
        let cells = maze.empty_cells();
        let n = cells.len();
        if n > MAX_EXACT_CELLS {
            return Err(Error::InstanceTooLarge(n, MAX_EXACT_CELLS));
        }
        let mut index = vec![u32::MAX; maze.width() * maze.height()];
        for (i, s) in cells.iter().enumerate() {
            index[s.row() * maze.width() + s.col()] = i as u32;
        }
        let rows = par::map_slice(Execution::default(), &cells, |&s| {
            let d = maze.bfs_distances(s);
            cells.iter().map(|c| d[c.row() * maze.width() + c.col()]).collect::<Vec<u32>>()
        });
        Ok(StochasticTestPolicy {
            epsilon,
            width: maze.width(),
            index,
            dist: rows.concat(),
            n,
        })
    }

    fn distance(&self, a: StateId, b: StateId) -> u32 {
        let ia = self.index[a.row() * self.width + a.col()] as usize;
        let ib = self.index[b.row() * self.width + b.col()] as usize;
        self.dist[ia * self.n + ib]
    }

    fn greedy_step(&self, maze: &Maze, s: StateId, subgoal: StateId) -> StateId {
        let mut best = s;
        let mut best_d = self.distance(s, subgoal);
        for nb in maze.empty_neighbors(s) {
            let d = self.distance(nb, subgoal);
            if d < best_d {
                best = nb;
                best_d = d;
            }
        }
        best
    }
}

impl LowLevelPolicy for StochasticTestPolicy {
    fn step(&self, rng: &mut dyn RngCore, maze: &Maze, s: StateId, subgoal: StateId) -> StateId {
        if s == subgoal {
            return s;
        }
        if rng.random::<f64>() >= self.epsilon {
            return self.greedy_step(maze, s, subgoal);
        }
        let ns = maze.empty_neighbors(s);
        if ns.is_empty() {
            return s;
        }
        ns[rng.random_range(0..ns.len())]
    }

    fn transitions(&self, maze: &Maze, s: StateId, subgoal: StateId) -> Vec<(StateId, f64)> {
        if s == subgoal {
            return vec![(s, 1.0)];
        }
        let mut out = vec![(self.greedy_step(maze, s, subgoal), 1.0 - self.epsilon)];
        let ns = maze.empty_neighbors(s);
        if ns.is_empty() {
            out[0].1 = 1.0;
            return out;
        }
        let p = self.epsilon / ns.len() as f64;
        for nb in ns {
            match out.iter_mut().find(|(x, _)| *x == nb) {
                Some(e) => e.1 += p,
                None => out.push((nb, p)),
            }
        }
        out.retain(|(_, p)| *p > 0.0);
        out
    }
}

/// Probability that `policy`, started at `s` and conditioned on `subgoal`, visits the
/// sub-goal within `horizon` steps, by dynamic programming over the state distribution.
pub fn exact_policy_value(maze: &Maze, policy: &dyn LowLevelPolicy, s: StateId, subgoal: StateId, horizon: usize) -> f64 {
    if s == subgoal {
        return 1.0;
    }
    let cells = maze.empty_cells();
    let w = maze.width();
    let idx = |x: StateId| cells.binary_search_by_key(&(x.row() * w + x.col()), |c| c.row() * w + c.col()).ok();
    let (Some(start), Some(target)) = (idx(s), idx(subgoal)) else {
        return 0.0;
    };
    let trans: Vec<Vec<(usize, f64)>> = cells
        .iter()
        .map(|&c| {
            policy
                .transitions(maze, c, subgoal)
                .into_iter()
                .map(|(x, p)| (idx(x).expect("policies move between empty cells"), p))
                .collect()
        })
        .collect();
    let mut mass = vec![0.0; cells.len()];
    mass[start] = 1.0;
    let mut absorbed = 0.0;
    let mut next = vec![0.0; cells.len()];
    for _ in 0..horizon {
        next.iter_mut().for_each(|m| *m = 0.0);
        for (i, &m) in mass.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            for &(j, p) in &trans[i] {
                next[j] += m * p;
            }
        }
        absorbed += next[target];
        next[target] = 0.0;
        std::mem::swap(&mut mass, &mut next);
    }
    absorbed
}

/// Exact success probability of executing `sigma` as [`execute_plan_with`] does: the
/// policy pursues the first unreached sub-goal, which advances on arrival; execution
/// succeeds on reaching the goal within `step_limit` steps.
pub fn exact_plan_success(task: &Task, policy: &dyn LowLevelPolicy, sigma: &[StateId], step_limit: usize) -> f64 {
    let maze = &task.maze;
    let cells = maze.empty_cells();
    let w = maze.width();
    let idx = |x: StateId| {
        cells
            .binary_search_by_key(&(x.row() * w + x.col()), |c| c.row() * w + c.col())
            .expect("plan states are empty cells")
    };
    let n = cells.len();
    let m = sigma.len();
    // Skips sub-goals already satisfied by the current position.
    let settle = |pos: StateId, mut k: usize| {
        while k < m && sigma[k] == pos {
            k += 1;
        }
        k
    };
    if task.start == task.goal {
        return 1.0;
    }
    let mut mass = vec![0.0; n * (m + 1)];
    mass[idx(task.start) * (m + 1) + 1.min(m)] = 1.0;
    let mut success = 0.0;
    let goal = idx(task.goal);
    let mut cache: Vec<Option<Vec<(usize, StateId, f64)>>> = vec![None; n * (m + 1)];
    for _ in 0..step_limit {
        let mut next = vec![0.0; n * (m + 1)];
        for (slot, &p) in mass.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let (i, k) = (slot / (m + 1), slot % (m + 1));
            let k = settle(cells[i], k);
            if k >= m {
                continue;
            }
            let sub = sigma[k];
            let t = cache[i * (m + 1) + k].get_or_insert_with(|| {
                policy
                    .transitions(maze, cells[i], sub)
                    .into_iter()
                    .map(|(x, q)| (idx(x), x, q))
                    .collect()
            });
            for &(j, x, q) in t.iter() {
                let k2 = if x == sub { k + 1 } else { k };
                if j == goal {
                    success += p * q;
                } else {
                    next[j * (m + 1) + k2] += p * q;
                }
            }
        }
        mass = next;
    }
    success
}

/// Low-level values `exact_policy_value(.., horizon)` for all pairs of empty cells.
#[derive(Clone, Debug)]
pub struct PolicyValueTable {
    width: usize,
    index: Vec<u32>,
    values: Vec<f64>,
    n: usize,
}

impl PolicyValueTable {
    pub fn new(maze: &Maze, policy: &dyn LowLevelPolicy, horizon: usize) -> Result<Self> {
        let cells = maze.empty_cells();
        let n = cells.len();
        if n > MAX_EXACT_CELLS {
            return Err(Error::InstanceTooLarge(n, MAX_EXACT_CELLS));
        }
        let mut index = vec![u32::MAX; maze.width() * maze.height()];
        for (i, s) in cells.iter().enumerate() {
            index[s.row() * maze.width() + s.col()] = i as u32;
        }
        let mut values = vec![0.0; n * n];
        par::for_each_row_mut(Execution::default(), &mut values, n.max(1), |i, row| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = exact_policy_value(maze, policy, cells[i], cells[j], horizon);
            }
        });
        Ok(PolicyValueTable {
            width: maze.width(),
            index,
            values,
            n,
        })
    }

    /// Default horizon: four times the number of empty cells.
    pub fn default_horizon(maze: &Maze) -> usize {
        4 * maze.num_empty()
    }
}

impl LowLevelValue for PolicyValueTable {
    fn value(&self, _maze: &Maze, s: StateId, s2: StateId) -> f64 {
        let i = self.index[s.row() * self.width + s.col()] as usize;
        let j = self.index[s2.row() * self.width + s2.col()] as usize;
        self.values[i * self.n + j]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuccessEstimate {
    pub rate: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Fraction of `trials` executions of `sigma` that reach the goal, with its binomial
/// standard error. Trial `t` draws from a stream derived from one number taken from
/// `rng`, so the estimate does not depend on the execution strategy.
pub fn monte_carlo_success<R: RngCore>(
    rng: &mut R,
    task: &Task,
    sigma: &[StateId],
    policy: &dyn LowLevelPolicy,
    trials: usize,
    step_limit: usize,
) -> SuccessEstimate {
    monte_carlo_success_with(Execution::default(), rng, task, sigma, policy, trials, step_limit)
}

pub fn monte_carlo_success_with<R: RngCore>(
    exec: Execution,
    rng: &mut R,
    task: &Task,
    sigma: &[StateId],
    policy: &dyn LowLevelPolicy,
    trials: usize,
    step_limit: usize,
) -> SuccessEstimate {
    let base = rng.next_u64();
    let wins = par::map_range(exec, trials, |t| {
        let mut r = derive_rng(base, Stream::Trial, t as u64);
        execute_plan_with(policy, &mut r, task, sigma, step_limit).reached_goal as usize
    })
    .into_iter()
    .sum::<usize>();
    let rate = if trials == 0 { 0.0 } else { wins as f64 / trials as f64 };
    let stderr = if trials == 0 {
        0.0
    } else {
        (rate * (1.0 - rate) / trials as f64).sqrt()
    };
    SuccessEstimate { rate, stderr, trials }
}
