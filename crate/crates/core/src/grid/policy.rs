use std::collections::HashMap;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Maze, StateId, Task};
use crate::error::Result;

/// Success probability of the low-level policy on a sub-task `(s, s2)`.
///
/// Implementations may assume both cells are empty; [`low_level_value_pi0`] is the
/// checked entry point for callers holding unvalidated cells.
pub trait LowLevelValue: Sync {
    fn value(&self, maze: &Maze, s: StateId, s2: StateId) -> f64;
}

/// A goal-conditioned low-level controller.
pub trait LowLevelPolicy: Sync {
    /// One step from `s` while pursuing `subgoal`.
    fn step(&self, rng: &mut dyn RngCore, maze: &Maze, s: StateId, subgoal: StateId) -> StateId;

    /// Exact next-state distribution of [`LowLevelPolicy::step`].
    fn transitions(&self, maze: &Maze, s: StateId, subgoal: StateId) -> Vec<(StateId, f64)>;
}

/// The hard-coded myopic policy: reaches an adjacent sub-goal in one step, otherwise
/// moves to a uniformly random empty neighbour.
#[derive(Clone, Copy, Debug, Default)]
pub struct Pi0;

impl LowLevelValue for Pi0 {
    fn value(&self, _maze: &Maze, s: StateId, s2: StateId) -> f64 {
        if s == s2 || s.is_adjacent(s2) {
            1.0
        } else {
            0.0
        }
    }
}

impl LowLevelPolicy for Pi0 {
    fn step(&self, rng: &mut dyn RngCore, maze: &Maze, s: StateId, subgoal: StateId) -> StateId {
        low_level_step_pi0(rng, maze, s, subgoal)
    }

    fn transitions(&self, maze: &Maze, s: StateId, subgoal: StateId) -> Vec<(StateId, f64)> {
        if s == subgoal {
            return vec![(s, 1.0)];
        }
        if s.is_adjacent(subgoal) && maze.is_empty(subgoal) {
            return vec![(subgoal, 1.0)];
        }
        let ns = maze.empty_neighbors(s);
        if ns.is_empty() {
            return vec![(s, 1.0)];
        }
        let p = 1.0 / ns.len() as f64;
        ns.into_iter().map(|n| (n, p)).collect()
    }
}

/// Checked low-level value of the myopic policy: 1 when `s2` is `s` or a 4-neighbour of
/// it, 0 otherwise. Querying a wall is an invalid sub-goal.
pub fn low_level_value_pi0(maze: &Maze, s: StateId, s2: StateId) -> Result<f64> {
    maze.check_empty(s)?;
    maze.check_empty(s2)?;
    Ok(Pi0.value(maze, s, s2))
}

pub fn low_level_step_pi0<R: RngCore + ?Sized>(
    rng: &mut R,
    maze: &Maze,
    s: StateId,
    subgoal: StateId,
) -> StateId {
    if s == subgoal {
        return s;
    }
    if s.is_adjacent(subgoal) && maze.is_empty(subgoal) {
        return subgoal;
    }
    let ns = maze.empty_neighbors(s);
    if ns.is_empty() {
        return s;
    }
    ns[rng.random_range(0..ns.len())]
}

/// Low-level values read from a table; missing pairs are worth `default`, and `v(s, s)`
/// is always 1.
#[derive(Clone, Debug, Default)]
pub struct TabulatedValue {
    pub values: HashMap<(StateId, StateId), f64>,
    pub default: f64,
}

impl TabulatedValue {
    pub fn new(default: f64) -> Self {
        TabulatedValue {
            values: HashMap::new(),
            default,
        }
    }

    pub fn insert(&mut self, s: StateId, s2: StateId, v: f64) {
        self.values.insert((s, s2), v);
    }
}

impl LowLevelValue for TabulatedValue {
    fn value(&self, _maze: &Maze, s: StateId, s2: StateId) -> f64 {
        if s == s2 {
            return 1.0;
        }
        self.values.get(&(s, s2)).copied().unwrap_or(self.default)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<StateId>,
    pub reached_goal: bool,
    pub steps: usize,
}

/// Episode length for plan execution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepLimit {
    Fixed(usize),
    /// `ceil(factor * d)` where `d` is the shortest-path distance from start to goal.
    Slack(f64),
}

impl Default for StepLimit {
    fn default() -> Self {
        StepLimit::Slack(1.5)
    }
}

impl StepLimit {
    pub fn resolve(self, task: &Task) -> usize {
        match self {
            StepLimit::Fixed(n) => n,
            StepLimit::Slack(f) => {
                let w = task.maze.width();
                let d = task.maze.bfs_distances(task.start)[task.goal.row() * w + task.goal.col()];
                (f * d as f64).ceil() as usize
            }
        }
    }
}

impl std::fmt::Display for StepLimit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StepLimit::Fixed(n) => write!(f, "{n}"),
            StepLimit::Slack(x) => write!(f, "{x}x"),
        }
    }
}

impl std::str::FromStr for StepLimit {
    type Err = crate::error::Error;

    /// `40` is a fixed limit, `1.5x` a multiple of the shortest-path distance.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || crate::error::Error::Config(format!("bad step limit `{s}`"));
        match s.strip_suffix('x') {
            Some(f) => {
                let f: f64 = f.parse().map_err(|_| bad())?;
                if !(f.is_finite() && f > 0.0) {
                    return Err(bad());
                }
                Ok(StepLimit::Slack(f))
            }
            None => s.parse().map(StepLimit::Fixed).map_err(|_| bad()),
        }
    }
}

/// Executes `sigma` with the myopic policy. See [`execute_plan_with`].
pub fn execute_plan<R: RngCore>(rng: &mut R, task: &Task, sigma: &[StateId], step_limit: usize) -> Trajectory {
    execute_plan_with(&Pi0, rng, task, sigma, step_limit)
}

/// Conditions `policy` on the first unreached sub-goal of `sigma[1..]`, advancing when
/// it is reached. Stops at the goal, after `step_limit` steps, or when sub-goals run out.
pub fn execute_plan_with<R: RngCore>(
    policy: &dyn LowLevelPolicy,
    rng: &mut R,
    task: &Task,
    sigma: &[StateId],
    step_limit: usize,
) -> Trajectory {
    let mut cur = task.start;
    let mut states = vec![cur];
    let mut next = 1;
    let mut steps = 0;
    while cur != task.goal && steps < step_limit {
        while next < sigma.len() && sigma[next] == cur {
            next += 1;
        }
        let Some(&subgoal) = sigma.get(next) else { break };
        cur = policy.step(rng, &task.maze, cur, subgoal);
        steps += 1;
        states.push(cur);
        if cur == subgoal {
            next += 1;
        }
    }
    Trajectory {
        reached_goal: cur == task.goal,
        states,
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate_maze, Cell};
    use crate::rng::rng_from_seed;

    #[test]
    fn pi0_values() {
        let maze = Maze::open(4, 4);
        let v = |a: (usize, usize), b: (usize, usize)| {
            low_level_value_pi0(&maze, StateId::new(a.0, a.1), StateId::new(b.0, b.1)).unwrap()
        };
        assert_eq!(v((1, 1), (1, 2)), 1.0);
        assert_eq!(v((1, 1), (3, 3)), 0.0);
        assert_eq!(v((1, 1), (1, 1)), 1.0);
        assert_eq!(v((1, 1), (2, 2)), 0.0);
    }

    #[test]
    fn pi0_rejects_walls() {
        let maze = generate_maze(5, 5, 1.0, 0).unwrap();
        assert!(low_level_value_pi0(&maze, StateId::new(0, 0), StateId::new(1, 1)).is_err());
        assert!(low_level_value_pi0(&maze, StateId::new(1, 1), StateId::new(9, 9)).is_err());
    }

    #[test]
    fn adjacent_subgoal_is_reached() {
        let maze = Maze::open(5, 5);
        let mut rng = rng_from_seed(0);
        for _ in 0..100 {
            assert_eq!(
                low_level_step_pi0(&mut rng, &maze, StateId::new(2, 2), StateId::new(2, 3)),
                StateId::new(2, 3)
            );
        }
    }

    #[test]
    fn dead_end_has_single_exit() {
        // .##
        // ...
        let cells = vec![Cell::Empty, Cell::Wall, Cell::Wall, Cell::Empty, Cell::Empty, Cell::Empty];
        let maze = Maze::from_cells(3, 2, cells).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..50 {
            assert_eq!(
                low_level_step_pi0(&mut rng, &maze, StateId::new(0, 0), StateId::new(1, 2)),
                StateId::new(1, 0)
            );
        }
    }

    #[test]
    fn adjacent_chain_executes_deterministically() {
        let maze = Maze::open(4, 4);
        let sigma: Vec<StateId> = [(0, 0), (0, 1), (1, 1), (2, 1), (2, 2), (3, 2)]
            .iter()
            .map(|&(r, c)| StateId::new(r, c))
            .collect();
        let task = Task::new(maze, sigma[0], *sigma.last().unwrap()).unwrap();
        let traj = execute_plan(&mut rng_from_seed(1), &task, &sigma, 100);
        assert!(traj.reached_goal);
        assert_eq!(traj.steps, sigma.len() - 1);
        assert_eq!(traj.states, sigma);
    }

    #[test]
    fn one_step_limit_fails_on_distant_goal() {
        let maze = Maze::open(6, 6);
        let task = Task::new(maze, StateId::new(0, 0), StateId::new(5, 5)).unwrap();
        let traj = execute_plan(&mut rng_from_seed(9), &task, &[task.start, task.goal], 1);
        assert!(!traj.reached_goal);
        assert_eq!(traj.steps, 1);
    }

    #[test]
    fn trajectories_move_between_neighbours() {
        let maze = generate_maze(11, 11, 0.75, 4).unwrap();
        let cells = maze.empty_cells();
        let task = Task::new(maze, cells[0], *cells.last().unwrap()).unwrap();
        let traj = execute_plan(&mut rng_from_seed(2), &task, &[task.start, task.goal], 200);
        for w in traj.states.windows(2) {
            assert!(w[0] == w[1] || w[0].is_adjacent(w[1]));
        }
        assert_eq!(traj.reached_goal, traj.states.contains(&task.goal));
    }
}
