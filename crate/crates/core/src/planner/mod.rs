//! The DC-MCTS search loop, plan extraction, the planning objective and the
//! sequential-MCTS baseline.

mod extract;
mod search;

use std::fmt;
use std::str::FromStr;

use serde_json::json;

use crate::error::{Error, Result};
use crate::grid::{LowLevelValue, Pi0, StateId, Task};
use crate::tree::{OrKey, SearchTree, SubGoal};

pub use extract::choose_subgoal;
pub use search::{
    descend_one, puct_score, run_search, run_search_sequential, run_search_with, select_child, Branch,
    BranchStats, ChildScore,
};
pub(crate) use search::ValueCache;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Both halves of every split are searched.
    #[default]
    DivideAndConquer,
    /// Only the right half is searched; plans grow as chains from the start.
    SequentialRight,
    DescendLeftFirst,
    DescendLowerValue,
    DescendTwoWayUct,
}

impl Mode {
    pub const ALL: [Mode; 5] = [
        Mode::DivideAndConquer,
        Mode::SequentialRight,
        Mode::DescendLeftFirst,
        Mode::DescendLowerValue,
        Mode::DescendTwoWayUct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::DivideAndConquer => "dc",
            Mode::SequentialRight => "sequential",
            Mode::DescendLeftFirst => "descend_left_first",
            Mode::DescendLowerValue => "descend_lower_value",
            Mode::DescendTwoWayUct => "descend_two_way_uct",
        }
    }

    pub fn is_descend(self) -> bool {
        matches!(
            self,
            Mode::DescendLeftFirst | Mode::DescendLowerValue | Mode::DescendTwoWayUct
        )
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "dc" | "divide_and_conquer" => Mode::DivideAndConquer,
            "sequential" | "sequential_right" | "mcts" => Mode::SequentialRight,
            "descend_left_first" => Mode::DescendLeftFirst,
            "descend_lower_value" => Mode::DescendLowerValue,
            "descend_two_way_uct" => Mode::DescendTwoWayUct,
            _ => return Err(Error::Config(format!("unknown planner mode `{s}`"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannerConfig {
    /// Maximum number of node expansions.
    pub budget: usize,
    pub max_depth: usize,
    pub c_puct: f64,
    /// Exploration constant of the two-way UCT descend rule.
    pub two_way_c: f64,
    pub mode: Mode,
    pub seed: u64,
    /// Compute heuristics for the two halves of a fresh split concurrently.
    pub parallel_and: bool,
    /// Stop after this many consecutive traversals that expand nothing.
    pub stall_limit: usize,
    /// Record every OR-node update in [`PlanResult::trace`].
    pub trace: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            budget: 200,
            max_depth: 8,
            c_puct: 5.0,
            two_way_c: std::f64::consts::SQRT_2,
            mode: Mode::DivideAndConquer,
            seed: 0,
            parallel_and: false,
            stall_limit: 64,
            trace: false,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be at least 1".into()));
        }
        if !(self.c_puct.is_finite() && self.c_puct >= 0.0) {
            return Err(Error::Config(format!("c_puct must be finite and >= 0, got {}", self.c_puct)));
        }
        if !(self.two_way_c.is_finite() && self.two_way_c >= 0.0) {
            return Err(Error::Config(format!("two_way_c must be finite and >= 0, got {}", self.two_way_c)));
        }
        if self.stall_limit == 0 {
            return Err(Error::Config("stall_limit must be at least 1".into()));
        }
        Ok(())
    }
}

/// A sub-goal sequence from start to goal and its objective `L`.
#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub sigma: Vec<StateId>,
    pub objective_l: f64,
}

impl Plan {
    pub fn new(task: &Task, sigma: Vec<StateId>) -> Result<Self> {
        Self::with_value(&Pi0, task, sigma)
    }

    pub fn with_value(low: &dyn LowLevelValue, task: &Task, sigma: Vec<StateId>) -> Result<Self> {
        let objective_l = plan_objective_with(low, task, &sigma)?;
        Ok(Plan { sigma, objective_l })
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }
}

/// `L(sigma)` under the myopic policy.
pub fn plan_objective(task: &Task, sigma: &[StateId]) -> Result<f64> {
    plan_objective_with(&Pi0, task, sigma)
}

/// Product of low-level values over consecutive pairs of `sigma`.
pub fn plan_objective_with(low: &dyn LowLevelValue, task: &Task, sigma: &[StateId]) -> Result<f64> {
    if sigma.len() < 2 {
        return Err(Error::MalformedPlan(format!("{} states, need at least 2", sigma.len())));
    }
    if sigma[0] != task.start || sigma[sigma.len() - 1] != task.goal {
        return Err(Error::MalformedPlan("plan must run from start to goal".into()));
    }
    for &s in sigma {
        task.maze.check_empty(s).map_err(|e| Error::MalformedPlan(e.to_string()))?;
    }
    Ok(sigma
        .windows(2)
        .map(|w| low.value(&task.maze, w[0], w[1]))
        .product())
}

/// One OR node of an extracted solution tree.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionNode {
    pub key: OrKey,
    /// Chosen split, or `Null` at terminal nodes.
    pub subgoal: SubGoal,
    pub depth: usize,
    /// Return of the sub-tree: `v^pi` at leaves, product of the children otherwise.
    pub g: f64,
    pub v_pi: f64,
    pub left: Option<usize>,
    pub right: Option<usize>,
}

impl SolutionNode {
    pub fn is_leaf(&self) -> bool {
        self.left.is_none()
    }
}

/// Binary tree of the decisions that produced a plan; node 0 is the root.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolutionTree {
    pub nodes: Vec<SolutionNode>,
}

impl SolutionTree {
    pub fn root(&self) -> &SolutionNode {
        &self.nodes[0]
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&SolutionNode> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            let n = &self.nodes[i];
            match (n.left, n.right) {
                (Some(l), Some(r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                _ => out.push(n),
            }
        }
        out
    }

    /// States of the induced plan.
    pub fn plan_states(&self) -> Vec<StateId> {
        let leaves = self.leaves();
        let mut sigma = vec![leaves[0].key.s];
        sigma.extend(leaves.iter().map(|l| l.key.s2));
        sigma
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TreeStats {
    pub or_nodes: usize,
    pub and_nodes: usize,
    pub traversals: usize,
    pub root_value: f64,
    pub root_visits: u32,
}

/// One OR-node update performed by a traversal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpdateEvent {
    pub key: OrKey,
    pub depth: usize,
    pub g: f64,
    pub v_pi: f64,
    pub value: f64,
    pub visits: u32,
}

#[derive(Clone, Debug)]
pub struct PlanResult {
    pub mode: Mode,
    pub plan: Plan,
    pub solution_tree: SolutionTree,
    pub budget_used: usize,
    pub stats: TreeStats,
    /// Returns received by the root, in order.
    pub root_returns: Vec<f64>,
    pub trace: Vec<UpdateEvent>,
    pub tree: SearchTree,
    pub(crate) cache: ValueCache,
}

impl PlanResult {
    pub fn root_g(&self) -> f64 {
        self.solution_tree.root().g
    }

    /// `(sub-task, G)` for every OR node of the solution tree, in pre-order.
    pub fn returns(&self) -> Vec<(OrKey, f64)> {
        self.solution_tree.nodes.iter().map(|n| (n.key, n.g)).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "mode": self.mode.name(),
            "plan": self.plan.sigma.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
            "plan_length": self.plan.len(),
            "L": self.plan.objective_l,
            "G": self.root_g(),
            "budget_used": self.budget_used,
            "budget": self.tree.budget_max(),
            "or_nodes": self.stats.or_nodes,
            "and_nodes": self.stats.and_nodes,
            "traversals": self.stats.traversals,
            "root_value": self.stats.root_value,
            "root_visits": self.stats.root_visits,
        })
    }
}

impl PlanResult {
    /// Value products `V(s,s') V(s',s'')` of every candidate split of an expanded
    /// sub-task, with `v^pi(s, s'')` for `Null` and 0 for the degenerate splits at `s`
    /// and `s''`. Unexpanded halves contribute the bootstrap value seen by the search.
    /// `None` unless the search selected a child of `key` at least once.
    pub fn and_value_products(&self, key: OrKey) -> Option<Vec<f64>> {
        let node = self.tree.node(key)?;
        let n = self.tree.candidates().len();
        if (0..n).all(|c| node.and_visits(c) == 0) {
            return None;
        }
        let i = self.tree.state_index(key.s)?;
        let k = self.tree.state_index(key.s2)?;
        let vpi = |a: usize, b: usize| self.cache.cached_vpi(a, b).unwrap_or(0.0);
        let value = |a: usize, b: usize| match self.tree.node_index_by_states(a, b) {
            Some(idx) => self.tree.node_at(idx).value,
            None => self.cache.cached_boot(a, b).unwrap_or_else(|| vpi(a, b)),
        };
        let mut out = Vec::with_capacity(n);
        out.push(vpi(i, k));
        for j in 0..n - 1 {
            if j == i || j == k {
                out.push(0.0);
                continue;
            }
            let left = match self.mode {
                Mode::SequentialRight => vpi(i, j),
                _ => value(i, j),
            };
            out.push(if left == 0.0 { 0.0 } else { left * value(j, k) });
        }
        Some(out)
    }
}
