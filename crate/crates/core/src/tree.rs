//! AND/OR search-tree store.
//!
//! OR nodes are sub-tasks `(s, s'')` and are keyed by that pair alone, so every path
//! that reaches the same sub-task shares one node. AND nodes `(s, s', s'')` only carry a
//! visit count; they live inside their parent OR node as a table indexed by candidate.
//! Only expanded OR nodes are stored, and each expansion consumes one unit of budget.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{Maze, StateId};

/// A candidate sub-goal: a state, or `Null` for "do not split further".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubGoal {
    Null,
    State(StateId),
}

impl SubGoal {
    pub fn state(self) -> Option<StateId> {
        match self {
            SubGoal::Null => None,
            SubGoal::State(s) => Some(s),
        }
    }
}

impl fmt::Display for SubGoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubGoal::Null => f.write_str("∅"),
            SubGoal::State(s) => s.fmt(f),
        }
    }
}

impl std::str::FromStr for SubGoal {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "∅" {
            Ok(SubGoal::Null)
        } else {
            s.parse().map(SubGoal::State)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrKey {
    pub s: StateId,
    pub s2: StateId,
}

impl OrKey {
    pub fn new(s: StateId, s2: StateId) -> Self {
        OrKey { s, s2 }
    }
}

impl fmt::Display for OrKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.s, self.s2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AndKey {
    pub s: StateId,
    pub mid: SubGoal,
    pub s2: StateId,
}

impl AndKey {
    pub fn new(parent: OrKey, mid: SubGoal) -> Self {
        AndKey {
            s: parent.s,
            mid,
            s2: parent.s2,
        }
    }

    pub fn parent(&self) -> OrKey {
        OrKey::new(self.s, self.s2)
    }

    pub fn left(&self) -> Option<OrKey> {
        self.mid.state().map(|m| OrKey::new(self.s, m))
    }

    pub fn right(&self) -> Option<OrKey> {
        self.mid.state().map(|m| OrKey::new(m, self.s2))
    }
}

impl fmt::Display for AndKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.s, self.mid, self.s2)
    }
}

#[derive(Clone, Debug)]
pub struct OrNode {
    pub key: OrKey,
    /// Running-average value estimate.
    pub value: f64,
    pub visits: u32,
    pub expanded: bool,
    pub v_pi: f64,
    pub v_boot: f64,
    /// Policy prior over [`SearchTree::candidates`], normalized at expansion.
    pub prior: Vec<f64>,
    and_visits: Vec<u32>,
}

impl OrNode {
    /// Visit count of the AND child for candidate index `i`.
    pub fn and_visits(&self, i: usize) -> u32 {
        self.and_visits[i]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AndNode {
    pub key: AndKey,
    pub visits: u32,
}

const NONE: u32 = u32::MAX;

#[derive(Clone, Debug)]
pub struct SearchTree {
    width: usize,
    cell_index: Vec<u32>,
    candidates: Vec<SubGoal>,
    root: OrKey,
    nodes: Vec<OrNode>,
    slots: Vec<u32>,
    budget_used: usize,
    budget_max: usize,
    max_depth: usize,
}

/// `Null` followed by every empty cell of the maze in row-major order.
pub fn candidate_subgoals(maze: &Maze) -> Vec<SubGoal> {
    std::iter::once(SubGoal::Null)
        .chain(maze.empty_cells().into_iter().map(SubGoal::State))
        .collect()
}

impl SearchTree {
    pub fn new(maze: &Maze, root: OrKey, budget_max: usize, max_depth: usize) -> Result<Self> {
        maze.check_empty(root.s)?;
        maze.check_empty(root.s2)?;
        let candidates = candidate_subgoals(maze);
        let mut cell_index = vec![NONE; maze.width() * maze.height()];
        for (i, c) in candidates.iter().skip(1).enumerate() {
            let s = c.state().expect("only the first candidate is Null");
            cell_index[s.row() * maze.width() + s.col()] = i as u32;
        }
        let n = candidates.len() - 1;
        Ok(SearchTree {
            width: maze.width(),
            cell_index,
            candidates,
            root,
            nodes: Vec::new(),
            slots: vec![NONE; n * n],
            budget_used: 0,
            budget_max,
            max_depth,
        })
    }

    pub fn root(&self) -> OrKey {
        self.root
    }

    pub fn budget_used(&self) -> usize {
        self.budget_used
    }

    pub fn budget_max(&self) -> usize {
        self.budget_max
    }

    pub fn budget_left(&self) -> usize {
        self.budget_max - self.budget_used
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn candidates(&self) -> &[SubGoal] {
        &self.candidates
    }

    /// Number of empty cells; candidate `i + 1` is empty cell `i`.
    pub fn num_states(&self) -> usize {
        self.candidates.len() - 1
    }

    pub fn state_index(&self, s: StateId) -> Option<usize> {
        if s.col() >= self.width {
            return None;
        }
        let i = *self.cell_index.get(s.row() * self.width + s.col())?;
        (i != NONE).then_some(i as usize)
    }

    pub fn candidate_index(&self, g: SubGoal) -> Option<usize> {
        match g {
            SubGoal::Null => Some(0),
            SubGoal::State(s) => self.state_index(s).map(|i| i + 1),
        }
    }

    fn pair_slot(&self, key: OrKey) -> Result<usize> {
        let a = self.state_index(key.s).ok_or(Error::WallCell(key.s))?;
        let b = self.state_index(key.s2).ok_or(Error::WallCell(key.s2))?;
        Ok(a * self.num_states() + b)
    }

    pub(crate) fn node_index_by_states(&self, a: usize, b: usize) -> Option<usize> {
        let i = self.slots[a * self.num_states() + b];
        (i != NONE).then_some(i as usize)
    }

    pub(crate) fn node_at(&self, i: usize) -> &OrNode {
        &self.nodes[i]
    }

    pub fn contains(&self, key: OrKey) -> bool {
        self.node(key).is_some()
    }

    pub fn node(&self, key: OrKey) -> Option<&OrNode> {
        let slot = self.pair_slot(key).ok()?;
        let i = self.slots[slot];
        (i != NONE).then(|| &self.nodes[i as usize])
    }

    fn node_mut(&mut self, key: OrKey) -> Result<&mut OrNode> {
        let slot = self.pair_slot(key)?;
        match self.slots[slot] {
            NONE => Err(Error::NotExpanded(key)),
            i => Ok(&mut self.nodes[i as usize]),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Stores `key` with `V = max(v_pi, v_boot)` and `N = 0`, charging one unit of budget.
    /// Returns the initial value.
    pub fn expand_node(&mut self, key: OrKey, v_pi: f64, v_boot: f64, mut prior: Vec<f64>) -> Result<f64> {
        let slot = self.pair_slot(key)?;
        if self.slots[slot] != NONE {
            return Err(Error::AlreadyExpanded(key));
        }
        if self.budget_used >= self.budget_max {
            return Err(Error::BudgetExhausted);
        }
        if prior.len() != self.candidates.len() {
            return Err(Error::InvalidPrior(format!(
                "{} entries for {} candidates",
                prior.len(),
                self.candidates.len()
            )));
        }
        if prior.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidPrior("entries must be finite and non-negative".into()));
        }
        let total: f64 = prior.iter().sum();
        if total > 0.0 {
            prior.iter_mut().for_each(|p| *p /= total);
        } else {
            let u = 1.0 / prior.len() as f64;
            prior.iter_mut().for_each(|p| *p = u);
        }
        let value = v_pi.max(v_boot);
        self.slots[slot] = self.nodes.len() as u32;
        let n = self.candidates.len();
        self.nodes.push(OrNode {
            key,
            value,
            visits: 0,
            expanded: true,
            v_pi,
            v_boot,
            prior,
            and_visits: vec![0; n],
        });
        self.budget_used += 1;
        Ok(value)
    }

    /// Running-average update `V <- (V N + G) / (N + 1)`, `N <- N + 1`.
    pub fn update_or_stats(&mut self, key: OrKey, g: f64) -> Result<(f64, u32)> {
        let node = self.node_mut(key)?;
        let n = node.visits as f64;
        node.value = (node.value * n + g) / (n + 1.0);
        node.visits += 1;
        Ok((node.value, node.visits))
    }

    /// Records one traversal through the AND node `key`; returns its new visit count.
    pub fn touch_and_node(&mut self, key: AndKey) -> Result<u32> {
        let ci = self
            .candidate_index(key.mid)
            .ok_or_else(|| Error::WallCell(key.mid.state().unwrap_or(key.s)))?;
        let node = self.node_mut(key.parent())?;
        node.and_visits[ci] += 1;
        Ok(node.and_visits[ci])
    }

    pub fn and_visits(&self, key: AndKey) -> u32 {
        match (self.node(key.parent()), self.candidate_index(key.mid)) {
            (Some(node), Some(ci)) => node.and_visits[ci],
            _ => 0,
        }
    }

    pub fn or_nodes(&self) -> impl Iterator<Item = &OrNode> {
        self.nodes.iter()
    }

    /// AND nodes touched at least once.
    pub fn and_nodes(&self) -> Vec<AndNode> {
        let mut out = Vec::new();
        for node in &self.nodes {
            for (ci, &visits) in node.and_visits.iter().enumerate() {
                if visits > 0 {
                    out.push(AndNode {
                        key: AndKey::new(node.key, self.candidates[ci]),
                        visits,
                    });
                }
            }
        }
        out
    }

    pub fn snapshot(&self) -> TreeDump {
        TreeDump {
            or_nodes: self.nodes.iter().map(|n| (n.key, (n.value, n.visits))).collect(),
            and_nodes: self.and_nodes().into_iter().map(|a| (a.key, a.visits)).collect(),
        }
    }

    /// Line-oriented dump, sorted by key: `OR r,c r,c V N 1` and `AND r,c mid r,c N`.
    pub fn dump(&self) -> String {
        self.snapshot().to_text()
    }
}

/// Node statistics of a tree, as written by [`SearchTree::dump`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TreeDump {
    pub or_nodes: BTreeMap<OrKey, (f64, u32)>,
    pub and_nodes: BTreeMap<AndKey, u32>,
}

impl TreeDump {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, (v, n)) in &self.or_nodes {
            out.push_str(&format!("OR {} {} {v} {n} 1\n", k.s, k.s2));
        }
        for (k, n) in &self.and_nodes {
            out.push_str(&format!("AND {} {} {} {n}\n", k.s, k.mid, k.s2));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut dump = TreeDump::default();
        for (i, line) in text.lines().enumerate() {
            let err = |msg: String| Error::parse(i + 1, msg);
            let f: Vec<&str> = line.split_whitespace().collect();
            let state = |t: &str| t.parse::<StateId>().map_err(err);
            match f.as_slice() {
                ["OR", s, s2, v, n, "1"] => {
                    let v: f64 = v.parse().map_err(|e| err(format!("bad value: {e}")))?;
                    let n: u32 = n.parse().map_err(|e| err(format!("bad count: {e}")))?;
                    dump.or_nodes.insert(OrKey::new(state(s)?, state(s2)?), (v, n));
                }
                ["AND", s, mid, s2, n] => {
                    let mid: SubGoal = mid.parse().map_err(err)?;
                    let n: u32 = n.parse().map_err(|e| err(format!("bad count: {e}")))?;
                    dump.and_nodes.insert(
                        AndKey {
                            s: state(s)?,
                            mid,
                            s2: state(s2)?,
                        },
                        n,
                    );
                }
                [] => {}
                _ => return Err(err(format!("unrecognized line `{line}`"))),
            }
        }
        Ok(dump)
    }
}
