//! Ground truth: exact high-level values by all-pairs shortest paths on `-log v^pi`
//! weights, optimal plans, exact-value heuristics, and a stochastic test policy with
//! exact absorption probabilities.

mod policy;

pub use policy::{
    exact_plan_success, exact_policy_value, monte_carlo_success, monte_carlo_success_with, PolicyValueTable,
    StochasticTestPolicy, SuccessEstimate,
};

use crate::error::{Error, Result};
use crate::grid::{LowLevelValue, Maze, StateId, Task, TaskEncoding};
use crate::heuristics::{PolicyPrior, ValueEstimator};
use crate::par::{self, Execution};
use crate::planner::{plan_objective_with, Plan};
use crate::tree::{OrKey, SubGoal};

/// Largest number of empty cells the exact oracles accept.
pub const MAX_EXACT_CELLS: usize = 400;

const NO_HOP: u32 = u32::MAX;

/// `v*(s, s'')` for every ordered pair of empty cells, with shortest-path successors.
#[derive(Clone, Debug)]
pub struct ValueTable {
    width: usize,
    cells: Vec<StateId>,
    index: Vec<u32>,
    dist: Vec<f64>,
    next: Vec<u32>,
    direct: Vec<f64>,
}

/// Floyd-Warshall over the graph whose edges are pairs with `v^pi > 0`, weighted by
/// `-log v^pi`. Among equally short paths the one with fewest hops is kept.
pub fn exact_value_table(maze: &Maze, low: &dyn LowLevelValue) -> Result<ValueTable> {
    exact_value_table_with(Execution::default(), maze, low)
}

pub fn exact_value_table_with(exec: Execution, maze: &Maze, low: &dyn LowLevelValue) -> Result<ValueTable> {
    let cells = maze.empty_cells();
    let n = cells.len();
    if n > MAX_EXACT_CELLS {
        return Err(Error::InstanceTooLarge(n, MAX_EXACT_CELLS));
    }
    let mut index = vec![NO_HOP; maze.width() * maze.height()];
    for (i, s) in cells.iter().enumerate() {
        index[s.row() * maze.width() + s.col()] = i as u32;
    }
    let mut direct = vec![0.0; n * n];
    par::for_each_row_mut(exec, &mut direct, n.max(1), |i, row| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if i == j { 1.0 } else { low.value(maze, cells[i], cells[j]) };
        }
    });
    // Each row stores (distance, hops, next hop) so that rows can relax independently.
    let mut rows: Vec<(f64, u32, u32)> = vec![(f64::INFINITY, u32::MAX, NO_HOP); n * n];
    for i in 0..n {
        for j in 0..n {
            let v = direct[i * n + j];
            if i == j {
                rows[i * n + j] = (0.0, 0, j as u32);
            } else if v > 0.0 {
                rows[i * n + j] = (-v.ln(), 1, j as u32);
            }
        }
    }
    for k in 0..n {
        let row_k: Vec<(f64, u32, u32)> = rows[k * n..(k + 1) * n].to_vec();
        par::for_each_row_mut(exec, &mut rows, n.max(1), |i, row| {
            let (dik, hik, nik) = row[k];
            if i == k || nik == NO_HOP {
                return;
            }
            for j in 0..n {
                let (dkj, hkj, _) = row_k[j];
                if dkj == f64::INFINITY {
                    continue;
                }
                let d = dik + dkj;
                let h = hik + hkj;
                let cur = row[j];
                if d < cur.0 || (d == cur.0 && h < cur.1) {
                    row[j] = (d, h, nik);
                }
            }
        });
    }
    Ok(ValueTable {
        width: maze.width(),
        dist: rows.iter().map(|r| r.0).collect(),
        next: rows.iter().map(|r| r.2).collect(),
        cells,
        index,
        direct,
    })
}

impl ValueTable {
    pub fn cells(&self) -> &[StateId] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn index_of(&self, s: StateId) -> Option<usize> {
        if s.col() >= self.width {
            return None;
        }
        let i = *self.index.get(s.row() * self.width + s.col())?;
        (i != NO_HOP).then_some(i as usize)
    }

    fn idx(&self, s: StateId) -> usize {
        self.index_of(s).unwrap_or_else(|| panic!("{s} is not an empty cell of the table"))
    }

    /// `v*(s, s2)`; 0 when no plan reaches `s2`.
    pub fn value(&self, s: StateId, s2: StateId) -> f64 {
        self.value_at(self.idx(s), self.idx(s2))
    }

    pub fn value_at(&self, i: usize, j: usize) -> f64 {
        (-self.dist[i * self.cells.len() + j]).exp()
    }

    /// Low-level value `v^pi(s, s2)` the table was built from.
    pub fn direct(&self, s: StateId, s2: StateId) -> f64 {
        self.direct[self.idx(s) * self.cells.len() + self.idx(s2)]
    }

    /// States of a best plan from `s` to `s2`, or `None` if `v*(s, s2) = 0`.
    pub fn path(&self, s: StateId, s2: StateId) -> Option<Vec<StateId>> {
        let n = self.cells.len();
        let (mut i, j) = (self.idx(s), self.idx(s2));
        if self.next[i * n + j] == NO_HOP {
            return None;
        }
        let mut out = vec![s];
        while i != j {
            i = self.next[i * n + j] as usize;
            out.push(self.cells[i]);
        }
        Some(out)
    }

    /// Largest violation of `v*(s,s'') = max_{s'} v*(s,s') v*(s',s'')` over all pairs.
    pub fn bellman_residual(&self) -> f64 {
        let n = self.cells.len();
        let rows = par::map_range(Execution::default(), n, |i| {
            let mut worst: f64 = 0.0;
            for k in 0..n {
                let best = (0..n)
                    .map(|j| self.value_at(i, j) * self.value_at(j, k))
                    .fold(0.0, f64::max);
                worst = worst.max((self.value_at(i, k) - best).abs());
            }
            worst
        });
        rows.into_iter().fold(0.0, f64::max)
    }

    /// Matrix export: a `values v1 <n>` header, then one row per empty cell in
    /// row-major order with 9 decimal places.
    pub fn to_text(&self) -> String {
        let n = self.cells.len();
        let mut out = format!("values v1 {n}\n");
        for i in 0..n {
            let row: Vec<String> = (0..n).map(|j| format!("{:.9}", self.value_at(i, j))).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }
}

/// An optimal plan and whether any plan has non-zero value.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalPlan {
    pub plan: Plan,
    pub feasible: bool,
}

/// Reconstructs a plan achieving `v*(start, goal)`. Infeasible tasks get the direct
/// plan `(start, goal)`.
pub fn optimal_plan(task: &Task, table: &ValueTable, low: &dyn LowLevelValue) -> Result<OptimalPlan> {
    let (sigma, feasible) = match table.path(task.start, task.goal) {
        Some(p) => (p, true),
        None => (vec![task.start, task.goal], false),
    };
    let objective_l = plan_objective_with(low, task, &sigma)?;
    Ok(OptimalPlan {
        plan: Plan { sigma, objective_l },
        feasible,
    })
}

/// Exact value heuristic: `v(s, s'') = v*(s, s'')`.
#[derive(Clone, Copy, Debug)]
pub struct OracleValue<'a> {
    pub table: &'a ValueTable,
}

impl ValueEstimator for OracleValue<'_> {
    fn value(&self, _enc: &TaskEncoding, key: OrKey) -> f64 {
        self.table.value(key.s, key.s2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitRule {
    /// All mass on the middle state of a best plan.
    Balanced,
    /// All mass on the first step of a best plan.
    LeftFirst,
    /// Mass proportional to `v*(s,s') v*(s',s'')`, and to `v^pi(s,s'')` for `Null`.
    Proportional,
}

/// Exact prior built from a [`ValueTable`]. The one-hot rules put all mass on `Null`
/// when the direct sub-task is already optimal.
#[derive(Clone, Copy, Debug)]
pub struct OraclePrior<'a> {
    pub table: &'a ValueTable,
    pub rule: SplitRule,
}

impl PolicyPrior for OraclePrior<'_> {
    fn prior(&self, _enc: &TaskEncoding, key: OrKey, candidates: &[SubGoal]) -> Vec<f64> {
        let t = self.table;
        let target = match self.rule {
            SplitRule::Proportional => {
                let mut w: Vec<f64> = candidates
                    .iter()
                    .map(|c| match c {
                        SubGoal::Null => t.direct(key.s, key.s2),
                        SubGoal::State(m) => t.value(key.s, *m) * t.value(*m, key.s2),
                    })
                    .collect();
                let total: f64 = w.iter().sum();
                if total > 0.0 {
                    w.iter_mut().for_each(|x| *x /= total);
                    return w;
                }
                return crate::heuristics::uniform_prior(candidates.len());
            }
            rule => match t.path(key.s, key.s2) {
                Some(p) if p.len() > 2 && t.direct(key.s, key.s2) < t.value(key.s, key.s2) => {
                    let m = if rule == SplitRule::Balanced { (p.len() - 1) / 2 } else { 1 };
                    SubGoal::State(p[m])
                }
                _ => SubGoal::Null,
            },
        };
        let mut out: Vec<f64> = candidates.iter().map(|c| if *c == target { 1.0 } else { 0.0 }).collect();
        if out.iter().all(|x| *x == 0.0) {
            out = crate::heuristics::uniform_prior(candidates.len());
        }
        out
    }
}
