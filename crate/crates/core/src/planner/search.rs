use rand::{Rng, RngCore};

use super::{Mode, Plan, PlanResult, PlannerConfig, TreeStats, UpdateEvent};
use crate::error::Result;
use crate::grid::{encode_task, LowLevelValue, Pi0, StateId, Task, TaskEncoding};
use crate::heuristics::HeuristicPair;
use crate::par::{self, Execution};
use crate::rng::rng_from_seed;
use crate::tree::{AndKey, OrKey, SearchTree};

/// Inputs of the selection score for one candidate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChildScore {
    /// `V(s, s') * V(s', s'')`, or `v^pi(s, s'')` for `Null`.
    pub product: f64,
    pub prior: f64,
    pub visits: u32,
    pub eligible: bool,
}

/// `V(s,s') V(s',s'') + c p(s'|s,s'') sqrt(N(s,s'')) / (1 + N(s,s',s''))`.
pub fn puct_score(product: f64, prior: f64, parent_visits: u32, child_visits: u32, c_puct: f64) -> f64 {
    product + c_puct * prior * (parent_visits as f64).sqrt() / (1.0 + child_visits as f64)
}

/// Index of the eligible child with the highest score. Ties go to the higher prior,
/// remaining ties are broken uniformly at random.
pub fn select_child<R: Rng + ?Sized>(
    parent_visits: u32,
    children: &[ChildScore],
    c_puct: f64,
    rng: &mut R,
) -> Option<usize> {
    let mut best = f64::NEG_INFINITY;
    let mut best_prior = f64::NEG_INFINITY;
    let mut ties: Vec<usize> = Vec::new();
    for (i, ch) in children.iter().enumerate() {
        if !ch.eligible {
            continue;
        }
        let score = puct_score(ch.product, ch.prior, parent_visits, ch.visits, c_puct);
        if score > best || (score == best && ch.prior > best_prior) {
            best = score;
            best_prior = ch.prior;
            ties.clear();
            ties.push(i);
        } else if score == best && ch.prior == best_prior {
            ties.push(i);
        }
    }
    match ties.len() {
        0 => None,
        1 => Some(ties[0]),
        n => Some(ties[rng.random_range(0..n)]),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchStats {
    pub value: f64,
    pub visits: u32,
}

/// Picks the half of a split to search in the descend modes.
///
/// The two-way UCT rule scores each half by `(1 - V) + c sqrt(ln(1 + N_l + N_r) / (1 + N))`,
/// favouring the weaker and less visited half. Value ties in the lower-value and UCT rules
/// are broken at random. Non-descend modes always return `Left`.
pub fn descend_one<R: Rng + ?Sized>(
    mode: Mode,
    left: BranchStats,
    right: BranchStats,
    c: f64,
    rng: &mut R,
) -> Branch {
    let pick = |l: f64, r: f64, rng: &mut R| {
        if l > r {
            Branch::Left
        } else if r > l {
            Branch::Right
        } else if rng.random_bool(0.5) {
            Branch::Left
        } else {
            Branch::Right
        }
    };
    match mode {
        Mode::DescendLowerValue => pick(right.value, left.value, rng),
        Mode::DescendTwoWayUct => {
            let total = (1.0 + left.visits as f64 + right.visits as f64).ln();
            let score = |b: BranchStats| (1.0 - b.value) + c * (total / (1.0 + b.visits as f64)).sqrt();
            pick(score(left), score(right), rng)
        }
        _ => Branch::Left,
    }
}

/// Lazily filled `n x n` tables of low-level and bootstrap values; NaN marks a pair not
/// computed yet.
#[derive(Clone, Debug)]
pub(crate) struct ValueCache {
    n: usize,
    vpi: Vec<f64>,
    boot: Vec<f64>,
}

impl ValueCache {
    fn new(n: usize) -> Self {
        ValueCache {
            n,
            vpi: vec![f64::NAN; n * n],
            boot: vec![f64::NAN; n * n],
        }
    }

    pub(crate) fn cached_vpi(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.vpi[i * self.n + j];
        (!v.is_nan()).then_some(v)
    }

    pub(crate) fn cached_boot(&self, i: usize, j: usize) -> Option<f64> {
        let v = self.boot[i * self.n + j];
        (!v.is_nan()).then_some(v)
    }
}

pub(super) struct Search<'a> {
    pub(super) task: &'a Task,
    enc: TaskEncoding,
    low: &'a dyn LowLevelValue,
    h: HeuristicPair<'a>,
    pub(super) cfg: &'a PlannerConfig,
    pub(super) tree: SearchTree,
    pub(super) cache: ValueCache,
    pub(super) cells: Vec<StateId>,
    scratch: Vec<ChildScore>,
    prefetched: Vec<(OrKey, Vec<f64>)>,
    trace: Vec<UpdateEvent>,
}

impl<'a> Search<'a> {
    fn new(task: &'a Task, low: &'a dyn LowLevelValue, h: HeuristicPair<'a>, cfg: &'a PlannerConfig) -> Result<Self> {
        cfg.validate()?;
        let tree = SearchTree::new(&task.maze, OrKey::new(task.start, task.goal), cfg.budget, cfg.max_depth)?;
        let cells = task.maze.empty_cells();
        Ok(Search {
            enc: encode_task(task),
            task,
            low,
            h,
            cfg,
            cache: ValueCache::new(cells.len()),
            tree,
            cells,
            scratch: Vec::new(),
            prefetched: Vec::new(),
            trace: Vec::new(),
        })
    }

    fn key(&self, i: usize, k: usize) -> OrKey {
        OrKey::new(self.cells[i], self.cells[k])
    }

    pub(super) fn vpi(&mut self, i: usize, k: usize) -> f64 {
        let slot = i * self.cells.len() + k;
        let v = self.cache.vpi[slot];
        if !v.is_nan() {
            return v;
        }
        let v = self.low.value(&self.task.maze, self.cells[i], self.cells[k]);
        self.cache.vpi[slot] = v;
        v
    }

    /// `max(v^pi, v)` for a sub-task, computed without consuming budget.
    fn boot(&mut self, i: usize, k: usize) -> f64 {
        let slot = i * self.cells.len() + k;
        let v = self.cache.boot[slot];
        if !v.is_nan() {
            return v;
        }
        let vb = self.h.value.value(&self.enc, self.key(i, k)).clamp(0.0, 1.0);
        let v = self.vpi(i, k).max(vb);
        self.cache.boot[slot] = v;
        v
    }

    /// Current estimate `V` of a sub-task: the node statistic if expanded, else the
    /// bootstrap value.
    pub(super) fn child_value(&mut self, i: usize, k: usize) -> f64 {
        match self.tree.node_index_by_states(i, k) {
            Some(idx) => self.tree.node_at(idx).value,
            None => self.boot(i, k),
        }
    }

    fn child_visits(&self, i: usize, k: usize) -> u32 {
        self.tree
            .node_index_by_states(i, k)
            .map_or(0, |idx| self.tree.node_at(idx).visits)
    }

    /// Value product of splitting `(i, k)` at candidate `c` (0 is `Null`).
    pub(super) fn product(&mut self, i: usize, k: usize, c: usize) -> f64 {
        if c == 0 {
            return self.vpi(i, k);
        }
        let j = c - 1;
        let left = match self.cfg.mode {
            Mode::SequentialRight => self.vpi(i, j),
            _ => self.child_value(i, j),
        };
        if left == 0.0 {
            return 0.0;
        }
        left * self.child_value(j, k)
    }

    fn expand(&mut self, i: usize, k: usize) -> Option<f64> {
        if self.tree.budget_left() == 0 {
            return None;
        }
        let key = self.key(i, k);
        let prior = match self.prefetched.iter().position(|(k2, _)| *k2 == key) {
            Some(p) => self.prefetched.swap_remove(p).1,
            None => self.h.prior.prior(&self.enc, key, self.tree.candidates()),
        };
        let v_pi = self.vpi(i, k);
        let v_boot = self.h.value.value(&self.enc, key).clamp(0.0, 1.0);
        Some(
            self.tree
                .expand_node(key, v_pi, v_boot, prior)
                .expect("fresh node within budget"),
        )
    }

    /// Computes the priors of two fresh sub-tasks concurrently ahead of their expansion.
    fn prefetch(&mut self, a: (usize, usize), b: (usize, usize)) {
        let (ka, kb) = (self.key(a.0, a.1), self.key(b.0, b.1));
        if ka == kb
            || self.tree.budget_left() < 2
            || self.tree.node_index_by_states(a.0, a.1).is_some()
            || self.tree.node_index_by_states(b.0, b.1).is_some()
        {
            return;
        }
        let (h, enc, cands) = (self.h, &self.enc, self.tree.candidates());
        let (pa, pb) = par::join(
            Execution::Parallel,
            || h.prior.prior(enc, ka, cands),
            || h.prior.prior(enc, kb, cands),
        );
        self.prefetched.push((ka, pa));
        self.prefetched.push((kb, pb));
    }

    fn select(&mut self, idx: usize, i: usize, k: usize, rng: &mut dyn RngCore) -> usize {
        let n = self.tree.candidates().len();
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.clear();
        for c in 0..n {
            let eligible = c == 0 || (c - 1 != i && c - 1 != k);
            let product = if eligible { self.product(i, k, c) } else { 0.0 };
            let node = self.tree.node_at(idx);
            scratch.push(ChildScore {
                product,
                prior: node.prior[c],
                visits: node.and_visits(c),
                eligible,
            });
        }
        let visits = self.tree.node_at(idx).visits;
        let c = select_child(visits, &scratch, self.cfg.c_puct, rng).expect("Null is always eligible");
        self.scratch = scratch;
        c
    }

    fn traverse(&mut self, i: usize, k: usize, depth: usize, rng: &mut dyn RngCore) -> f64 {
        let Some(idx) = self.tree.node_index_by_states(i, k) else {
            return match self.expand(i, k) {
                Some(v) => v,
                None => self.boot(i, k),
            };
        };
        let key = self.key(i, k);
        let c = self.select(idx, i, k, rng);
        self.tree
            .touch_and_node(AndKey::new(key, self.tree.candidates()[c]))
            .expect("parent is expanded");
        let v_pi = self.vpi(i, k);
        let g = if c == 0 || depth >= self.cfg.max_depth {
            v_pi
        } else {
            let j = c - 1;
            match self.cfg.mode {
                Mode::DivideAndConquer => {
                    if self.cfg.parallel_and {
                        self.prefetch((i, j), (j, k));
                    }
                    let gl = self.traverse(i, j, depth + 1, rng);
                    let gr = self.traverse(j, k, depth + 1, rng);
                    self.prefetched.clear();
                    gl * gr
                }
                Mode::SequentialRight => {
                    let gl = self.vpi(i, j);
                    gl * self.traverse(j, k, depth + 1, rng)
                }
                mode => {
                    let left = BranchStats {
                        value: self.child_value(i, j),
                        visits: self.child_visits(i, j),
                    };
                    let right = BranchStats {
                        value: self.child_value(j, k),
                        visits: self.child_visits(j, k),
                    };
                    match descend_one(mode, left, right, self.cfg.two_way_c, rng) {
                        Branch::Left => {
                            let gl = self.traverse(i, j, depth + 1, rng);
                            gl * self.child_value(j, k)
                        }
                        Branch::Right => {
                            let gr = self.traverse(j, k, depth + 1, rng);
                            self.child_value(i, j) * gr
                        }
                    }
                }
            }
        };
        let g = g.max(v_pi);
        let (value, visits) = self.tree.update_or_stats(key, g).expect("node is expanded");
        if self.cfg.trace {
            self.trace.push(UpdateEvent {
                key,
                depth,
                g,
                v_pi,
                value,
                visits,
            });
        }
        g
    }

    fn run(mut self) -> PlanResult {
        let mut rng = rng_from_seed(self.cfg.seed);
        let root = self.tree.root();
        let si = self.tree.state_index(root.s).expect("validated");
        let gi = self.tree.state_index(root.s2).expect("validated");
        let mut root_returns = Vec::new();
        let mut traversals = 0;
        let mut stalls = 0;
        while self.tree.budget_left() > 0 && stalls < self.cfg.stall_limit {
            let before = self.tree.budget_used();
            let root_expanded = self.tree.contains(root);
            let g = self.traverse(si, gi, 0, &mut rng);
            traversals += 1;
            if root_expanded {
                root_returns.push(g);
            }
            if self.tree.budget_used() == before {
                stalls += 1;
            } else {
                stalls = 0;
            }
        }
        let solution_tree = self.extract(si, gi);
        let sigma = solution_tree.plan_states();
        let objective_l = solution_tree.leaves().iter().map(|l| l.v_pi).product();
        let root_node = self.tree.node(root).expect("root expanded by the first traversal");
        let stats = TreeStats {
            or_nodes: self.tree.len(),
            and_nodes: self.tree.and_nodes().len(),
            traversals,
            root_value: root_node.value,
            root_visits: root_node.visits,
        };
        PlanResult {
            mode: self.cfg.mode,
            plan: Plan { sigma, objective_l },
            solution_tree,
            budget_used: self.tree.budget_used(),
            stats,
            root_returns,
            trace: self.trace,
            tree: self.tree,
            cache: self.cache,
        }
    }
}

/// Runs the configured search with the myopic low-level policy.
pub fn run_search(task: &Task, heuristics: HeuristicPair<'_>, config: &PlannerConfig) -> Result<PlanResult> {
    run_search_with(task, &Pi0, heuristics, config)
}

/// Runs the search in [`Mode::SequentialRight`], whatever mode `config` names.
pub fn run_search_sequential(task: &Task, heuristics: HeuristicPair<'_>, config: &PlannerConfig) -> Result<PlanResult> {
    let config = PlannerConfig {
        mode: Mode::SequentialRight,
        ..config.clone()
    };
    run_search_with(task, &Pi0, heuristics, &config)
}

/// Traverses from the root until the budget is spent or `stall_limit` consecutive
/// traversals expand nothing, then extracts a plan.
pub fn run_search_with(
    task: &Task,
    low: &dyn LowLevelValue,
    heuristics: HeuristicPair<'_>,
    config: &PlannerConfig,
) -> Result<PlanResult> {
    Ok(Search::new(task, low, heuristics, config)?.run())
}
