#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use dcmcts::grid::{
    encode_task, generate_maze, sample_task, LowLevelPolicy, LowLevelValue, Maze, StateId, Task, TaskEncoding,
};
use dcmcts::heuristics::model::{encoding_candidates, PriorExample, ValueExample};
use dcmcts::heuristics::{Batch, PriorEntry, PriorTarget, TrainableModel, ValueEntry};
use dcmcts::planner::{plan_objective_with, Mode, PlanResult};
use dcmcts::rng::rng_from_seed;
use dcmcts::tree::{OrKey, SubGoal};
use rand::Rng;

pub fn st(r: usize, c: usize) -> StateId {
    StateId::new(r, c)
}

pub fn small_task(width: usize, height: usize, density: f64, seed: u64) -> Task {
    let maze = generate_maze(width, height, density, seed).unwrap();
    sample_task(&maze, seed ^ 0x5eed).unwrap()
}

/// Max-product value iteration over all pairs, written independently of the library's
/// shortest-path oracle: `v(s,t) = max(v^pi(s,t), max_m v(s,m) v(m,t))` to a fixed point.
pub fn brute_values(maze: &Maze, low: &dyn LowLevelValue) -> (Vec<StateId>, Vec<f64>) {
    let cells = maze.empty_cells();
    let n = cells.len();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            v[i * n + j] = if i == j { 1.0 } else { low.value(maze, cells[i], cells[j]) };
        }
    }
    loop {
        let mut changed = false;
        for i in 0..n {
            for k in 0..n {
                let mut best = v[i * n + k];
                for j in 0..n {
                    best = best.max(v[i * n + j] * v[j * n + k]);
                }
                if best > v[i * n + k] + 1e-15 {
                    v[i * n + k] = best;
                    changed = true;
                }
            }
        }
        if !changed {
            return (cells, v);
        }
    }
}

pub fn brute_value(maze: &Maze, low: &dyn LowLevelValue, s: StateId, t: StateId) -> f64 {
    let (cells, v) = brute_values(maze, low);
    let i = cells.iter().position(|&c| c == s).unwrap();
    let k = cells.iter().position(|&c| c == t).unwrap();
    v[i * cells.len() + k]
}

/// Checks the arithmetic of every traversal recorded in `r.trace` and the final tree
/// bookkeeping. The search must have been run with `trace = true`.
pub fn check_search(task: &Task, low: &dyn LowLevelValue, r: &PlanResult, budget: usize) -> Result<(), String> {
    let tree = &r.tree;
    let mut seen: HashMap<OrKey, (usize, f64)> = HashMap::new();
    for (step, ev) in r.trace.iter().enumerate() {
        if ev.g < ev.v_pi {
            return Err(format!("event {step}: G {} below v_pi {}", ev.g, ev.v_pi));
        }
        if !(0.0..=1.0).contains(&ev.g) || !(0.0..=1.0).contains(&ev.value) {
            return Err(format!("event {step}: value out of range"));
        }
        let e = seen.entry(ev.key).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += ev.g;
        if ev.visits as usize != e.0 {
            return Err(format!("event {step}: visits {} after {} updates", ev.visits, e.0));
        }
        let mean = e.1 / e.0 as f64;
        if (ev.value - mean).abs() > 1e-12 {
            return Err(format!("event {step}: running average {} vs direct mean {mean}", ev.value));
        }
    }
    let expanded = tree.or_nodes().filter(|n| n.expanded).count();
    if tree.budget_used() != expanded || r.budget_used != expanded {
        return Err(format!("budget_used {} but {} expanded nodes", tree.budget_used(), expanded));
    }
    if expanded > budget {
        return Err(format!("{expanded} expansions exceed budget {budget}"));
    }
    let n_cand = tree.candidates().len();
    for node in tree.or_nodes() {
        let updates = seen.get(&node.key).map_or(0, |e| e.0);
        if node.visits as usize != updates {
            return Err(format!("{}: N {} but {} updates", node.key, node.visits, updates));
        }
        let and_sum: u32 = (0..n_cand).map(|c| node.and_visits(c)).sum();
        if and_sum != node.visits {
            return Err(format!("{}: AND visits sum {} != N {}", node.key, and_sum, node.visits));
        }
        if node.visits == 0 && node.value != node.v_pi.max(node.v_boot) {
            return Err(format!("{}: unvisited node value is not its initialization", node.key));
        }
        if (node.prior.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(format!("{}: prior does not sum to one", node.key));
        }
        if r.mode == Mode::SequentialRight && node.key.s2 != task.goal {
            return Err(format!("sequential search expanded a left sub-task {}", node.key));
        }
    }
    let l = plan_objective_with(low, task, &r.plan.sigma).map_err(|e| e.to_string())?;
    if (l - r.plan.objective_l).abs() > 1e-12 {
        return Err(format!("stored L {} vs recomputed {l}", r.plan.objective_l));
    }
    let leaves: f64 = r.solution_tree.leaves().iter().map(|n| n.v_pi).product();
    if (leaves - l).abs() > 1e-12 {
        return Err(format!("leaf product {leaves} vs L {l}"));
    }
    if !(r.plan.objective_l <= r.root_g() + 1e-12 && r.root_g() <= 1.0) {
        return Err(format!("bound chain violated: L {} G {}", r.plan.objective_l, r.root_g()));
    }
    if r.solution_tree.plan_states() != r.plan.sigma {
        return Err("solution tree leaves do not concatenate to the plan".into());
    }
    if r.plan.sigma.first() != Some(&task.start) || r.plan.sigma.last() != Some(&task.goal) {
        return Err("plan does not run from start to goal".into());
    }
    if r.mode == Mode::SequentialRight {
        for n in &r.solution_tree.nodes {
            if let Some(l) = n.left {
                if !r.solution_tree.nodes[l].is_leaf() {
                    return Err("sequential solution tree has an internal left child".into());
                }
            }
        }
    }
    for n in &r.solution_tree.nodes {
        if n.is_leaf() != (n.subgoal == SubGoal::Null || n.right.is_none()) {
            return Err("solution node children disagree with its sub-goal".into());
        }
    }
    Ok(())
}

/// Deterministic pseudo-random low-level values: `1` on the diagonal, otherwise zero for
/// about a third of the pairs and a value in `[0, 1)` for the rest.
#[derive(Clone, Copy, Debug)]
pub struct HashedValue {
    pub seed: u64,
}

impl LowLevelValue for HashedValue {
    fn value(&self, _maze: &Maze, s: StateId, s2: StateId) -> f64 {
        if s == s2 {
            return 1.0;
        }
        let key = ((s.row() as u64) << 48) | ((s.col() as u64) << 32) | ((s2.row() as u64) << 16) | s2.col() as u64;
        let h = dcmcts::rng::splitmix64(key ^ self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        if h.is_multiple_of(3) {
            0.0
        } else {
            (h >> 11) as f64 / (1u64 << 53) as f64
        }
    }
}

/// One randomized search scenario for the traversal bookkeeping checks.
#[derive(Clone, Debug)]
pub struct ArithCase {
    pub width: usize,
    pub height: usize,
    pub density: f64,
    pub seed: u64,
    pub budget: usize,
    pub max_depth: usize,
    pub c_puct: f64,
    pub mode: Mode,
    /// 0: uniform prior, zero value. 1: exact proportional prior and exact value.
    /// 2: uniform prior and hashed low-level values.
    pub heuristics: u8,
}

pub fn arith_case() -> impl proptest::strategy::Strategy<Value = ArithCase> {
    use proptest::prelude::*;
    (
        5usize..8,
        3usize..8,
        0.0f64..=1.0,
        any::<u64>(),
        1usize..60,
        1usize..9,
        0.0f64..8.0,
        0usize..5,
        0u8..3,
    )
        .prop_map(|(width, height, density, seed, budget, max_depth, c_puct, mode, heuristics)| ArithCase {
            width,
            height,
            density,
            seed,
            budget,
            max_depth,
            c_puct,
            mode: Mode::ALL[mode],
            heuristics,
        })
}

pub fn run_arith_case(case: &ArithCase) -> Result<(), String> {
    use dcmcts::heuristics::{HeuristicPair, UniformPrior, ZeroValue};
    use dcmcts::oracle::{exact_value_table, OraclePrior, OracleValue, SplitRule};
    use dcmcts::planner::{run_search_with, PlannerConfig};

    let maze = generate_maze(case.width, case.height, case.density, case.seed).map_err(|e| e.to_string())?;
    let task = sample_task(&maze, case.seed.rotate_left(17)).map_err(|e| e.to_string())?;
    let hashed = HashedValue { seed: case.seed };
    let low: &dyn LowLevelValue = if case.heuristics == 2 { &hashed } else { &dcmcts::grid::Pi0 };
    let table = exact_value_table(&task.maze, low).map_err(|e| e.to_string())?;
    let prior = OraclePrior {
        table: &table,
        rule: SplitRule::Proportional,
    };
    let value = OracleValue { table: &table };
    let h = match case.heuristics {
        1 => HeuristicPair::new(&prior, &value),
        _ => HeuristicPair::new(&UniformPrior, &ZeroValue),
    };
    let cfg = PlannerConfig {
        budget: case.budget,
        max_depth: case.max_depth,
        c_puct: case.c_puct,
        mode: case.mode,
        seed: case.seed,
        trace: true,
        ..PlannerConfig::default()
    };
    let r = run_search_with(&task, low, h, &cfg).map_err(|e| e.to_string())?;
    check_search(&task, low, &r, case.budget)?;
    if r.budget_used == 0 || (r.budget_used < case.budget && r.stats.traversals < cfg.stall_limit) {
        return Err(format!("search stopped early: {} of {} after {} traversals", r.budget_used, case.budget, r.stats.traversals));
    }
    Ok(())
}

/// Probability that `policy` started at `s` visits `t` within `h` steps, by recursion
/// over the policy's transition lists.
pub fn hop_value(maze: &Maze, policy: &dyn LowLevelPolicy, s: StateId, t: StateId, h: usize) -> f64 {
    fn go(
        maze: &Maze,
        policy: &dyn LowLevelPolicy,
        s: StateId,
        t: StateId,
        h: usize,
        memo: &mut HashMap<(StateId, usize), f64>,
    ) -> f64 {
        if s == t {
            return 1.0;
        }
        if h == 0 {
            return 0.0;
        }
        if let Some(&v) = memo.get(&(s, h)) {
            return v;
        }
        let v = policy
            .transitions(maze, s, t)
            .into_iter()
            .map(|(x, p)| p * go(maze, policy, x, t, h - 1, memo))
            .sum();
        memo.insert((s, h), v);
        v
    }
    go(maze, policy, s, t, h, &mut HashMap::new())
}

/// Probability that executing `sigma` reaches the goal within `limit` steps. The policy
/// pursues the first sub-goal not yet reached; reaching the goal at any time succeeds.
pub fn plan_success_by_enumeration(task: &Task, policy: &dyn LowLevelPolicy, sigma: &[StateId], limit: usize) -> f64 {
    fn go(
        task: &Task,
        policy: &dyn LowLevelPolicy,
        sigma: &[StateId],
        pos: StateId,
        mut k: usize,
        left: usize,
        memo: &mut HashMap<(StateId, usize, usize), f64>,
    ) -> f64 {
        if pos == task.goal {
            return 1.0;
        }
        while k < sigma.len() && sigma[k] == pos {
            k += 1;
        }
        if left == 0 || k == sigma.len() {
            return 0.0;
        }
        if let Some(&v) = memo.get(&(pos, k, left)) {
            return v;
        }
        let v = policy
            .transitions(&task.maze, pos, sigma[k])
            .into_iter()
            .map(|(x, p)| p * go(task, policy, sigma, x, k, left - 1, memo))
            .sum();
        memo.insert((pos, k, left), v);
        v
    }
    go(task, policy, sigma, task.start, 1, limit, &mut HashMap::new())
}

/// A batch of `n` random prior and value examples on small mazes.
pub fn example_batch(seed: u64, n: usize) -> (Vec<Arc<TaskEncoding>>, Batch) {
    let mut rng = rng_from_seed(seed);
    let mut prior = Vec::new();
    let mut value = Vec::new();
    let mut encs = Vec::new();
    for i in 0..n {
        let task = small_task(7, 7, 0.7, seed + i as u64);
        let enc = Arc::new(encode_task(&task));
        let cells = task.maze.empty_cells();
        let a = cells[rng.random_range(0..cells.len())];
        let b = cells[rng.random_range(0..cells.len())];
        let key = OrKey::new(a, b);
        let cands = encoding_candidates(&enc);
        let k = rng.random_range(1..cands.len());
        let w: Vec<(usize, f64)> = (0..k).map(|_| (rng.random_range(0..cands.len()), rng.random::<f64>())).collect();
        let total: f64 = w.iter().map(|x| x.1).sum();
        prior.push(PriorEntry {
            enc: enc.clone(),
            key,
            target: PriorTarget::Dist(w.into_iter().map(|(c, p)| (c, p / total)).collect()),
        });
        value.push(ValueEntry { enc: enc.clone(), key, target: rng.random() });
        encs.push(enc);
    }
    (encs, Batch { prior, value })
}

pub fn batch_losses(model: &TrainableModel, batch: &Batch) -> (f64, f64, Vec<f64>) {
    let targets: Vec<Vec<(usize, f64)>> = batch.prior.iter().map(|e| e.sparse_target().unwrap()).collect();
    let prior: Vec<PriorExample<'_>> = batch
        .prior
        .iter()
        .zip(&targets)
        .map(|(e, t)| PriorExample { enc: &e.enc, key: e.key, target: t })
        .collect();
    let value: Vec<ValueExample<'_>> = batch
        .value
        .iter()
        .map(|e| ValueExample { enc: &e.enc, key: e.key, target: e.target })
        .collect();
    model.loss_and_grad(&prior, &value)
}

/// Largest relative error between the analytic gradient and central differences.
pub fn gradient_error(model: &TrainableModel, batch: &Batch, coords: &[usize]) -> f64 {
    let (_, _, grad) = batch_losses(model, batch);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for &i in coords {
        let mut m = model.clone();
        m.params_mut()[i] += h;
        let (p1, v1, _) = batch_losses(&m, batch);
        m.params_mut()[i] -= 2.0 * h;
        let (p0, v0, _) = batch_losses(&m, batch);
        let fd = (p1 + v1 - p0 - v0) / (2.0 * h);
        let err = (fd - grad[i]).abs() / (fd.abs() + grad[i].abs()).max(1e-6);
        worst = worst.max(err);
    }
    worst
}
