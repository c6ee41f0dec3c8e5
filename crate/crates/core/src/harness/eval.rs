use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grid::{execute_plan, generate_maze, sample_task, StepLimit, Task};
use crate::heuristics::{HeuristicPair, TrainableModel};
use crate::par::{self, Execution};
use crate::planner::{run_search, PlannerConfig};
use crate::rng::{derive_rng, derive_seed, Stream};

/// The evaluation task distribution. Task `i` depends only on `seed` and `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub width: usize,
    pub height: usize,
    pub density: f64,
    pub tasks: usize,
    pub seed: u64,
    pub step_limit: StepLimit,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            width: 11,
            height: 11,
            density: 0.75,
            tasks: 200,
            seed: 1_000_003,
            step_limit: StepLimit::default(),
        }
    }
}

impl EvalConfig {
    pub fn task(&self, i: usize) -> Result<Task> {
        let maze = generate_maze(
            self.width,
            self.height,
            self.density,
            derive_seed(self.seed, Stream::EvalMaze, i as u64),
        )?;
        sample_task(&maze, derive_seed(self.seed, Stream::EvalTask, i as u64))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskOutcome {
    pub index: usize,
    pub solved: bool,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub plan_length: usize,
    pub budget: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mode: String,
    pub budget: usize,
    pub tasks: usize,
    pub solved: usize,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_l: f64,
    pub mean_plan_length: f64,
}

impl EvalSummary {
    pub fn from_outcomes(mode: &str, budget: usize, outcomes: &[TaskOutcome]) -> Self {
        let n = outcomes.len();
        let solved = outcomes.iter().filter(|o| o.solved).count();
        let (ci_low, ci_high) = wilson_interval(solved, n, 1.96);
        let mean = |f: &dyn Fn(&TaskOutcome) -> f64| {
            if n == 0 {
                0.0
            } else {
                outcomes.iter().map(f).sum::<f64>() / n as f64
            }
        };
        EvalSummary {
            mode: mode.to_string(),
            budget,
            tasks: n,
            solved,
            fraction: if n == 0 { 0.0 } else { solved as f64 / n as f64 },
            ci_low,
            ci_high,
            mean_l: mean(&|o| o.l),
            mean_plan_length: mean(&|o| o.plan_length as f64),
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "mode {} budget {} solved {}/{} fraction {:.4} ci95 [{:.4}, {:.4}] mean_L {:.4} mean_plan_length {:.2}",
            self.mode,
            self.budget,
            self.solved,
            self.tasks,
            self.fraction,
            self.ci_low,
            self.ci_high,
            self.mean_l,
            self.mean_plan_length
        )
    }
}

/// Wilson score interval for `k` successes in `n` trials at normal quantile `z`.
/// Returns `(0, 1)` when `n` is zero.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Plans and executes evaluation task `i`. `model = None` uses the uniform prior and
/// zero value.
pub fn evaluate_task(
    model: Option<&TrainableModel>,
    planner: &PlannerConfig,
    eval: &EvalConfig,
    i: usize,
) -> Result<TaskOutcome> {
    let task = eval.task(i)?;
    let config = PlannerConfig {
        seed: derive_seed(eval.seed ^ planner.seed, Stream::EvalSearch, i as u64),
        ..planner.clone()
    };
    let heuristics = match model {
        Some(m) => HeuristicPair::from_model(m),
        None => HeuristicPair::untrained(),
    };
    let result = run_search(&task, heuristics, &config)?;
    let mut rng = derive_rng(eval.seed, Stream::EvalExecute, i as u64);
    let traj = execute_plan(&mut rng, &task, &result.plan.sigma, eval.step_limit.resolve(&task));
    Ok(TaskOutcome {
        index: i,
        solved: traj.reached_goal,
        l: result.plan.objective_l,
        g: result.root_g(),
        plan_length: result.plan.len(),
        budget: result.budget_used,
    })
}

pub fn evaluate_outcomes(
    exec: Execution,
    model: Option<&TrainableModel>,
    planner: &PlannerConfig,
    eval: &EvalConfig,
) -> Result<Vec<TaskOutcome>> {
    par::map_range(exec, eval.tasks, |i| evaluate_task(model, planner, eval, i))
        .into_iter()
        .collect()
}

/// Solve fraction of `planner` (with `model`, or untrained) over the evaluation tasks.
pub fn evaluate(
    exec: Execution,
    model: Option<&TrainableModel>,
    planner: &PlannerConfig,
    eval: &EvalConfig,
) -> Result<EvalSummary> {
    let outcomes = evaluate_outcomes(exec, model, planner, eval)?;
    Ok(EvalSummary::from_outcomes(planner.mode.name(), planner.budget, &outcomes))
}

/// One evaluation per budget on the same task set and seeds.
pub fn budget_sweep(
    exec: Execution,
    model: Option<&TrainableModel>,
    planner: &PlannerConfig,
    eval: &EvalConfig,
    budgets: &[usize],
) -> Result<Vec<EvalSummary>> {
    budgets
        .iter()
        .map(|&budget| {
            let p = PlannerConfig {
                budget,
                ..planner.clone()
            };
            evaluate(exec, model, &p, eval)
        })
        .collect()
}

/// `n` exploration constants drawn uniformly from `[3, 7]`.
pub fn c_puct_samples(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = derive_rng(seed, Stream::Hyper, 0);
    (0..n).map(|_| rng.random_range(3.0..=7.0)).collect()
}
