//! Experiment orchestration: configuration files, training runs with checkpoints,
//! evaluation with confidence intervals, comparison tables and plan rendering.

mod compare;
mod config;
mod eval;
pub mod metrics;
mod render;
mod run;

pub use compare::{compare_budgets, compare_runs, table_from_series, Method, Table};
pub use config::{ExperimentConfig, ENV_PREFIX};
pub use eval::{
    budget_sweep, c_puct_samples, evaluate, evaluate_outcomes, evaluate_task, wilson_interval, EvalConfig,
    EvalSummary, TaskOutcome,
};
pub use metrics::{validate_file, validate_text, EvalRecord, FileKind, MetricsRecord};
pub use render::{render_plan, subgoal_depths, TOKEN_WIDTH};
pub use run::{run_experiment, RunDir, RunEvent, RunOutcome};
