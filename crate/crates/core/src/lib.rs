//! Divide-and-conquer Monte Carlo tree search (DC-MCTS) for goal-directed planning.
//!
//! The planner searches over AND/OR trees of sub-goal decompositions: an OR node is a
//! sub-task `(s, s'')`, an AND node a split `(s, s', s'')` whose two halves must both be
//! solved. Plans are sequences of sub-goals handed to a goal-conditioned low-level policy.
//!
//! Modules:
//! - [`grid`]: procedural mazes, tasks, the myopic low-level policy and plan execution.
//! - [`tree`]: the AND/OR search-tree store.
//! - [`planner`]: the search loop, plan extraction and the sequential baseline.
//! - [`heuristics`]: policy priors, bootstrap values, the trainable model and training loop.
//! - [`oracle`]: exact values and plans used as independent ground truth.
//! - [`harness`]: experiment configuration, evaluation sweeps and metrics.
//! - [`par`]: data-parallel execution with a sequential fallback.

pub mod error;
pub mod grid;
pub mod harness;
pub mod heuristics;
pub mod oracle;
pub mod par;
pub mod planner;
pub mod rng;
pub mod tree;

pub use error::{Error, Result};
pub use grid::{Maze, StateId, Task};
pub use planner::{run_search, Mode, Plan, PlanResult, PlannerConfig};
pub use tree::{AndKey, OrKey, SearchTree, SubGoal};


