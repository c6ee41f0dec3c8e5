//! Search heuristics: the policy prior `p(s' | s, s'')` over candidate sub-goals and the
//! bootstrap value `v(s, s'')`, plus the trainable model and its training loop.

pub mod her;
pub mod model;
pub mod replay;
pub mod targets;
pub mod train;

use crate::grid::TaskEncoding;
use crate::tree::{OrKey, SubGoal};

pub use her::{parse_trajectory, HerParserKind, Triplet};
pub use model::{Features, Optimizer, TrainableModel};
pub use replay::{PriorEntry, PriorTarget, ReplayBuffer, ValueEntry};
pub use targets::{normalize_products, prior_targets_from_tree, value_targets_from_result};
pub use train::{executed_outcome, train_step, training_loop, Batch, EpisodeRecord, TrainConfig, Trainer};

/// Proposal distribution over candidate sub-goals (including `Null`) for a sub-task.
pub trait PolicyPrior: Sync {
    /// One non-negative weight per entry of `candidates`, summing to 1.
    fn prior(&self, enc: &TaskEncoding, key: OrKey, candidates: &[SubGoal]) -> Vec<f64>;
}

/// Estimate of the high-level value `v*(s, s'')`, in `[0, 1]`.
pub trait ValueEstimator: Sync {
    fn value(&self, enc: &TaskEncoding, key: OrKey) -> f64;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct UniformPrior;

impl PolicyPrior for UniformPrior {
    fn prior(&self, _enc: &TaskEncoding, _key: OrKey, candidates: &[SubGoal]) -> Vec<f64> {
        uniform_prior(candidates.len())
    }
}

pub fn uniform_prior(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroValue;

impl ValueEstimator for ZeroValue {
    fn value(&self, _enc: &TaskEncoding, _key: OrKey) -> f64 {
        0.0
    }
}

/// The prior and value consulted by one search.
#[derive(Clone, Copy)]
pub struct HeuristicPair<'a> {
    pub prior: &'a dyn PolicyPrior,
    pub value: &'a dyn ValueEstimator,
}

impl<'a> HeuristicPair<'a> {
    pub fn new(prior: &'a dyn PolicyPrior, value: &'a dyn ValueEstimator) -> Self {
        HeuristicPair { prior, value }
    }

    /// Uniform prior and zero value.
    pub fn untrained() -> HeuristicPair<'static> {
        HeuristicPair {
            prior: &UniformPrior,
            value: &ZeroValue,
        }
    }

    pub fn from_model(model: &'a TrainableModel) -> Self {
        HeuristicPair {
            prior: model,
            value: model,
        }
    }
}

impl std::fmt::Debug for HeuristicPair<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("HeuristicPair")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{encode_task, Maze, StateId, Task};

    #[test]
    fn uniform_sums_to_one() {
        for n in 1..50 {
            let p = uniform_prior(n);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let maze = Maze::open(3, 3);
        let task = Task::new(maze.clone(), StateId::new(0, 0), StateId::new(2, 2)).unwrap();
        let cands = crate::tree::candidate_subgoals(&maze);
        let p = UniformPrior.prior(&encode_task(&task), OrKey::new(task.start, task.goal), &cands);
        assert_eq!(p, vec![0.1; 10]);
        assert_eq!(ZeroValue.value(&encode_task(&task), OrKey::new(task.start, task.goal)), 0.0);
    }
}
