//! Training loop: search, store search-derived targets, execute the plan, relabel the
//! executed trajectory in hindsight, and take one gradient step per episode.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::her::{loop_erase, parse_trajectory, HerParserKind};
use super::model::{Optimizer, PriorExample, TrainableModel, ValueExample};
use super::replay::{PriorEntry, PriorTarget, ReplayBuffer, ValueEntry};
use super::targets::prior_targets_from_tree;
use super::HeuristicPair;
use crate::error::{Error, Result};
use crate::grid::{encode_task, execute_plan, generate_maze, sample_task, StateId, StepLimit, Task};
use crate::planner::{run_search, PlannerConfig};
use crate::rng::{derive_rng, derive_seed, Stream};
use crate::tree::{OrKey, SubGoal};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub width: usize,
    pub height: usize,
    pub density: f64,
    pub episodes: usize,
    pub parser: HerParserKind,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    pub optimizer: Optimizer,
    pub hidden: usize,
    pub step_limit: StepLimit,
    /// Remove cycles from executed trajectories before hindsight parsing.
    pub loop_erase: bool,
    /// Ablation: train the value head on executed outcomes instead of search returns.
    pub mc_returns: bool,
    pub seed: u64,
    /// Record wall-clock time per episode. Off by default so records are reproducible.
    pub wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            width: 11,
            height: 11,
            density: 0.75,
            episodes: 5000,
            parser: HerParserKind::TemporallyBalanced,
            batch_size: 128,
            buffer_capacity: 2048,
            learning_rate: 1e-3,
            temperature: 0.003,
            optimizer: Optimizer::Sgd,
            hidden: 32,
            step_limit: StepLimit::default(),
            loop_erase: false,
            mc_returns: false,
            seed: 0,
            wall_clock: false,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Batch {
    pub prior: Vec<PriorEntry>,
    pub value: Vec<ValueEntry>,
}

/// One gradient step on the summed mean cross-entropies of `batch`.
pub fn train_step(model: &mut TrainableModel, batch: &Batch) -> Result<(f64, f64)> {
    if batch.prior.is_empty() && batch.value.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let targets = batch
        .prior
        .iter()
        .map(|e| e.sparse_target())
        .collect::<Result<Vec<_>>>()?;
    let prior: Vec<PriorExample<'_>> = batch
        .prior
        .iter()
        .zip(&targets)
        .map(|(e, t)| PriorExample {
            enc: &e.enc,
            key: e.key,
            target: t,
        })
        .collect();
    let value: Vec<ValueExample<'_>> = batch
        .value
        .iter()
        .map(|e| ValueExample {
            enc: &e.enc,
            key: e.key,
            target: e.target,
        })
        .collect();
    let (pl, vl, grad) = model.loss_and_grad(&prior, &value);
    if !pl.is_finite() || !vl.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFiniteLoss(format!(
            "prior loss {pl}, value loss {vl} after {} steps",
            model.steps()
        )));
    }
    model.apply_gradient(&grad);
    Ok((pl, vl))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub seed: u64,
    pub solved: bool,
    pub plan_length: usize,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "G")]
    pub g: f64,
    pub budget: usize,
    pub prior_loss: Option<f64>,
    pub value_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_ms: Option<f64>,
}

/// Training state: model, replay buffer and the index of the next episode.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    pub planner: PlannerConfig,
    pub model: TrainableModel,
    pub buffer: ReplayBuffer,
    pub episode: usize,
}

impl Trainer {
    pub fn new(config: TrainConfig, planner: PlannerConfig) -> Result<Self> {
        planner.validate()?;
        if config.batch_size == 0 || config.hidden == 0 {
            return Err(Error::Config("batch_size and hidden must be positive".into()));
        }
        let mut model = TrainableModel::new(config.hidden, derive_seed(config.seed, Stream::ModelInit, 0));
        model.learning_rate = config.learning_rate;
        model.temperature = config.temperature;
        model.optimizer = config.optimizer;
        Ok(Trainer {
            buffer: ReplayBuffer::new(config.buffer_capacity),
            config,
            planner,
            model,
            episode: 0,
        })
    }

    /// Resumes from saved model and buffer state at episode `episode`.
    pub fn resume(
        config: TrainConfig,
        planner: PlannerConfig,
        model: TrainableModel,
        buffer: ReplayBuffer,
        episode: usize,
    ) -> Result<Self> {
        planner.validate()?;
        Ok(Trainer {
            config,
            planner,
            model,
            buffer,
            episode,
        })
    }

    pub fn task_for(&self, episode: usize) -> Result<(Task, u64)> {
        let c = &self.config;
        let maze = generate_maze(
            c.width,
            c.height,
            c.density,
            derive_seed(c.seed, Stream::TrainMaze, episode as u64),
        )?;
        let seed = derive_seed(c.seed, Stream::TrainTask, episode as u64);
        Ok((sample_task(&maze, seed)?, seed))
    }

    pub fn run_episode(&mut self) -> Result<EpisodeRecord> {
        let clock = Instant::now();
        let e = self.episode as u64;
        let seed = self.config.seed;
        let (task, task_seed) = self.task_for(self.episode)?;
        let enc = Arc::new(encode_task(&task));
        let planner = PlannerConfig {
            seed: derive_seed(seed, Stream::TrainSearch, e),
            ..self.planner.clone()
        };
        let result = run_search(&task, HeuristicPair::from_model(&self.model), &planner)?;
        let mut rng = derive_rng(seed, Stream::TrainExecute, e);
        let traj = execute_plan(&mut rng, &task, &result.plan.sigma, self.config.step_limit.resolve(&task));

        for node in &result.solution_tree.nodes {
            let target = if self.config.mc_returns {
                executed_outcome(&traj.states, node.key)
            } else {
                node.g.clamp(0.0, 1.0)
            };
            self.buffer.push_value(ValueEntry {
                enc: enc.clone(),
                key: node.key,
                target,
            })?;
            if node.is_leaf() {
                continue;
            }
            if let Some(t) = prior_targets_from_tree(&result, node.key) {
                let sparse = t.into_iter().enumerate().filter(|(_, p)| *p > 0.0).collect();
                self.buffer.push_prior(PriorEntry {
                    enc: enc.clone(),
                    key: node.key,
                    target: PriorTarget::Dist(sparse),
                });
            }
        }

        self.relabel(&task, &traj.states)?;

        let mut losses = (None, None);
        if self.buffer.can_sample(self.config.batch_size) {
            let mut rng = derive_rng(seed, Stream::TrainBatch, e);
            let (prior, value) = self.buffer.sample(&mut rng, self.config.batch_size);
            let (pl, vl) = train_step(&mut self.model, &Batch { prior, value })?;
            losses = (Some(pl), Some(vl));
        }

        self.episode += 1;
        Ok(EpisodeRecord {
            episode: self.episode - 1,
            seed: task_seed,
            solved: traj.reached_goal,
            plan_length: result.plan.len(),
            l: result.plan.objective_l,
            g: result.root_g(),
            budget: result.budget_used,
            prior_loss: losses.0,
            value_loss: losses.1,
            wall_ms: self.config.wall_clock.then(|| clock.elapsed().as_secs_f64() * 1e3),
        })
    }

    /// Stores hindsight triplets of `states` for the fictional task from its first to
    /// its last state.
    fn relabel(&mut self, task: &Task, states: &[StateId]) -> Result<()> {
        let states = if self.config.loop_erase {
            loop_erase(states)
        } else {
            states.to_vec()
        };
        let (Some(&s0), Some(&st)) = (states.first(), states.last()) else {
            return Ok(());
        };
        if s0 == st {
            return Ok(());
        }
        let fictional = Task::new(task.maze.clone(), s0, st)?;
        let enc = Arc::new(encode_task(&fictional));
        let model = &self.model;
        let vf = |a, b| model.value_of(&enc, OrKey::new(a, b));
        let triplets = parse_trajectory(self.config.parser, &states, Some(&vf))?;
        for t in triplets {
            if t.s == t.s2 || t.mid == t.s || t.mid == t.s2 {
                continue;
            }
            self.buffer.push_prior(PriorEntry {
                enc: enc.clone(),
                key: OrKey::new(t.s, t.s2),
                target: PriorTarget::OneHot(SubGoal::State(t.mid)),
            });
        }
        Ok(())
    }

    /// Runs episodes until `config.episodes` have been completed.
    pub fn run(&mut self, mut on_record: impl FnMut(&EpisodeRecord, &Trainer) -> Result<()>) -> Result<()> {
        while self.episode < self.config.episodes {
            let rec = self.run_episode()?;
            on_record(&rec, self)?;
        }
        Ok(())
    }
}

/// 1 if `states` visits `key.s2` at or after its first visit to `key.s`, else 0.
pub fn executed_outcome(states: &[StateId], key: OrKey) -> f64 {
    match states.iter().position(|&x| x == key.s) {
        Some(i) if states[i..].contains(&key.s2) => 1.0,
        _ => 0.0,
    }
}

/// Trains from scratch for `train.episodes` episodes and returns the model and the
/// per-episode records.
pub fn training_loop(
    train: &TrainConfig,
    planner: &PlannerConfig,
    seed: u64,
) -> Result<(TrainableModel, Vec<EpisodeRecord>)> {
    let config = TrainConfig {
        seed,
        ..train.clone()
    };
    let mut trainer = Trainer::new(config, planner.clone())?;
    let mut records = Vec::new();
    trainer.run(|r, _| {
        records.push(r.clone());
        Ok(())
    })?;
    Ok((trainer.model, records))
}
