use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::StepLimit;
use crate::heuristics::{HerParserKind, Optimizer, TrainConfig};
use crate::planner::{Mode, PlannerConfig};

/// Prefix of environment variables that override config keys, e.g. `DCMCTS_BUDGET=50`.
pub const ENV_PREFIX: &str = "DCMCTS_";

/// A full experiment: environment, planner, training and evaluation settings.
///
/// Stored on disk as flat `key = value` lines with `#` comments.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub width: usize,
    pub height: usize,
    pub density: f64,
    pub episodes: usize,
    pub planner: PlannerConfig,
    /// `None` pairs the parser with the mode: left-first for sequential search,
    /// temporally balanced otherwise.
    pub parser: Option<HerParserKind>,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub learning_rate: f64,
    pub temperature: f64,
    pub optimizer: Optimizer,
    pub hidden: usize,
    pub step_limit: StepLimit,
    pub loop_erase: bool,
    pub mc_returns: bool,
    pub wall_clock: bool,
    /// Evaluate every this many episodes; 0 disables periodic evaluation.
    pub eval_every: usize,
    pub eval_tasks: usize,
    /// Checkpoint every this many episodes; 0 keeps only the final checkpoint.
    pub checkpoint_every: usize,
    pub seed: u64,
    pub eval_seed: u64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            width: 11,
            height: 11,
            density: 0.75,
            episodes: 5000,
            planner: PlannerConfig {
                budget: 100,
                ..PlannerConfig::default()
            },
            parser: None,
            batch_size: 128,
            buffer_capacity: 2048,
            learning_rate: 1e-3,
            temperature: 0.003,
            optimizer: Optimizer::Sgd,
            hidden: 32,
            step_limit: StepLimit::default(),
            loop_erase: false,
            mc_returns: false,
            wall_clock: false,
            eval_every: 500,
            eval_tasks: 200,
            checkpoint_every: 500,
            seed: 0,
            eval_seed: 1_000_003,
            out_dir: PathBuf::from("runs/default"),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("bad value `{value}` for `{key}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("bad value `{value}` for `{key}`: expected true or false"))),
    }
}

impl ExperimentConfig {
    pub const KEYS: [&'static str; 29] = [
        "width",
        "height",
        "density",
        "episodes",
        "mode",
        "budget",
        "max_depth",
        "c_puct",
        "two_way_c",
        "stall_limit",
        "parallel_and",
        "parser",
        "batch_size",
        "buffer_capacity",
        "learning_rate",
        "temperature",
        "optimizer",
        "hidden",
        "step_limit",
        "loop_erase",
        "mc_returns",
        "wall_clock",
        "eval_every",
        "eval_tasks",
        "checkpoint_every",
        "seed",
        "eval_seed",
        "out_dir",
        "planner_seed",
    ];

    pub fn parser(&self) -> HerParserKind {
        self.parser.unwrap_or(match self.planner.mode {
            Mode::SequentialRight => HerParserKind::LeftFirst,
            _ => HerParserKind::TemporallyBalanced,
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value;
        match key {
            "width" => self.width = parse_value(key, v)?,
            "height" => self.height = parse_value(key, v)?,
            "density" => self.density = parse_value(key, v)?,
            "episodes" => self.episodes = parse_value(key, v)?,
            "mode" => self.planner.mode = v.parse()?,
            "budget" => self.planner.budget = parse_value(key, v)?,
            "max_depth" => self.planner.max_depth = parse_value(key, v)?,
            "c_puct" => self.planner.c_puct = parse_value(key, v)?,
            "two_way_c" => self.planner.two_way_c = parse_value(key, v)?,
            "stall_limit" => self.planner.stall_limit = parse_value(key, v)?,
            "parallel_and" => self.planner.parallel_and = parse_bool(key, v)?,
            "planner_seed" => self.planner.seed = parse_value(key, v)?,
            "parser" => {
                self.parser = match v {
                    "auto" => None,
                    _ => Some(v.parse()?),
                }
            }
            "batch_size" => self.batch_size = parse_value(key, v)?,
            "buffer_capacity" => self.buffer_capacity = parse_value(key, v)?,
            "learning_rate" => self.learning_rate = parse_value(key, v)?,
            "temperature" => self.temperature = parse_value(key, v)?,
            "optimizer" => self.optimizer = v.parse()?,
            "hidden" => self.hidden = parse_value(key, v)?,
            "step_limit" => self.step_limit = v.parse()?,
            "loop_erase" => self.loop_erase = parse_bool(key, v)?,
            "mc_returns" => self.mc_returns = parse_bool(key, v)?,
            "wall_clock" => self.wall_clock = parse_bool(key, v)?,
            "eval_every" => self.eval_every = parse_value(key, v)?,
            "eval_tasks" => self.eval_tasks = parse_value(key, v)?,
            "checkpoint_every" => self.checkpoint_every = parse_value(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "eval_seed" => self.eval_seed = parse_value(key, v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. Blank lines and text after `#`
    /// are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected `key = value`, got `{line}`")))?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies `DCMCTS_<KEY>` overrides from `vars`.
    pub fn apply_env<I, K, V>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        for (k, v) in vars {
            let Some(key) = k.as_ref().strip_prefix(ENV_PREFIX) else {
                continue;
            };
            let key = key.to_ascii_lowercase();
            self.set(&key, v.as_ref().trim())
                .map_err(|e| Error::Config(format!("{}{}: {e}", ENV_PREFIX, key.to_ascii_uppercase())))?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 3 || self.height < 3 {
            return Err(Error::Config(format!("maze must be at least 3x3, got {}x{}", self.width, self.height)));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(Error::InvalidDensity(self.density));
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 || self.hidden == 0 {
            return Err(Error::Config("batch_size, buffer_capacity and hidden must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        if self.eval_every > 0 && self.eval_tasks == 0 {
            return Err(Error::Config("eval_tasks must be positive when eval_every is set".into()));
        }
        self.planner.validate()
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            width: self.width,
            height: self.height,
            density: self.density,
            episodes: self.episodes,
            parser: self.parser(),
            batch_size: self.batch_size,
            buffer_capacity: self.buffer_capacity,
            learning_rate: self.learning_rate,
            temperature: self.temperature,
            optimizer: self.optimizer,
            hidden: self.hidden,
            step_limit: self.step_limit,
            loop_erase: self.loop_erase,
            mc_returns: self.mc_returns,
            seed: self.seed,
            wall_clock: self.wall_clock,
        }
    }

    pub fn eval_config(&self) -> super::EvalConfig {
        super::EvalConfig {
            width: self.width,
            height: self.height,
            density: self.density,
            tasks: self.eval_tasks,
            seed: self.eval_seed,
            step_limit: self.step_limit,
        }
    }

    /// Every key with its current value, in [`Self::KEYS`] order.
    pub fn to_text(&self) -> String {
        let p = &self.planner;
        let mut out = String::new();
        let parser = self.parser.map_or("auto".to_string(), |k| k.to_string());
        let values: [String; 29] = [
            self.width.to_string(),
            self.height.to_string(),
            self.density.to_string(),
            self.episodes.to_string(),
            p.mode.to_string(),
            p.budget.to_string(),
            p.max_depth.to_string(),
            p.c_puct.to_string(),
            p.two_way_c.to_string(),
            p.stall_limit.to_string(),
            p.parallel_and.to_string(),
            parser,
            self.batch_size.to_string(),
            self.buffer_capacity.to_string(),
            self.learning_rate.to_string(),
            self.temperature.to_string(),
            self.optimizer.to_string(),
            self.hidden.to_string(),
            self.step_limit.to_string(),
            self.loop_erase.to_string(),
            self.mc_returns.to_string(),
            self.wall_clock.to_string(),
            self.eval_every.to_string(),
            self.eval_tasks.to_string(),
            self.checkpoint_every.to_string(),
            self.seed.to_string(),
            self.eval_seed.to_string(),
            self.out_dir.display().to_string(),
            p.seed.to_string(),
        ];
        for (k, v) in Self::KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = ExperimentConfig::default();
        c.set("mode", "sequential").unwrap();
        c.set("c_puct", "3.25").unwrap();
        c.set("step_limit", "40").unwrap();
        c.set("parser", "weight_balanced").unwrap();
        assert_eq!(ExperimentConfig::from_text(&c.to_text()).unwrap(), c);
        assert_eq!(
            ExperimentConfig::from_text(&ExperimentConfig::default().to_text()).unwrap(),
            ExperimentConfig::default()
        );
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = ExperimentConfig::from_text("# run\n\nbudget = 50 # small\n  mode=dc\n").unwrap();
        assert_eq!(c.planner.budget, 50);
        assert_eq!(c.parser(), HerParserKind::TemporallyBalanced);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let e = ExperimentConfig::from_text("budget = 5\nnonsense\n").unwrap_err();
        assert!(e.to_string().starts_with("line 2"), "{e}");
        let e = ExperimentConfig::from_text("colour = blue\n").unwrap_err();
        assert!(e.to_string().contains("unknown key"), "{e}");
        assert!(ExperimentConfig::from_text("density = 1.5\n").is_err());
        assert!(ExperimentConfig::from_text("mode = bfs\n").is_err());
    }

    #[test]
    fn env_overrides() {
        let mut c = ExperimentConfig::default();
        c.apply_env([("DCMCTS_BUDGET", "7"), ("HOME", "/root"), ("DCMCTS_MODE", "sequential")])
            .unwrap();
        assert_eq!(c.planner.budget, 7);
        assert_eq!(c.parser(), HerParserKind::LeftFirst);
        assert!(c.apply_env([("DCMCTS_WIDTH", "x")]).is_err());
    }
}
