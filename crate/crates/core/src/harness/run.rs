use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::metrics::{append_line, read_lines, to_json_line, EvalRecord, MetricsRecord};
use super::{evaluate, ExperimentConfig};
use crate::error::{Error, Result};
use crate::heuristics::{ReplayBuffer, TrainableModel, Trainer};
use crate::par::Execution;

/// File layout of one training run.
#[derive(Clone, Debug)]
pub struct RunDir {
    pub root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.txt")
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.jsonl")
    }

    pub fn eval(&self) -> PathBuf {
        self.root.join("eval.jsonl")
    }

    pub fn checkpoints(&self) -> PathBuf {
        self.root.join("checkpoints")
    }

    pub fn model_at(&self, episode: usize) -> PathBuf {
        self.checkpoints().join(format!("model-{episode:06}.txt"))
    }

    pub fn buffer_at(&self, episode: usize) -> PathBuf {
        self.checkpoints().join(format!("buffer-{episode:06}.txt"))
    }

    /// Episode counts of all complete checkpoints, ascending.
    pub fn checkpoint_episodes(&self) -> Result<Vec<usize>> {
        let dir = self.checkpoints();
        if !dir.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in fs::read_dir(dir)? {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            let Some(n) = name
                .strip_prefix("model-")
                .and_then(|r| r.strip_suffix(".txt"))
                .and_then(|r| r.parse().ok())
            else {
                continue;
            };
            if self.buffer_at(n).exists() {
                out.push(n);
            }
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn latest_checkpoint(&self) -> Result<Option<usize>> {
        Ok(self.checkpoint_episodes()?.last().copied())
    }

    pub fn load_model(&self, episode: usize) -> Result<TrainableModel> {
        TrainableModel::from_text(&fs::read_to_string(self.model_at(episode))?)
    }

    pub fn read_config(&self) -> Result<ExperimentConfig> {
        ExperimentConfig::from_text(&fs::read_to_string(self.config())?)
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text)?;
    fs::rename(tmp, path)?;
    Ok(())
}

#[derive(Debug)]
pub enum RunEvent<'a> {
    Episode(&'a MetricsRecord),
    Eval(&'a EvalRecord),
    Checkpoint(usize),
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub model: TrainableModel,
    pub episodes: usize,
    pub last_eval: Option<EvalRecord>,
}

/// Equal apart from the episode count, which a resumed run may extend.
fn same_run(a: &ExperimentConfig, b: &ExperimentConfig) -> bool {
    let mut b = b.clone();
    b.episodes = a.episodes;
    b.out_dir = a.out_dir.clone();
    *a == b
}

/// Trains per `config` into `config.out_dir`, writing `metrics.jsonl`, `eval.jsonl`
/// and checkpoints. With `resume`, continues from the latest checkpoint; records
/// written after that checkpoint are discarded and regenerated, as is the closing
/// evaluation of a shorter run that is being extended.
pub fn run_experiment(
    config: &ExperimentConfig,
    exec: Execution,
    resume: bool,
    mut on_event: impl FnMut(RunEvent<'_>),
) -> Result<RunOutcome> {
    config.validate()?;
    let dir = RunDir::new(&config.out_dir);
    fs::create_dir_all(dir.checkpoints())?;
    let eval_cfg = config.eval_config();

    let start = if resume {
        dir.latest_checkpoint()?
    } else {
        None
    };
    let mut trainer = match start {
        Some(k) => {
            let saved = dir.read_config()?;
            if !same_run(&saved, config) {
                return Err(Error::Config(format!(
                    "{} was written with a different configuration",
                    dir.config().display()
                )));
            }
            let model = dir.load_model(k)?;
            let buffer = ReplayBuffer::from_text(&fs::read_to_string(dir.buffer_at(k))?)?;
            let metrics: Vec<MetricsRecord> = read_lines(&dir.metrics())?;
            if metrics.len() < k {
                return Err(Error::Config(format!("metrics.jsonl has {} records, checkpoint is at {k}", metrics.len())));
            }
            let evals: Vec<EvalRecord> = if dir.eval().exists() {
                read_lines(&dir.eval())?
            } else {
                Vec::new()
            };
            let text: String = metrics[..k].iter().map(to_json_line).collect();
            fs::write(dir.metrics(), text)?;
            let text: String = evals
                .iter()
                .filter(|r| r.episode <= k && (r.episode % config.eval_every.max(1) == 0))
                .map(to_json_line)
                .collect();
            fs::write(dir.eval(), text)?;
            Trainer::resume(config.train_config(), config.planner.clone(), model, buffer, k)?
        }
        None => {
            if dir.metrics().exists() && fs::metadata(dir.metrics())?.len() > 0 {
                return Err(Error::Config(format!(
                    "{} already holds a run; resume it or choose another out_dir",
                    config.out_dir.display()
                )));
            }
            File::create(dir.metrics())?;
            File::create(dir.eval())?;
            Trainer::new(config.train_config(), config.planner.clone())?
        }
    };
    fs::write(dir.config(), config.to_text())?;

    let open = |p: PathBuf| -> Result<BufWriter<File>> {
        Ok(BufWriter::new(OpenOptions::new().append(true).open(p)?))
    };
    let mut metrics = open(dir.metrics())?;
    let mut evals = open(dir.eval())?;
    let mut last_eval = None;

    let eval_now = |trainer: &Trainer, evals: &mut BufWriter<File>, on_event: &mut dyn FnMut(RunEvent<'_>)| -> Result<EvalRecord> {
        let summary = evaluate(exec, Some(&trainer.model), &config.planner, &eval_cfg)?;
        let record = EvalRecord {
            episode: trainer.episode,
            summary,
        };
        append_line(evals, &record)?;
        evals.flush()?;
        on_event(RunEvent::Eval(&record));
        Ok(record)
    };

    if start.is_none() && config.eval_every > 0 {
        last_eval = Some(eval_now(&trainer, &mut evals, &mut on_event)?);
    }
    while trainer.episode < config.episodes {
        let record = trainer.run_episode()?;
        append_line(&mut metrics, &record)?;
        on_event(RunEvent::Episode(&record));
        let e = trainer.episode;
        let last = e == config.episodes;
        if config.eval_every > 0 && (e % config.eval_every == 0 || last) {
            last_eval = Some(eval_now(&trainer, &mut evals, &mut on_event)?);
        }
        if (config.checkpoint_every > 0 && e % config.checkpoint_every == 0) || last {
            metrics.flush()?;
            write_atomic(&dir.model_at(e), &trainer.model.to_text())?;
            write_atomic(&dir.buffer_at(e), &trainer.buffer.to_text())?;
            on_event(RunEvent::Checkpoint(e));
        }
    }
    metrics.flush()?;
    Ok(RunOutcome {
        model: trainer.model,
        episodes: trainer.episode,
        last_eval,
    })
}
