use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::EvalSummary;
use crate::error::{Error, Result};
use crate::grid::parse_maze_text;
use crate::heuristics::{EpisodeRecord, ReplayBuffer, TrainableModel};
use crate::tree::TreeDump;

/// One line of `metrics.jsonl`.
pub type MetricsRecord = EpisodeRecord;

/// One line of `eval.jsonl`: an evaluation after `episode` training episodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub episode: usize,
    #[serde(flatten)]
    pub summary: EvalSummary,
}

pub fn to_json_line<T: Serialize>(record: &T) -> String {
    let mut s = serde_json::to_string(record).expect("records serialize");
    s.push('\n');
    s
}

pub fn append_line<T: Serialize>(out: &mut impl Write, record: &T) -> Result<()> {
    out.write_all(to_json_line(record).as_bytes())?;
    Ok(())
}

pub fn parse_lines<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::parse(i + 1, e.to_string())))
        .collect()
}

pub fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    parse_lines(&fs::read_to_string(path)?)
}

/// Kinds of file the harness writes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FileKind {
    Metrics,
    Eval,
    Summary,
    Config,
    Model,
    Buffer,
    Maze,
    TreeDump,
    Table,
}

fn check_metrics(records: &[MetricsRecord]) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        let line = i + 1;
        if i > 0 && r.episode != records[i - 1].episode + 1 {
            return Err(Error::parse(line, format!("episode {} does not follow {}", r.episode, records[i - 1].episode)));
        }
        if !(0.0..=1.0).contains(&r.l) || !(0.0..=1.0).contains(&r.g) {
            return Err(Error::parse(line, "L and G must lie in [0, 1]"));
        }
        if r.plan_length < 2 {
            return Err(Error::parse(line, "plan_length must be at least 2"));
        }
        for loss in [r.prior_loss, r.value_loss].into_iter().flatten() {
            if !loss.is_finite() || loss < 0.0 {
                return Err(Error::parse(line, "losses must be finite and non-negative"));
            }
        }
    }
    Ok(())
}

fn check_summary(s: &EvalSummary, line: usize) -> Result<()> {
    let ok = s.solved <= s.tasks
        && (0.0..=1.0).contains(&s.fraction)
        && s.ci_low <= s.fraction + 1e-12
        && s.fraction <= s.ci_high + 1e-12
        && (0.0..=1.0).contains(&s.mean_l);
    if ok {
        Ok(())
    } else {
        Err(Error::parse(line, "inconsistent evaluation summary"))
    }
}

/// Checks `text` as a harness output file and returns its detected kind.
pub fn validate_text(text: &str) -> Result<FileKind> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    if first.starts_with("model v1") {
        TrainableModel::from_text(text)?;
        return Ok(FileKind::Model);
    }
    if first.starts_with("buffer v1") {
        ReplayBuffer::from_text(text)?;
        return Ok(FileKind::Buffer);
    }
    if first.starts_with("maze v1") {
        parse_maze_text(text)?;
        return Ok(FileKind::Maze);
    }
    if first.starts_with("OR ") || first.starts_with("AND ") {
        TreeDump::parse(text)?;
        return Ok(FileKind::TreeDump);
    }
    if first.starts_with("table ") {
        super::Table::from_text(text)?;
        return Ok(FileKind::Table);
    }
    if first.starts_with('{') {
        let value: serde_json::Value =
            serde_json::from_str(first).map_err(|e| Error::parse(1, e.to_string()))?;
        if value.get("solved").is_some_and(|v| v.is_boolean()) {
            let records: Vec<MetricsRecord> = parse_lines(text)?;
            check_metrics(&records)?;
            return Ok(FileKind::Metrics);
        }
        if value.get("episode").is_some() {
            let records: Vec<EvalRecord> = parse_lines(text)?;
            for (i, r) in records.iter().enumerate() {
                check_summary(&r.summary, i + 1)?;
            }
            return Ok(FileKind::Eval);
        }
        let records: Vec<EvalSummary> = parse_lines(text)?;
        for (i, r) in records.iter().enumerate() {
            check_summary(r, i + 1)?;
        }
        return Ok(FileKind::Summary);
    }
    super::ExperimentConfig::from_text(text)?;
    Ok(FileKind::Config)
}

pub fn validate_file(path: &Path) -> Result<FileKind> {
    validate_text(&fs::read_to_string(path)?)
}
