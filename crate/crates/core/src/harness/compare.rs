use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::metrics::{read_lines, EvalRecord};
use super::{budget_sweep, EvalConfig, EvalSummary, RunDir};
use crate::error::{Error, Result};
use crate::heuristics::TrainableModel;
use crate::par::Execution;
use crate::planner::PlannerConfig;

/// A tab-separated table of solve fractions: one row per episode or budget, one column
/// per run or method. Missing cells print as `-`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    /// Name of the row key, e.g. `episode` or `budget`.
    pub key: String,
    pub columns: Vec<String>,
    pub rows: Vec<(usize, Vec<Option<f64>>)>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let c = self.columns.iter().position(|n| n == name)?;
        Some(self.rows.iter().map(|(_, r)| r[c]).collect())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("table {}\n{}", self.columns.len(), self.key);
        for c in &self.columns {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
        for (k, row) in &self.rows {
            let _ = write!(out, "{k}");
            for v in row {
                match v {
                    Some(v) => {
                        let _ = write!(out, "\t{v:.4}");
                    }
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| Error::parse(1, "empty table"))?;
        let n: usize = first
            .strip_prefix("table ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| Error::parse(1, "expected `table <columns>`"))?;
        let (_, header) = lines.next().ok_or_else(|| Error::parse(2, "missing header"))?;
        let mut fields = header.split('\t');
        let key = fields.next().unwrap_or("").to_string();
        let columns: Vec<String> = fields.map(str::to_string).collect();
        if columns.len() != n || key.is_empty() {
            return Err(Error::parse(2, "header does not match column count"));
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != n + 1 {
                return Err(Error::parse(i + 1, "wrong number of cells"));
            }
            let k = fields[0]
                .parse()
                .map_err(|_| Error::parse(i + 1, "bad row key"))?;
            let row = fields[1..]
                .iter()
                .map(|f| match *f {
                    "-" => Ok(None),
                    f => f
                        .parse::<f64>()
                        .ok()
                        .filter(|v| (0.0..=1.0).contains(v))
                        .map(Some)
                        .ok_or_else(|| Error::parse(i + 1, format!("bad cell `{f}`"))),
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push((k, row));
        }
        Ok(Table { key, columns, rows })
    }
}

/// Builds a table from labelled series of `(row key, value)` points.
pub fn table_from_series(key: &str, series: &[(String, Vec<(usize, f64)>)]) -> Table {
    let mut grid: BTreeMap<usize, Vec<Option<f64>>> = BTreeMap::new();
    for (c, (_, points)) in series.iter().enumerate() {
        for &(k, v) in points {
            grid.entry(k).or_insert_with(|| vec![None; series.len()])[c] = Some(v);
        }
    }
    Table {
        key: key.to_string(),
        columns: series.iter().map(|(n, _)| n.clone()).collect(),
        rows: grid.into_iter().collect(),
    }
}

/// Learning curves of several run directories, aligned by episode. Runs must share
/// the evaluation task distribution.
pub fn compare_runs(dirs: &[&Path]) -> Result<Table> {
    let mut series = Vec::new();
    let mut reference: Option<(EvalConfig, usize)> = None;
    for dir in dirs {
        let run = RunDir::new(*dir);
        let config = run.read_config()?;
        let meta = (config.eval_config(), config.planner.budget);
        match &reference {
            None => reference = Some(meta),
            Some(r) if *r != meta => {
                return Err(Error::Config(format!(
                    "{} evaluates on different tasks or budget than {}",
                    dir.display(),
                    dirs[0].display()
                )))
            }
            Some(_) => {}
        }
        let records: Vec<EvalRecord> = read_lines(&run.eval())?;
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dir.display().to_string());
        series.push((
            name,
            records.iter().map(|r| (r.episode, r.summary.fraction)).collect(),
        ));
    }
    Ok(table_from_series("episode", &series))
}

/// A labelled planner, with an optional trained model, for budget comparisons.
pub struct Method<'a> {
    pub name: String,
    pub model: Option<&'a TrainableModel>,
    pub planner: PlannerConfig,
}

/// Solve fraction by budget for each method on the same evaluation tasks.
pub fn compare_budgets(
    exec: Execution,
    methods: &[Method<'_>],
    eval: &EvalConfig,
    budgets: &[usize],
) -> Result<(Table, Vec<Vec<EvalSummary>>)> {
    let mut series = Vec::new();
    let mut all = Vec::new();
    for m in methods {
        let sums = budget_sweep(exec, m.model, &m.planner, eval, budgets)?;
        series.push((m.name.clone(), sums.iter().map(|s| (s.budget, s.fraction)).collect()));
        all.push(sums);
    }
    Ok((table_from_series("budget", &series), all))
}
