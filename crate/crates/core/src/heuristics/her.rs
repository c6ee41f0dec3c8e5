//! Hindsight relabeling: parsers that turn an executed trajectory into
//! `(s, s', s'')` sub-goal triplets for the task the trajectory actually solved.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::grid::StateId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Triplet {
    pub s: StateId,
    pub mid: StateId,
    pub s2: StateId,
}

impl Triplet {
    pub fn new(s: StateId, mid: StateId, s2: StateId) -> Self {
        Triplet { s, mid, s2 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum HerParserKind {
    /// `(s_t, s_{t+1}, s_T)` for every `t < T - 1`.
    LeftFirst,
    /// `(s_0, s_{t-1}, s_t)` for every `t > 1`, latest first.
    RightFirst,
    /// Recursive midpoint splits of the whole trajectory, pre-order.
    #[default]
    TemporallyBalanced,
    /// Recursive splits into halves of near-equal value.
    WeightBalanced,
}

impl HerParserKind {
    pub fn name(self) -> &'static str {
        match self {
            HerParserKind::LeftFirst => "left_first",
            HerParserKind::RightFirst => "right_first",
            HerParserKind::TemporallyBalanced => "temporally_balanced",
            HerParserKind::WeightBalanced => "weight_balanced",
        }
    }
}

impl fmt::Display for HerParserKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HerParserKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "left_first" => HerParserKind::LeftFirst,
            "right_first" => HerParserKind::RightFirst,
            "temporally_balanced" | "balanced" => HerParserKind::TemporallyBalanced,
            "weight_balanced" => HerParserKind::WeightBalanced,
            _ => return Err(Error::Config(format!("unknown parser `{s}`"))),
        })
    }
}

/// Parses `states` into triplets. Trajectories with fewer than three states yield none.
/// `value_fn` is required by [`HerParserKind::WeightBalanced`] and ignored otherwise.
pub fn parse_trajectory(
    kind: HerParserKind,
    states: &[StateId],
    value_fn: Option<&dyn Fn(StateId, StateId) -> f64>,
) -> Result<Vec<Triplet>> {
    let n = states.len();
    let mut out = Vec::new();
    if n < 3 {
        return Ok(out);
    }
    let last = n - 1;
    match kind {
        HerParserKind::LeftFirst => {
            for t in 0..last - 1 {
                out.push(Triplet::new(states[t], states[t + 1], states[last]));
            }
        }
        HerParserKind::RightFirst => {
            for t in (2..=last).rev() {
                out.push(Triplet::new(states[0], states[t - 1], states[t]));
            }
        }
        HerParserKind::TemporallyBalanced => split(states, 0, last, &mut out, &|a, b| (a + b) / 2),
        HerParserKind::WeightBalanced => {
            let vf = value_fn.ok_or_else(|| Error::Config("weight-balanced parsing needs a value function".into()))?;
            let pick = |a: usize, b: usize| {
                let mut best = a + 1;
                let mut best_gap = f64::INFINITY;
                for m in a + 1..b {
                    let gap = (vf(states[a], states[m]) - vf(states[m], states[b])).abs();
                    if gap < best_gap {
                        best_gap = gap;
                        best = m;
                    }
                }
                best
            };
            split(states, 0, last, &mut out, &pick);
        }
    }
    Ok(out)
}

fn split(states: &[StateId], a: usize, b: usize, out: &mut Vec<Triplet>, pick: &dyn Fn(usize, usize) -> usize) {
    if b - a < 2 {
        return;
    }
    let m = pick(a, b);
    out.push(Triplet::new(states[a], states[m], states[b]));
    split(states, a, m, out, pick);
    split(states, m, b, out, pick);
}

/// Removes cycles from a walk: whenever a state recurs, the excursion since its first
/// visit is dropped.
pub fn loop_erase(states: &[StateId]) -> Vec<StateId> {
    let mut out: Vec<StateId> = Vec::with_capacity(states.len());
    for &s in states {
        if let Some(p) = out.iter().position(|&x| x == s) {
            out.truncate(p + 1);
        } else {
            out.push(s);
        }
    }
    out
}
