//! FIFO replay buffer of prior and value training entries.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use rand::seq::index::sample;
use rand::Rng;

use super::model::encoding_candidates;
use crate::error::{Error, Result};
use crate::grid::{CellLabel, StateId, TaskEncoding};
use crate::tree::{OrKey, SubGoal};

#[derive(Clone, Debug, PartialEq)]
pub enum PriorTarget {
    /// All mass on one sub-goal, as produced by hindsight parsing.
    OneHot(SubGoal),
    /// Sparse `(candidate index, probability)` pairs over the encoding's candidates.
    Dist(Vec<(usize, f64)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PriorEntry {
    pub enc: Arc<TaskEncoding>,
    pub key: OrKey,
    pub target: PriorTarget,
}

impl PriorEntry {
    /// The target as sparse candidate-index pairs.
    pub fn sparse_target(&self) -> Result<Vec<(usize, f64)>> {
        match &self.target {
            PriorTarget::Dist(d) => Ok(d.clone()),
            PriorTarget::OneHot(g) => {
                let i = encoding_candidates(&self.enc)
                    .iter()
                    .position(|c| c == g)
                    .ok_or_else(|| Error::InvalidPrior(format!("sub-goal {g} is not a candidate")))?;
                Ok(vec![(i, 1.0)])
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueEntry {
    pub enc: Arc<TaskEncoding>,
    pub key: OrKey,
    pub target: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    prior: VecDeque<PriorEntry>,
    value: VecDeque<ValueEntry>,
}

impl ReplayBuffer {
    /// Each of the two entry lists holds at most `capacity` entries.
    pub fn new(capacity: usize) -> Self {
        ReplayBuffer {
            capacity,
            prior: VecDeque::with_capacity(capacity),
            value: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn prior_entries(&self) -> &VecDeque<PriorEntry> {
        &self.prior
    }

    pub fn value_entries(&self) -> &VecDeque<ValueEntry> {
        &self.value
    }

    pub fn push_prior(&mut self, entry: PriorEntry) {
        if self.capacity == 0 {
            return;
        }
        if self.prior.len() == self.capacity {
            self.prior.pop_front();
        }
        self.prior.push_back(entry);
    }

    pub fn push_value(&mut self, entry: ValueEntry) -> Result<()> {
        if !(0.0..=1.0).contains(&entry.target) {
            return Err(Error::Config(format!("value target {} outside [0, 1]", entry.target)));
        }
        if self.capacity == 0 {
            return Ok(());
        }
        if self.value.len() == self.capacity {
            self.value.pop_front();
        }
        self.value.push_back(entry);
        Ok(())
    }

    /// True once both lists hold at least `batch_size` entries.
    pub fn can_sample(&self, batch_size: usize) -> bool {
        batch_size > 0 && self.prior.len() >= batch_size && self.value.len() >= batch_size
    }

    /// `batch_size` distinct entries from each list, uniformly at random.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, batch_size: usize) -> (Vec<PriorEntry>, Vec<ValueEntry>) {
        let p = sample(rng, self.prior.len(), batch_size.min(self.prior.len()));
        let v = sample(rng, self.value.len(), batch_size.min(self.value.len()));
        (
            p.iter().map(|i| self.prior[i].clone()).collect(),
            v.iter().map(|i| self.value[i].clone()).collect(),
        )
    }

    /// Text snapshot: `buffer v1 <capacity>`, the distinct encodings, then one line per
    /// entry referring to them by index.
    pub fn to_text(&self) -> String {
        let mut ids: HashMap<*const TaskEncoding, usize> = HashMap::new();
        let mut encs: Vec<Arc<TaskEncoding>> = Vec::new();
        let mut id_of = |e: &Arc<TaskEncoding>| {
            *ids.entry(Arc::as_ptr(e)).or_insert_with(|| {
                encs.push(e.clone());
                encs.len() - 1
            })
        };
        let mut body = String::new();
        for e in &self.prior {
            let id = id_of(&e.enc);
            match &e.target {
                PriorTarget::OneHot(g) => body.push_str(&format!("P {id} {} {} onehot {g}\n", e.key.s, e.key.s2)),
                PriorTarget::Dist(d) => {
                    let parts: Vec<String> = d.iter().map(|(i, p)| format!("{i}:{p}")).collect();
                    body.push_str(&format!("P {id} {} {} dist {}\n", e.key.s, e.key.s2, parts.join(" ")));
                }
            }
        }
        for e in &self.value {
            let id = id_of(&e.enc);
            body.push_str(&format!("V {id} {} {} {}\n", e.key.s, e.key.s2, e.target));
        }
        let mut out = format!("buffer v1 {}\n", self.capacity);
        for e in &encs {
            let labels: String = e
                .labels()
                .iter()
                .map(|l| match l {
                    CellLabel::Empty => '.',
                    CellLabel::Wall => '#',
                    CellLabel::Start => 'S',
                    CellLabel::Goal => 'G',
                })
                .collect();
            out.push_str(&format!("E {} {} {labels}\n", e.width(), e.height()));
        }
        out.push_str(&body);
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, l)| l).unwrap_or("");
        let capacity = header
            .strip_prefix("buffer v1 ")
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| Error::parse(1, "expected `buffer v1 <capacity>`"))?;
        let mut buf = ReplayBuffer::new(capacity);
        let mut encs: Vec<Arc<TaskEncoding>> = Vec::new();
        let mut ended = false;
        for (i, line) in lines {
            let ln = i + 1;
            let err = |m: String| Error::parse(ln, m);
            let f: Vec<&str> = line.split_whitespace().collect();
            let state = |t: &str| t.parse::<StateId>().map_err(err);
            let enc = |t: &str| -> Result<Arc<TaskEncoding>> {
                let id: usize = t.parse().map_err(|_| err(format!("bad encoding id `{t}`")))?;
                encs.get(id).cloned().ok_or_else(|| err(format!("unknown encoding {id}")))
            };
            match f.as_slice() {
                ["E", w, h, labels] => {
                    let w: usize = w.parse().map_err(|_| err("bad width".into()))?;
                    let h: usize = h.parse().map_err(|_| err("bad height".into()))?;
                    let e = TaskEncoding::from_label_text(w, h, labels).map_err(err)?;
                    encs.push(Arc::new(e));
                }
                ["P", id, s, s2, "onehot", g] => {
                    let g: SubGoal = g.parse().map_err(err)?;
                    buf.prior.push_back(PriorEntry {
                        enc: enc(id)?,
                        key: OrKey::new(state(s)?, state(s2)?),
                        target: PriorTarget::OneHot(g),
                    });
                }
                ["P", id, s, s2, "dist", rest @ ..] => {
                    let d = rest
                        .iter()
                        .map(|t| {
                            let (i, p) = t.split_once(':').ok_or_else(|| err(format!("bad entry `{t}`")))?;
                            Ok((
                                i.parse().map_err(|_| err(format!("bad index `{i}`")))?,
                                p.parse().map_err(|_| err(format!("bad probability `{p}`")))?,
                            ))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    buf.prior.push_back(PriorEntry {
                        enc: enc(id)?,
                        key: OrKey::new(state(s)?, state(s2)?),
                        target: PriorTarget::Dist(d),
                    });
                }
                ["V", id, s, s2, t] => {
                    let target: f64 = t.parse().map_err(|_| err(format!("bad target `{t}`")))?;
                    buf.value.push_back(ValueEntry {
                        enc: enc(id)?,
                        key: OrKey::new(state(s)?, state(s2)?),
                        target,
                    });
                }
                ["end"] => {
                    ended = true;
                    break;
                }
                _ => return Err(err(format!("unrecognized line `{line}`"))),
            }
        }
        if !ended {
            return Err(Error::parse(0, "missing `end`"));
        }
        if buf.prior.len() > capacity || buf.value.len() > capacity {
            return Err(Error::parse(0, "snapshot exceeds its capacity"));
        }
        Ok(buf)
    }
}
