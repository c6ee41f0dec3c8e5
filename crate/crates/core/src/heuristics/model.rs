//! A compact two-headed feed-forward model over hand-built features.
//!
//! The value head reads features of the sub-task `(s, s'')` and outputs a sigmoid
//! probability. The prior head scores each candidate sub-goal `s'` with a second small
//! network; the `Null` candidate is scored from the value trunk. Logits are divided by
//! the temperature before the softmax at inference time; training uses temperature 1.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::{PolicyPrior, ValueEstimator};
use crate::error::{Error, Result};
use crate::grid::{CellLabel, StateId, TaskEncoding};
use crate::rng::rng_from_seed;
use crate::tree::{OrKey, SubGoal};

pub const PAIR: usize = 8;
pub const PATCH: usize = 9;
pub const VALUE_IN: usize = PAIR + 2 * PATCH;
pub const PRIOR_IN: usize = 3 * PAIR + PATCH + 2;

/// Feature extraction from a task encoding.
pub struct Features;

impl Features {
    /// Offsets, distances, adjacency, wall density of the bounding box and an
    /// unobstructed straight-line flag for the pair `(a, b)`.
    pub fn pair(enc: &TaskEncoding, a: StateId, b: StateId, out: &mut [f64]) {
        let scale = (enc.width() + enc.height()) as f64;
        let dr = b.row() as f64 - a.row() as f64;
        let dc = b.col() as f64 - a.col() as f64;
        let area = (dr.abs() + 1.0) * (dc.abs() + 1.0);
        let walls = enc.walls_in_rect(a, b) as f64;
        let aligned = a.row() == b.row() || a.col() == b.col();
        out[0] = dr / scale;
        out[1] = dc / scale;
        out[2] = dr.abs() / scale;
        out[3] = dc.abs() / scale;
        out[4] = a.manhattan(b) as f64 / scale;
        out[5] = if a == b || a.is_adjacent(b) { 1.0 } else { 0.0 };
        out[6] = walls / area;
        out[7] = if aligned && walls == 0.0 { 1.0 } else { 0.0 };
    }

    /// Wall occupancy of the 3x3 neighbourhood of `s`; cells off the grid count as walls.
    pub fn patch(enc: &TaskEncoding, s: StateId, out: &mut [f64]) {
        let (r, c) = (s.row() as i64, s.col() as i64);
        let mut i = 0;
        for dr in -1..=1 {
            for dc in -1..=1 {
                out[i] = if enc.is_wall_at(r + dr, c + dc) { 1.0 } else { 0.0 };
                i += 1;
            }
        }
    }

    pub fn value_input(enc: &TaskEncoding, key: OrKey) -> [f64; VALUE_IN] {
        let mut x = [0.0; VALUE_IN];
        Self::pair(enc, key.s, key.s2, &mut x[..PAIR]);
        Self::patch(enc, key.s, &mut x[PAIR..PAIR + PATCH]);
        Self::patch(enc, key.s2, &mut x[PAIR + PATCH..]);
        x
    }

    pub fn prior_input(enc: &TaskEncoding, key: OrKey, mid: StateId) -> [f64; PRIOR_IN] {
        let mut x = [0.0; PRIOR_IN];
        Self::pair(enc, key.s, mid, &mut x[..PAIR]);
        Self::pair(enc, mid, key.s2, &mut x[PAIR..2 * PAIR]);
        Self::pair(enc, key.s, key.s2, &mut x[2 * PAIR..3 * PAIR]);
        Self::patch(enc, mid, &mut x[3 * PAIR..3 * PAIR + PATCH]);
        let scale = (enc.width() + enc.height()) as f64;
        let d1 = key.s.manhattan(mid) as f64;
        let d2 = mid.manhattan(key.s2) as f64;
        let d = key.s.manhattan(key.s2) as f64;
        x[3 * PAIR + PATCH] = (d1 - d2) / scale;
        x[3 * PAIR + PATCH + 1] = (d1 + d2 - d) / scale;
        x
    }
}

/// `Null` followed by every non-wall cell of the encoding in row-major order; the same
/// list [`crate::tree::candidate_subgoals`] produces for the underlying maze.
pub fn encoding_candidates(enc: &TaskEncoding) -> Vec<SubGoal> {
    let w = enc.width();
    std::iter::once(SubGoal::Null)
        .chain(
            enc.labels()
                .iter()
                .enumerate()
                .filter(|(_, l)| **l != CellLabel::Wall)
                .map(|(i, _)| SubGoal::State(StateId::new(i / w, i % w))),
        )
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Optimizer {
    #[default]
    Sgd,
    Adam,
}

impl fmt::Display for Optimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Optimizer::Sgd => "sgd",
            Optimizer::Adam => "adam",
        })
    }
}

impl FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            _ => Err(Error::Config(format!("unknown optimizer `{s}`"))),
        }
    }
}

const ADAM_B1: f64 = 0.9;
const ADAM_B2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Layout {
    hidden: usize,
}

impl Layout {
    const NAMES: [&'static str; 10] = [
        "v_w1", "v_b1", "v_w2", "v_b2", "n_w", "n_b", "p_w1", "p_b1", "p_w2", "p_b2",
    ];

    fn sizes(self) -> [usize; 10] {
        let h = self.hidden;
        [h * VALUE_IN, h, h, 1, h, 1, h * PRIOR_IN, h, h, 1]
    }

    fn offsets(self) -> [usize; 11] {
        let mut o = [0; 11];
        for (i, s) in self.sizes().iter().enumerate() {
            o[i + 1] = o[i] + s;
        }
        o
    }

    fn len(self) -> usize {
        self.offsets()[10]
    }
}

const V_W1: usize = 0;
const V_B1: usize = 1;
const V_W2: usize = 2;
const V_B2: usize = 3;
const N_W: usize = 4;
const N_B: usize = 5;
const P_W1: usize = 6;
const P_B1: usize = 7;
const P_W2: usize = 8;
const P_B2: usize = 9;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainableModel {
    hidden: usize,
    pub temperature: f64,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    params: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    step: u64,
    offsets: [usize; 11],
}

/// One training example for the prior head: a distribution over the candidates of the
/// encoding, given as sparse `(candidate index, probability)` pairs.
pub struct PriorExample<'a> {
    pub enc: &'a TaskEncoding,
    pub key: OrKey,
    pub target: &'a [(usize, f64)],
}

pub struct ValueExample<'a> {
    pub enc: &'a TaskEncoding,
    pub key: OrKey,
    pub target: f64,
}

struct Trunk {
    h: Vec<f64>,
}

impl TrainableModel {
    pub fn new(hidden: usize, seed: u64) -> Self {
        let layout = Layout { hidden };
        let offsets = layout.offsets();
        let mut params = vec![0.0; layout.len()];
        let mut rng = rng_from_seed(seed);
        let fan_in = [VALUE_IN, 0, hidden, 0, hidden, 0, PRIOR_IN, 0, hidden, 0];
        for (a, &f) in fan_in.iter().enumerate() {
            if f == 0 {
                continue;
            }
            let bound = 1.0 / (f as f64).sqrt();
            for p in &mut params[offsets[a]..offsets[a + 1]] {
                *p = rng.random_range(-bound..bound);
            }
        }
        let n = params.len();
        TrainableModel {
            hidden,
            temperature: 0.003,
            learning_rate: 1e-3,
            optimizer: Optimizer::Sgd,
            params,
            adam_m: vec![0.0; n],
            adam_v: vec![0.0; n],
            step: 0,
            offsets,
        }
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    fn arr(&self, a: usize) -> &[f64] {
        &self.params[self.offsets[a]..self.offsets[a + 1]]
    }

    fn value_trunk(&self, x: &[f64; VALUE_IN]) -> Trunk {
        let w1 = self.arr(V_W1);
        let b1 = self.arr(V_B1);
        let h = (0..self.hidden)
            .map(|u| {
                let row = &w1[u * VALUE_IN..(u + 1) * VALUE_IN];
                (b1[u] + dot(row, x)).tanh()
            })
            .collect();
        Trunk { h }
    }

    fn value_logit(&self, t: &Trunk) -> f64 {
        dot(self.arr(V_W2), &t.h) + self.arr(V_B2)[0]
    }

    fn null_logit(&self, t: &Trunk) -> f64 {
        dot(self.arr(N_W), &t.h) + self.arr(N_B)[0]
    }

    fn prior_hidden(&self, x: &[f64; PRIOR_IN], h: &mut [f64]) {
        let w1 = self.arr(P_W1);
        let b1 = self.arr(P_B1);
        for (u, hu) in h.iter_mut().enumerate() {
            *hu = (b1[u] + dot(&w1[u * PRIOR_IN..(u + 1) * PRIOR_IN], x)).tanh();
        }
    }

    /// Raw logits over `candidates` (temperature 1).
    pub fn logits(&self, enc: &TaskEncoding, key: OrKey, candidates: &[SubGoal]) -> Vec<f64> {
        let trunk = self.value_trunk(&Features::value_input(enc, key));
        let null = self.null_logit(&trunk);
        let w2 = self.arr(P_W2);
        let b2 = self.arr(P_B2)[0];
        let mut h = vec![0.0; self.hidden];
        candidates
            .iter()
            .map(|c| match c {
                SubGoal::Null => null,
                SubGoal::State(m) => {
                    self.prior_hidden(&Features::prior_input(enc, key, *m), &mut h);
                    dot(w2, &h) + b2
                }
            })
            .collect()
    }

    pub fn value_of(&self, enc: &TaskEncoding, key: OrKey) -> f64 {
        let trunk = self.value_trunk(&Features::value_input(enc, key));
        sigmoid(self.value_logit(&trunk))
    }

    /// Mean prior and value cross-entropies of a batch and their gradient with respect
    /// to the flat parameter vector.
    pub fn loss_and_grad(&self, prior: &[PriorExample<'_>], value: &[ValueExample<'_>]) -> (f64, f64, Vec<f64>) {
        let mut grad = vec![0.0; self.params.len()];
        let hsz = self.hidden;
        let o = self.offsets;
        let mut prior_loss = 0.0;
        let mut value_loss = 0.0;

        // Backpropagates into the value trunk given d(value logit) and d(null logit).
        let backprop_trunk = |grad: &mut [f64], x: &[f64; VALUE_IN], t: &Trunk, dz: f64, dn: f64| {
            let w2 = self.arr(V_W2);
            let nw = self.arr(N_W);
            for u in 0..hsz {
                grad[o[V_W2] + u] += dz * t.h[u];
                grad[o[N_W] + u] += dn * t.h[u];
                let da = (dz * w2[u] + dn * nw[u]) * (1.0 - t.h[u] * t.h[u]);
                grad[o[V_B1] + u] += da;
                let row = &mut grad[o[V_W1] + u * VALUE_IN..o[V_W1] + (u + 1) * VALUE_IN];
                for (g, xi) in row.iter_mut().zip(x.iter()) {
                    *g += da * xi;
                }
            }
            grad[o[V_B2]] += dz;
            grad[o[N_B]] += dn;
        };

        if !prior.is_empty() {
            let scale = 1.0 / prior.len() as f64;
            let pw2 = self.arr(P_W2);
            let mut h = vec![0.0; hsz];
            for ex in prior {
                let cands = encoding_candidates(ex.enc);
                let xv = Features::value_input(ex.enc, ex.key);
                let trunk = self.value_trunk(&xv);
                let logits = self.logits(ex.enc, ex.key, &cands);
                let q = softmax(&logits, 1.0);
                let mut dl: Vec<f64> = q.iter().map(|p| p * scale).collect();
                for &(c, t) in ex.target {
                    dl[c] -= t * scale;
                    if t > 0.0 {
                        prior_loss -= t * q[c].max(f64::MIN_POSITIVE).ln();
                    }
                }
                for (c, cand) in cands.iter().enumerate() {
                    let d = dl[c];
                    match cand {
                        SubGoal::Null => backprop_trunk(&mut grad, &xv, &trunk, 0.0, d),
                        SubGoal::State(m) => {
                            let x = Features::prior_input(ex.enc, ex.key, *m);
                            self.prior_hidden(&x, &mut h);
                            grad[o[P_B2]] += d;
                            for u in 0..hsz {
                                grad[o[P_W2] + u] += d * h[u];
                                let da = d * pw2[u] * (1.0 - h[u] * h[u]);
                                grad[o[P_B1] + u] += da;
                                let row = &mut grad[o[P_W1] + u * PRIOR_IN..o[P_W1] + (u + 1) * PRIOR_IN];
                                for (g, xi) in row.iter_mut().zip(x.iter()) {
                                    *g += da * xi;
                                }
                            }
                        }
                    }
                }
            }
            prior_loss *= scale;
        }

        if !value.is_empty() {
            let scale = 1.0 / value.len() as f64;
            for ex in value {
                let xv = Features::value_input(ex.enc, ex.key);
                let trunk = self.value_trunk(&xv);
                let z = self.value_logit(&trunk);
                value_loss += bernoulli_ce(z, ex.target);
                let dz = (sigmoid(z) - ex.target) * scale;
                backprop_trunk(&mut grad, &xv, &trunk, dz, 0.0);
            }
            value_loss *= scale;
        }
        (prior_loss, value_loss, grad)
    }

    /// One optimizer step along `-grad`.
    pub fn apply_gradient(&mut self, grad: &[f64]) {
        self.step += 1;
        let lr = self.learning_rate;
        match self.optimizer {
            Optimizer::Sgd => {
                for (p, g) in self.params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam => {
                let t = self.step as i32;
                let c1 = 1.0 - ADAM_B1.powi(t);
                let c2 = 1.0 - ADAM_B2.powi(t);
                for (i, &g) in grad.iter().enumerate() {
                    self.adam_m[i] = ADAM_B1 * self.adam_m[i] + (1.0 - ADAM_B1) * g;
                    self.adam_v[i] = ADAM_B2 * self.adam_v[i] + (1.0 - ADAM_B2) * g * g;
                    let mh = self.adam_m[i] / c1;
                    let vh = self.adam_v[i] / c2;
                    self.params[i] -= lr * mh / (vh.sqrt() + ADAM_EPS);
                }
            }
        }
    }

    /// Text checkpoint: a `model v1` header, settings, then named parameter arrays.
    pub fn to_text(&self) -> String {
        let mut out = String::from("model v1\n");
        out.push_str(&format!("hidden {}\n", self.hidden));
        out.push_str(&format!("temperature {}\n", self.temperature));
        out.push_str(&format!("learning_rate {}\n", self.learning_rate));
        out.push_str(&format!("optimizer {}\n", self.optimizer));
        out.push_str(&format!("step {}\n", self.step));
        let mut write_array = |name: &str, data: &[f64]| {
            out.push_str(&format!("array {name} {}\n", data.len()));
            let line: Vec<String> = data.iter().map(|v| v.to_string()).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        };
        for (a, name) in Layout::NAMES.iter().enumerate() {
            write_array(name, self.arr(a));
        }
        write_array("adam_m", &self.adam_m);
        write_array("adam_v", &self.adam_v);
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut next = |what: &str| -> Result<(usize, &str)> {
            lines
                .next()
                .map(|(i, l)| (i + 1, l))
                .ok_or_else(|| Error::parse(0, format!("unexpected end of checkpoint, expected {what}")))
        };
        let (ln, header) = next("header")?;
        if header != "model v1" {
            return Err(Error::parse(ln, format!("expected `model v1`, got `{header}`")));
        }
        fn field<'a>(line: (usize, &'a str), name: &str) -> Result<&'a str> {
            line.1
                .strip_prefix(name)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| Error::parse(line.0, format!("expected `{name}`")))
        }
        fn num<T: FromStr>(ln: usize, s: &str) -> Result<T>
        where
            T::Err: fmt::Display,
        {
            s.parse().map_err(|e| Error::parse(ln, format!("bad number `{s}`: {e}")))
        }
        let l = next("hidden")?;
        let hidden: usize = num(l.0, field(l, "hidden")?)?;
        let l = next("temperature")?;
        let temperature: f64 = num(l.0, field(l, "temperature")?)?;
        let l = next("learning_rate")?;
        let learning_rate: f64 = num(l.0, field(l, "learning_rate")?)?;
        let l = next("optimizer")?;
        let optimizer: Optimizer = field(l, "optimizer")?.parse()?;
        let l = next("step")?;
        let step: u64 = num(l.0, field(l, "step")?)?;
        let mut model = TrainableModel::new(hidden, 0);
        model.temperature = temperature;
        model.learning_rate = learning_rate;
        model.optimizer = optimizer;
        model.step = step;
        let mut read_array = |name: &str, expected: usize| -> Result<Vec<f64>> {
            let l = next(name)?;
            let rest = field(l, "array")?;
            let mut parts = rest.split(' ');
            if parts.next() != Some(name) {
                return Err(Error::parse(l.0, format!("expected array `{name}`")));
            }
            let len: usize = num(l.0, parts.next().unwrap_or(""))?;
            if len != expected {
                return Err(Error::parse(l.0, format!("array `{name}` has {len} entries, expected {expected}")));
            }
            let (ln, data) = next(name)?;
            let values = data
                .split_whitespace()
                .map(|t| num::<f64>(ln, t))
                .collect::<Result<Vec<_>>>()?;
            if values.len() != len {
                return Err(Error::parse(ln, format!("array `{name}` has {} values, expected {len}", values.len())));
            }
            Ok(values)
        };
        let sizes = Layout { hidden }.sizes();
        let mut params = Vec::with_capacity(model.params.len());
        for (name, size) in Layout::NAMES.iter().zip(sizes) {
            params.extend(read_array(name, size)?);
        }
        let n = params.len();
        model.params = params;
        model.adam_m = read_array("adam_m", n)?;
        model.adam_v = read_array("adam_v", n)?;
        let l = next("end")?;
        if l.1 != "end" {
            return Err(Error::parse(l.0, "expected `end`"));
        }
        if model.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::parse(0, "non-finite parameter"));
        }
        Ok(model)
    }
}

impl PolicyPrior for TrainableModel {
    fn prior(&self, enc: &TaskEncoding, key: OrKey, candidates: &[SubGoal]) -> Vec<f64> {
        softmax(&self.logits(enc, key, candidates), self.temperature)
    }
}

impl ValueEstimator for TrainableModel {
    fn value(&self, enc: &TaskEncoding, key: OrKey) -> f64 {
        self.value_of(enc, key)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `-(t log sigmoid(z) + (1 - t) log(1 - sigmoid(z)))`, computed stably from the logit.
pub fn bernoulli_ce(z: f64, t: f64) -> f64 {
    // log(1 + e^z) - t z
    let softplus = if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
    softplus - t * z
}

pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|l| ((l - m) / temperature).exp()).collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}
