use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{EpisodeRecord, Shape};

/// One observed transition `(x, a, b, r, x')` at a fixed level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub x: usize,
    pub a: usize,
    pub b: usize,
    pub r: f64,
    pub x_next: usize,
}

/// Per-level transition lists plus per-`(h, x, a, b, x')` sufficient
/// statistics `(n, Σr, Σr²)` for fast squared-loss evaluation.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    shape: Shape,
    levels: Vec<Vec<Transition>>,
    stats: Vec<[f64; 3]>,
}

impl ReplayBuffer {
    pub fn new(shape: Shape) -> Self {
        ReplayBuffer {
            shape,
            levels: vec![Vec::new(); shape.horizon],
            stats: vec![[0.0; 3]; shape.q_len() * shape.n_states],
        }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Number of episodes appended.
    pub fn len(&self) -> usize {
        self.levels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn level(&self, h: usize) -> &[Transition] {
        &self.levels[h]
    }

    pub fn push_episode(&mut self, ep: &EpisodeRecord) -> Result<()> {
        let sh = self.shape;
        if ep.steps.len() != sh.horizon {
            return Err(Error::Shape(format!("episode has {} steps, horizon is {}", ep.steps.len(), sh.horizon)));
        }
        for (h, s) in ep.steps.iter().enumerate() {
            if s.h != h || s.x >= sh.n_states || s.a >= sh.n_actions1 || s.b >= sh.n_actions2 || s.x_next >= sh.n_states {
                return Err(Error::Input(format!("step {h} of episode is out of range: {s:?}")));
            }
        }
        for (h, s) in ep.steps.iter().enumerate() {
            self.levels[h].push(Transition { x: s.x, a: s.a, b: s.b, r: s.r, x_next: s.x_next });
            let st = &mut self.stats[sh.q_index(h, s.x, s.a, s.b) * sh.n_states + s.x_next];
            st[0] += 1.0;
            st[1] += s.r;
            st[2] += s.r * s.r;
        }
        Ok(())
    }

    /// `Σ_τ [ξ(x,a,b) − r − ζ(x')]²` over level `h`, where `xi` is a level
    /// table over cells and `succ` the successor value per state (`None`
    /// at the last level).
    pub fn squared_loss(&self, h: usize, xi: &[f64], succ: Option<&[f64]>) -> f64 {
        let sh = self.shape;
        let s = sh.n_states;
        let base = h * sh.cells() * s;
        let mut total = 0.0;
        for c in 0..sh.cells() {
            for xn in 0..s {
                let [n, sr, srr] = self.stats[base + c * s + xn];
                if n == 0.0 {
                    continue;
                }
                let d = xi[c] - succ.map_or(0.0, |v| v[xn]);
                total += n * d * d - 2.0 * d * sr + srr;
            }
        }
        total.max(0.0)
    }

    /// Same quantity by a direct pass over stored transitions.
    pub fn squared_loss_direct(&self, h: usize, xi: &[f64], succ: Option<&[f64]>) -> f64 {
        self.levels[h]
            .iter()
            .map(|t| {
                let e = xi[self.shape.cell(t.x, t.a, t.b)] - t.r - succ.map_or(0.0, |v| v[t.x_next]);
                e * e
            })
            .sum()
    }
}
