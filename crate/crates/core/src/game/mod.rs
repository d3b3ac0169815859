//! Tabular two-player zero-sum episodic Markov games.
//!
//! Player 1 picks rows and maximizes, player 2 picks columns and minimizes.
//! Steps are indexed `0..horizon` internally; files and reports use the same
//! zero-based indices unless stated otherwise.

mod io;
mod lp;
mod sample;
mod solve;

pub use io::{load_game, save_game, save_solution, GameFile, SolutionFile};
pub use lp::{best_response_col, best_response_row, exploitability, solve_matrix_game, MatrixGameSolution};
pub(crate) use lp::argmin_first;
pub use sample::{sample_episode, sample_index, EpisodeRecord, Step};
pub use solve::{
    best_response_value_iteration, evaluate_policy_pair, ne_value_iteration, occupancy, policy_q_function,
    restricted_best_response, GameSolution, PairValues,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability rows must sum to one within this tolerance.
pub const PROB_TOL: f64 = 1e-12;

/// Default tolerance for matrix-game solutions.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub horizon: usize,
    pub n_states: usize,
    pub n_actions1: usize,
    pub n_actions2: usize,
}

impl Shape {
    pub fn new(horizon: usize, n_states: usize, n_actions1: usize, n_actions2: usize) -> Self {
        Shape { horizon, n_states, n_actions1, n_actions2 }
    }

    /// Number of `(x, a, b)` cells per step.
    pub fn cells(&self) -> usize {
        self.n_states * self.n_actions1 * self.n_actions2
    }

    pub fn q_len(&self) -> usize {
        self.horizon * self.cells()
    }

    #[inline]
    pub fn cell(&self, x: usize, a: usize, b: usize) -> usize {
        (x * self.n_actions1 + a) * self.n_actions2 + b
    }

    #[inline]
    pub fn q_index(&self, h: usize, x: usize, a: usize, b: usize) -> usize {
        h * self.cells() + self.cell(x, a, b)
    }

    /// Inverse of [`Shape::cell`].
    pub fn decode_cell(&self, cell: usize) -> (usize, usize, usize) {
        let b = cell % self.n_actions2;
        let a = (cell / self.n_actions2) % self.n_actions1;
        let x = cell / (self.n_actions1 * self.n_actions2);
        (x, a, b)
    }

    /// The same shape seen from the other player's side.
    pub fn swapped(&self) -> Shape {
        Shape { n_actions1: self.n_actions2, n_actions2: self.n_actions1, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 || self.n_states == 0 || self.n_actions1 == 0 || self.n_actions2 == 0 {
            return Err(Error::Input(format!("all dimensions must be positive, got {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Input(format!("matrix must be nonempty, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!("{}x{} matrix needs {} entries, got {}", rows, cols, rows * cols, data.len())));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Matrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `M · q`
    pub fn mul_col(&self, q: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).iter().zip(q).map(|(m, p)| m * p).sum()).collect()
    }

    /// `pᵀ · M`
    pub fn mul_row(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &pi) in p.iter().enumerate() {
            if pi == 0.0 {
                continue;
            }
            for (o, m) in out.iter_mut().zip(self.row(i)) {
                *o += pi * m;
            }
        }
        out
    }

    /// `pᵀ · M · q`
    pub fn bilinear(&self, p: &[f64], q: &[f64]) -> f64 {
        self.mul_row(p).iter().zip(q).map(|(a, b)| a * b).sum()
    }

    /// The game seen by the other player: `-Mᵀ`.
    pub fn negated_transpose(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(-self.get(i, j));
            }
        }
        Matrix { rows: self.cols, cols: self.rows, data }
    }
}

/// Checks that `p` is a probability vector of length `n`.
pub fn check_distribution(p: &[f64], n: usize, what: &str) -> Result<()> {
    if p.len() != n {
        return Err(Error::Shape(format!("{what}: expected {n} probabilities, got {}", p.len())));
    }
    if let Some(i) = p.iter().position(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Input(format!("{what}: entry {i} is {} (must be a nonnegative number)", p[i])));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > PROB_TOL {
        return Err(Error::Input(format!("{what}: sums to {s}, not 1")));
    }
    Ok(())
}

/// Tabular zero-sum Markov game with deterministic rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovGame {
    shape: Shape,
    initial_state: usize,
    reward_range: (f64, f64),
    rewards: Vec<f64>,
    transitions: Vec<f64>,
}

impl MarkovGame {
    /// Builds and validates a game. `rewards` is laid out `[h][x][a][b]`,
    /// `transitions` is `[h][x][a][b][x']`.
    pub fn new(
        shape: Shape,
        initial_state: usize,
        reward_range: (f64, f64),
        rewards: Vec<f64>,
        transitions: Vec<f64>,
    ) -> Result<Self> {
        shape.validate()?;
        if initial_state >= shape.n_states {
            return Err(Error::Input(format!("initial_state {initial_state} out of range 0..{}", shape.n_states)));
        }
        let (lo, hi) = reward_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Input(format!("invalid reward range [{lo}, {hi}]")));
        }
        if rewards.len() != shape.q_len() {
            return Err(Error::Shape(format!("rewards: expected {} entries, got {}", shape.q_len(), rewards.len())));
        }
        if transitions.len() != shape.q_len() * shape.n_states {
            return Err(Error::Shape(format!(
                "transitions: expected {} entries, got {}",
                shape.q_len() * shape.n_states,
                transitions.len()
            )));
        }
        let game = MarkovGame { shape, initial_state, reward_range, rewards, transitions };
        for h in 0..shape.horizon {
            for x in 0..shape.n_states {
                for a in 0..shape.n_actions1 {
                    for b in 0..shape.n_actions2 {
                        let r = game.reward(h, x, a, b);
                        if !r.is_finite() || r < lo || r > hi {
                            return Err(Error::Input(format!(
                                "reward at (h={h}, x={x}, a={a}, b={b}) is {r}, outside [{lo}, {hi}]"
                            )));
                        }
                        check_distribution(
                            game.next_dist(h, x, a, b),
                            shape.n_states,
                            &format!("transition row (h={h}, x={x}, a={a}, b={b})"),
                        )?;
                    }
                }
            }
        }
        Ok(game)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn horizon(&self) -> usize {
        self.shape.horizon
    }

    pub fn n_states(&self) -> usize {
        self.shape.n_states
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn reward_range(&self) -> (f64, f64) {
        self.reward_range
    }

    /// Largest absolute per-step reward the range admits.
    pub fn reward_bound(&self) -> f64 {
        self.reward_range.0.abs().max(self.reward_range.1.abs())
    }

    #[inline]
    pub fn reward(&self, h: usize, x: usize, a: usize, b: usize) -> f64 {
        self.rewards[self.shape.q_index(h, x, a, b)]
    }

    #[inline]
    pub fn next_dist(&self, h: usize, x: usize, a: usize, b: usize) -> &[f64] {
        let s = self.shape.n_states;
        let i = self.shape.q_index(h, x, a, b) * s;
        &self.transitions[i..i + s]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    /// Whether every transition row puts all mass on a single successor.
    pub fn is_deterministic(&self) -> bool {
        self.transitions.chunks(self.shape.n_states).all(|row| row.contains(&1.0))
    }

    /// Player-swapped, reward-negated copy. Applying it twice is the identity.
    pub fn swap_negate(&self) -> MarkovGame {
        let sh = self.shape;
        let sw = sh.swapped();
        let mut rewards = vec![0.0; sw.q_len()];
        let mut transitions = vec![0.0; sw.q_len() * sh.n_states];
        for h in 0..sh.horizon {
            for x in 0..sh.n_states {
                for a in 0..sh.n_actions1 {
                    for b in 0..sh.n_actions2 {
                        let j = sw.q_index(h, x, b, a);
                        rewards[j] = -self.reward(h, x, a, b);
                        transitions[j * sh.n_states..(j + 1) * sh.n_states].copy_from_slice(self.next_dist(h, x, a, b));
                    }
                }
            }
        }
        let (lo, hi) = self.reward_range;
        MarkovGame { shape: sw, initial_state: self.initial_state, reward_range: (-hi, -lo), rewards, transitions }
    }
}

/// A Q-function tuple `(f_1, …, f_H)` stored as a dense `[h][x][a][b]` table.
#[derive(Debug, Clone, PartialEq)]
pub struct QFunction {
    shape: Shape,
    values: Vec<f64>,
}

impl QFunction {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        shape.validate()?;
        if values.len() != shape.q_len() {
            return Err(Error::Shape(format!("Q table: expected {} entries, got {}", shape.q_len(), values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Input(format!("Q table entry {i} is not finite")));
        }
        Ok(QFunction { shape, values })
    }

    pub fn zeros(shape: Shape) -> Self {
        QFunction { shape, values: vec![0.0; shape.q_len()] }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn get(&self, h: usize, x: usize, a: usize, b: usize) -> f64 {
        self.values[self.shape.q_index(h, x, a, b)]
    }

    #[inline]
    pub fn set(&mut self, h: usize, x: usize, a: usize, b: usize, v: f64) {
        let i = self.shape.q_index(h, x, a, b);
        self.values[i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Level-`h` table, laid out `[x][a][b]`.
    pub fn level(&self, h: usize) -> &[f64] {
        let c = self.shape.cells();
        &self.values[h * c..(h + 1) * c]
    }

    /// Payoff matrix of the stage game at `(h, x)`.
    pub fn stage(&self, h: usize, x: usize) -> Matrix {
        let (a1, a2) = (self.shape.n_actions1, self.shape.n_actions2);
        let i = self.shape.q_index(h, x, 0, 0);
        Matrix { rows: a1, cols: a2, data: self.values[i..i + a1 * a2].to_vec() }
    }

    /// Sup-norm distance.
    pub fn distance(&self, other: &QFunction) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `f'(x, b, a) = -f(x, a, b)`: the same hypothesis from player 2's side.
    pub fn swap_negate(&self) -> QFunction {
        let sh = self.shape;
        let sw = sh.swapped();
        let mut values = vec![0.0; sw.q_len()];
        for h in 0..sh.horizon {
            for x in 0..sh.n_states {
                for a in 0..sh.n_actions1 {
                    for b in 0..sh.n_actions2 {
                        values[sw.q_index(h, x, b, a)] = -self.get(h, x, a, b);
                    }
                }
            }
        }
        QFunction { shape: sw, values }
    }
}

/// Per-step, per-state distributions over one player's actions.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy {
    horizon: usize,
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    /// `probs` is laid out `[h][x][a]`.
    pub fn new(horizon: usize, n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != horizon * n_states * n_actions {
            return Err(Error::Shape(format!(
                "policy: expected {} probabilities, got {}",
                horizon * n_states * n_actions,
                probs.len()
            )));
        }
        let p = StochasticPolicy { horizon, n_states, n_actions, probs };
        for h in 0..horizon {
            for x in 0..n_states {
                check_distribution(p.row(h, x), n_actions, &format!("policy row (h={h}, x={x})"))?;
            }
        }
        Ok(p)
    }

    pub fn uniform(horizon: usize, n_states: usize, n_actions: usize) -> Self {
        let u = 1.0 / n_actions as f64;
        StochasticPolicy { horizon, n_states, n_actions, probs: vec![u; horizon * n_states * n_actions] }
    }

    /// Deterministic policy from a `[h][x]` table of actions.
    pub fn pure(horizon: usize, n_states: usize, n_actions: usize, action: impl Fn(usize, usize) -> usize) -> Self {
        let mut probs = vec![0.0; horizon * n_states * n_actions];
        for h in 0..horizon {
            for x in 0..n_states {
                probs[(h * n_states + x) * n_actions + action(h, x)] = 1.0;
            }
        }
        StochasticPolicy { horizon, n_states, n_actions, probs }
    }

    /// Assembles a policy from per-`(h, x)` rows, renormalizing solver noise.
    pub(crate) fn from_rows(horizon: usize, n_states: usize, n_actions: usize, rows: Vec<Vec<f64>>) -> Self {
        let mut probs = Vec::with_capacity(horizon * n_states * n_actions);
        for row in rows {
            debug_assert_eq!(row.len(), n_actions);
            probs.extend(row);
        }
        StochasticPolicy { horizon, n_states, n_actions, probs }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    #[inline]
    pub fn row(&self, h: usize, x: usize) -> &[f64] {
        let i = (h * self.n_states + x) * self.n_actions;
        &self.probs[i..i + self.n_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Checks that the policy fits `shape` as the policy of `player`.
    pub fn check_for(&self, shape: Shape, player: Player) -> Result<()> {
        let n_actions = match player {
            Player::One => shape.n_actions1,
            Player::Two => shape.n_actions2,
        };
        if self.horizon != shape.horizon || self.n_states != shape.n_states || self.n_actions != n_actions {
            return Err(Error::Shape(format!(
                "policy is {}x{}x{}, game expects {}x{}x{} for player {:?}",
                self.horizon, self.n_states, self.n_actions, shape.horizon, shape.n_states, n_actions, player
            )));
        }
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &StochasticPolicy) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}
