//! Optimistic elimination with linear features: per-level ridge regression,
//! elliptical confidence sets and a globally optimistic plan per episode.

mod plan;
mod ridge;

pub use plan::{plan_diag_exact, plan_search, OptimisticPlan, PlanInput, PlanMode, SearchSettings};
pub use ridge::{elliptic_potential, elliptic_potential_holds, ridge_solve, LinearState};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::game::{evaluate_policy_pair, ne_value_iteration, sample_episode, EpisodeRecord, GameSolution, MarkovGame};
use crate::harness::generators::value_bounds;
use crate::hypothesis::LinearFeatures;
use crate::onemg::Opponent;
use crate::rng;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    pub episodes: usize,
    #[serde(default)]
    pub mode: PlanMode,
    /// Constant in `β = C_β · √d · ln(HK/p)`.
    #[serde(default = "one")]
    pub c_beta: f64,
    /// Constant in the radius `R = C_w · H · β`.
    #[serde(default = "one")]
    pub c_width: f64,
    #[serde(default = "crate::onemg::default_p")]
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub search: SearchSettings,
    #[serde(default = "crate::onemg::default_tol")]
    pub solver_tol: f64,
    #[serde(default)]
    pub execution: Execution,
}

impl LinearConfig {
    pub fn new(episodes: usize, seed: u64) -> Self {
        LinearConfig {
            episodes,
            mode: PlanMode::DiagExact,
            c_beta: 1.0,
            c_width: 1.0,
            p: crate::onemg::default_p(),
            seed,
            search: SearchSettings::default(),
            solver_tol: crate::onemg::default_tol(),
            execution: Execution::default(),
        }
    }

    /// `(β, R)`.
    pub fn widths(&self, dim: usize, horizon: usize) -> Result<(f64, f64)> {
        if !(self.p > 0.0 && self.p < 1.0) || !(self.c_beta >= 0.0) || !(self.c_width >= 0.0) {
            return Err(Error::Config(format!(
                "need 0 < p < 1 and nonnegative constants, got p = {}, C_beta = {}, C_width = {}",
                self.p, self.c_beta, self.c_width
            )));
        }
        let k = self.episodes.max(1) as f64;
        let beta = self.c_beta * (dim as f64).sqrt() * (horizon as f64 * k / self.p).ln().max(0.0);
        Ok((beta, self.c_width * horizon as f64 * beta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub k: usize,
    pub regret_increment: f64,
    pub cum_regret: f64,
    /// Planned `V_1(x_1)`.
    pub planned_value: f64,
    pub optimism_gap: f64,
    /// Whether the true parameters satisfied the confidence constraints at
    /// planning time (empty when `Q*` is not linear in the features).
    pub theta_feasible: Option<bool>,
}

#[derive(Debug, Clone)]
pub struct LinearRun {
    pub rows: Vec<LinearRow>,
    pub episodes: Vec<EpisodeRecord>,
    pub v_star: f64,
    pub beta: f64,
    pub radius: f64,
    /// `(ln det, Σ‖φ‖², 2 ln det)` per level over the realised features.
    pub potential: Vec<(f64, f64, f64)>,
    pub potential_ok: bool,
    /// Episodes where the truth was feasible but the plan fell below `V*`
    /// (only counted in diag-exact mode).
    pub optimism_violations: usize,
}

impl LinearRun {
    pub fn cumulative_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }

    pub fn theta_always_feasible(&self) -> Option<bool> {
        self.rows.iter().map(|r| r.theta_feasible).try_fold(true, |acc, f| f.map(|b| acc && b))
    }
}

/// Per-level parameters reproducing `Q*` exactly, if they exist.
pub fn true_parameters(features: &LinearFeatures, solution: &GameSolution) -> Option<Vec<DVector<f64>>> {
    let sh = features.shape();
    let d = features.dim();
    (0..sh.horizon)
        .map(|h| {
            let phi = DMatrix::from_fn(sh.cells(), d, |c, i| {
                let (x, a, b) = sh.decode_cell(c);
                features.phi(h, x, a, b)[i]
            });
            let target = DVector::from_column_slice(solution.q_star.level(h));
            let theta = phi.clone().svd(true, true).solve(&target, 1e-12).ok()?;
            ((&phi * &theta - &target).amax() <= 1e-8).then_some(theta)
        })
        .collect()
}

fn truth_feasible(state: &LinearState, theta_star: &[DVector<f64>], solution: &GameSolution, radius: f64) -> Result<bool> {
    let h_max = theta_star.len();
    let s = solution.v_star.len() / (h_max + 1);
    for (h, th) in theta_star.iter().enumerate() {
        let v_next = (h + 1 < h_max).then(|| &solution.v_star[(h + 1) * s..(h + 2) * s]);
        let w = state.ridge_update(h, v_next)?;
        let diff = th - w;
        let norm = (diff.transpose() * state.gram(h) * &diff)[(0, 0)].max(0.0).sqrt();
        if norm > radius + 1e-8 {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn run_linear(game: &MarkovGame, features: &LinearFeatures, config: &LinearConfig, opponent: &Opponent) -> Result<LinearRun> {
    let sh = game.shape();
    if features.shape() != sh {
        return Err(Error::Shape(format!("features shape {:?} does not match game shape {sh:?}", features.shape())));
    }
    opponent.check(game)?;
    if config.mode == PlanMode::DiagExact && !features.is_one_hot() {
        return Err(Error::Config("diag-exact planning requires one-hot features".into()));
    }
    let (beta, radius) = config.widths(features.dim(), sh.horizon)?;
    let solution = ne_value_iteration(game, config.solver_tol)?;
    let v_star = solution.value();
    let theta_star = true_parameters(features, &solution);
    let bounds: Vec<(f64, f64)> = (0..sh.horizon).map(|h| value_bounds(game, h)).collect();
    let mut state = LinearState::new(sh, features.dim());
    let mut rows = Vec::with_capacity(config.episodes);
    let mut episodes = Vec::with_capacity(config.episodes);
    let mut cum = 0.0;
    let mut optimism_violations = 0;
    let ep_tag = rng::label("linear-episode");
    for k in 0..config.episodes {
        let input = PlanInput {
            state: &state,
            features,
            radius,
            value_bounds: &bounds,
            initial_state: game.initial_state(),
            solver_tol: config.solver_tol,
        };
        let plan = match config.mode {
            PlanMode::DiagExact => plan_diag_exact(&input)?,
            PlanMode::Search => {
                let plan_seed = rng::stream(config.seed, &[ep_tag, k as u64, 2]).random::<u64>();
                plan_search(&input, &config.search, plan_seed, config.execution)?
            }
        };
        let feasible = theta_star.as_ref().map(|t| truth_feasible(&state, t, &solution, radius)).transpose()?;
        let gap = plan.value() - v_star;
        if config.mode == PlanMode::DiagExact && feasible == Some(true) && gap < -1e-8 {
            optimism_violations += 1;
            log::error!("episode {}: planned value {} below V* {v_star} with feasible truth", k + 1, plan.value());
        }
        let nu = opponent.policy(k, &plan.pi, game, &solution)?;
        let increment = v_star - evaluate_policy_pair(game, &plan.pi, &nu)?;
        cum += increment;
        let episode = sample_episode(game, &plan.pi, &nu, &mut rng::stream(config.seed, &[ep_tag, k as u64, 1]))?;
        state.push_episode(features, &episode)?;
        rows.push(LinearRow {
            k: k + 1,
            regret_increment: increment,
            cum_regret: cum,
            planned_value: plan.value(),
            optimism_gap: gap,
            theta_feasible: feasible,
        });
        episodes.push(episode);
    }
    let potential = (0..sh.horizon).map(|h| elliptic_potential(state.history(h), features.dim())).collect::<Result<Vec<_>>>()?;
    let potential_ok = potential.iter().all(|&(l, m, r)| l <= m + 1e-9 && m <= r + 1e-9);
    Ok(LinearRun { rows, episodes, v_star, beta, radius, potential, potential_ok, optimism_violations })
}
