//! Optimistic Nash elimination against an arbitrary, unobserved opponent.
//!
//! Each episode the learner plays the max-min policy of the most optimistic
//! surviving hypothesis, appends the trajectory, and re-filters the whole
//! family by excess squared Bellman loss.

mod audit;
mod buffer;
mod elimination;
mod opponent;

pub use audit::{decomposition_audit, StepAudit, AUDIT_TOL};
pub use buffer::{ReplayBuffer, Transition};
pub use elimination::{excess_loss, level_candidates, select_optimistic, update_version_space, Elimination};
pub use opponent::Opponent;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{try_map_range, Execution};
use crate::game::{
    evaluate_policy_pair, ne_value_iteration, policy_q_function, sample_episode, EpisodeRecord, MarkovGame,
    DEFAULT_SOLVER_TOL,
};
use crate::hypothesis::{covering_log, induced_max_min_policy, FamilyCover, FiniteValueFamily, SolvedHypothesis};
use crate::rng;

/// Elimination threshold: a number, `inf`, or `auto` for the
/// confidence-width formula.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "BetaRepr", into = "BetaRepr")]
pub enum Beta {
    #[default]
    Auto,
    Value(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BetaRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<BetaRepr> for Beta {
    type Error = Error;
    fn try_from(r: BetaRepr) -> Result<Self> {
        match r {
            BetaRepr::Number(v) => Beta::from_str(&v.to_string()),
            BetaRepr::Text(s) => s.parse(),
        }
    }
}

impl From<Beta> for BetaRepr {
    fn from(b: Beta) -> Self {
        match b {
            Beta::Value(v) if v.is_finite() => BetaRepr::Number(v),
            other => BetaRepr::Text(other.to_string()),
        }
    }
}

impl FromStr for Beta {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "auto" => Ok(Beta::Auto),
            "inf" | "infinity" => Ok(Beta::Value(f64::INFINITY)),
            t => match t.parse::<f64>() {
                Ok(v) if v >= 0.0 => Ok(Beta::Value(v)),
                _ => Err(Error::Config(format!("beta must be `auto`, `inf` or a nonnegative number, got `{t}`"))),
            },
        }
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Beta::Auto => f.write_str("auto"),
            Beta::Value(v) if v.is_infinite() => f.write_str("inf"),
            Beta::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Beta {
    /// `C · ln(N · H · K / p)` for `auto`, where `log_cover = ln N`.
    pub fn resolve(self, c: f64, p: f64, log_cover: f64, horizon: usize, episodes: usize) -> Result<f64> {
        match self {
            Beta::Value(v) => Ok(v),
            Beta::Auto => {
                if !(p > 0.0 && p < 1.0) || !(c >= 0.0) {
                    return Err(Error::Config(format!("need 0 < p < 1 and C ≥ 0, got p = {p}, C = {c}")));
                }
                let k = episodes.max(1) as f64;
                Ok(c * (log_cover + (horizon as f64 * k / p).ln()).max(0.0))
            }
        }
    }
}

pub(crate) fn default_c() -> f64 {
    2.0
}

pub(crate) fn default_p() -> f64 {
    0.05
}

pub(crate) fn default_tol() -> f64 {
    DEFAULT_SOLVER_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OnemgConfig {
    pub episodes: usize,
    #[serde(default)]
    pub beta: Beta,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tol")]
    pub solver_tol: f64,
    /// Run the decomposition audit on every episode.
    #[serde(default)]
    pub audit: bool,
    #[serde(default)]
    pub execution: Execution,
}

impl OnemgConfig {
    pub fn new(episodes: usize, seed: u64) -> Self {
        OnemgConfig {
            episodes,
            beta: Beta::Auto,
            c: default_c(),
            p: default_p(),
            seed,
            solver_tol: DEFAULT_SOLVER_TOL,
            audit: false,
            execution: Execution::default(),
        }
    }
}

/// One row of the per-episode trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub k: usize,
    pub chosen: usize,
    pub regret_increment: f64,
    pub cum_regret: f64,
    /// Survivors after this episode's elimination.
    pub vspace_size: usize,
    /// `f^k_1(x_1, π_f, ν_f) − V*`.
    pub optimism_gap: f64,
    pub fallback_flag: bool,
    /// Whether the tagged `Q*` member survived this episode's elimination.
    pub qstar_alive: Option<bool>,
    /// Smallest decomposition slack along the episode, when audited.
    pub audit_min_slack: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OnemgRun {
    pub rows: Vec<EpisodeRow>,
    pub episodes: Vec<EpisodeRecord>,
    pub v_star: f64,
    pub beta: f64,
    pub fallback_events: usize,
    /// Episodes whose chosen hypothesis was below `V*` while `Q*` was in the
    /// version space it was chosen from.
    pub optimism_violations: usize,
}

impl OnemgRun {
    pub fn cumulative_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_regret)
    }

    /// `Q*` survived every episode (`None` when the family is untagged).
    pub fn qstar_retained(&self) -> Option<bool> {
        self.rows.iter().map(|r| r.qstar_alive).try_fold(true, |acc, a| a.map(|b| acc && b))
    }
}

/// Solves every member's stage games once.
pub fn solve_family(family: &FiniteValueFamily, tol: f64, exec: Execution) -> Result<Vec<SolvedHypothesis>> {
    try_map_range(exec, family.len(), |i| induced_max_min_policy(family.member(i), tol))
}

/// Elimination threshold for `config` on `family`.
pub fn resolve_beta(config: &OnemgConfig, family: &FiniteValueFamily) -> Result<f64> {
    let cover = covering_log(FamilyCover::Finite { size: family.len() }, 1.0 / config.episodes.max(1) as f64)?;
    config.beta.resolve(config.c, config.p, cover, family.shape().horizon, config.episodes)
}

pub fn run(game: &MarkovGame, family: &FiniteValueFamily, config: &OnemgConfig, opponent: &Opponent) -> Result<OnemgRun> {
    run_inner(game, family, config, opponent, None)
}

/// Re-runs the learner on logged trajectories instead of sampling.
pub fn replay(
    game: &MarkovGame,
    family: &FiniteValueFamily,
    config: &OnemgConfig,
    opponent: &Opponent,
    episodes: &[EpisodeRecord],
) -> Result<OnemgRun> {
    if episodes.len() != config.episodes {
        return Err(Error::Audit(format!("{} logged episodes for K = {}", episodes.len(), config.episodes)));
    }
    run_inner(game, family, config, opponent, Some(episodes))
}

fn run_inner(
    game: &MarkovGame,
    family: &FiniteValueFamily,
    config: &OnemgConfig,
    opponent: &Opponent,
    logged: Option<&[EpisodeRecord]>,
) -> Result<OnemgRun> {
    family.check_game(game)?;
    opponent.check(game)?;
    let beta = resolve_beta(config, family)?;
    let solution = ne_value_iteration(game, config.solver_tol)?;
    let v_star = solution.value();
    let solved = solve_family(family, config.solver_tol, config.execution)?;
    let candidates = level_candidates(family);
    let qstar = family.qstar_index();
    let x1 = game.initial_state();
    let mut buffer = ReplayBuffer::new(game.shape());
    let mut survivors: Vec<usize> = (0..family.len()).collect();
    let mut rows = Vec::with_capacity(config.episodes);
    let mut episodes = Vec::with_capacity(config.episodes);
    let mut cum = 0.0;
    let (mut fallback_events, mut optimism_violations) = (0, 0);
    let stream_tag = rng::label("onemg-episode");
    for k in 0..config.episodes {
        let chosen = select_optimistic(&survivors, &solved, x1)
            .ok_or_else(|| Error::EmptyVersionSpace(format!("episode {}", k + 1)))?;
        let pi = &solved[chosen].pi;
        let nu = opponent.policy(k, pi, game, &solution)?;
        let increment = v_star - evaluate_policy_pair(game, pi, &nu)?;
        cum += increment;
        let gap = solved[chosen].value(0, x1) - v_star;
        if qstar.is_some_and(|q| survivors.contains(&q)) && gap < -1e-9 {
            optimism_violations += 1;
            log::error!("episode {}: optimistic value {gap} below V* with Q* in the version space", k + 1);
        }
        let episode = match logged {
            Some(eps) => eps[k].clone(),
            None => sample_episode(game, pi, &nu, &mut rng::stream(config.seed, &[stream_tag, k as u64]))?,
        };
        let audit_min_slack = if config.audit {
            let pair = policy_q_function(game, pi, &nu)?;
            let terms = decomposition_audit(&episode, family.member(chosen), pi, game, &pair)?;
            Some(terms.iter().map(StepAudit::slack).fold(f64::INFINITY, f64::min))
        } else {
            None
        };
        buffer.push_episode(&episode)?;
        let elim = update_version_space(&buffer, family, &solved, &candidates, beta, config.execution);
        if elim.fallback {
            fallback_events += 1;
        }
        survivors = elim.survivors;
        rows.push(EpisodeRow {
            k: k + 1,
            chosen,
            regret_increment: increment,
            cum_regret: cum,
            vspace_size: survivors.len(),
            optimism_gap: gap,
            fallback_flag: elim.fallback,
            qstar_alive: qstar.map(|q| survivors.contains(&q)),
            audit_min_slack,
        });
        episodes.push(episode);
    }
    Ok(OnemgRun { rows, episodes, v_star, beta, fallback_events, optimism_violations })
}

/// Cumulative regret of always playing `pi` against `opponent`.
pub fn fixed_policy_regret(
    game: &MarkovGame,
    pi: &crate::game::StochasticPolicy,
    opponent: &Opponent,
    episodes: usize,
    tol: f64,
) -> Result<Vec<f64>> {
    let solution = ne_value_iteration(game, tol)?;
    let mut cum = 0.0;
    (0..episodes)
        .map(|k| {
            let nu = opponent.policy(k, pi, game, &solution)?;
            cum += solution.value() - evaluate_policy_pair(game, pi, &nu)?;
            Ok(cum)
        })
        .collect()
}
