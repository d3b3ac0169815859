//! Model elimination with alternate optimism.
//!
//! Each round picks the optimistic model for player 1 and the pessimistic
//! model for player 2's best response, checks both predictions against
//! rollouts, and otherwise removes models whose witnessed misfit on fresh
//! data at the offending level exceeds a threshold.

mod diagnostics;

pub use diagnostics::{
    exact_bellman_error, exact_witness_misfit, model_pair_policies, simulation_lemma_residual,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{map_range, try_map_range, Execution};
use crate::game::{
    best_response_value_iteration, evaluate_policy_pair, ne_value_iteration, policy_q_function, sample_episode,
    EpisodeRecord, GameSolution, MarkovGame, PairValues, Player, StochasticPolicy, Step,
};
use crate::hypothesis::{ModelFamily, TestFunctionFamily};
use crate::rng;

/// Elimination threshold `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Phi {
    /// `κε / (10H)`.
    #[default]
    Desk,
    /// `κε / (100 H √W)`.
    Theory,
    Value(f64),
}

impl FromStr for Phi {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" | "desk" => Ok(Phi::Desk),
            "theory" => Ok(Phi::Theory),
            t => match t.parse::<f64>() {
                Ok(v) if v > 0.0 => Ok(Phi::Value(v)),
                _ => Err(Error::Config(format!("phi must be `auto`, `theory` or a positive number, got `{t}`"))),
            },
        }
    }
}

impl TryFrom<String> for Phi {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Phi> for String {
    fn from(p: Phi) -> String {
        p.to_string()
    }
}

impl fmt::Display for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Phi::Desk => f.write_str("auto"),
            Phi::Theory => f.write_str("theory"),
            Phi::Value(v) => write!(f, "{v}"),
        }
    }
}

/// Which level of the candidate's Q-function scores the successor state in
/// the empirical Bellman error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuccessorLevel {
    /// `Q^M_{h+1}(x_{h+1}, π, ν)`.
    #[default]
    Next,
    /// `Q^M_h(x_{h+1}, π, ν)`, read literally; zero past the horizon.
    Same,
}

fn default_epsilon() -> f64 {
    0.1
}
fn default_kappa() -> f64 {
    1.0
}
fn default_rollouts() -> usize {
    500
}
fn default_rounds() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AomeConfig {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "crate::onemg::default_p")]
    pub p: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default)]
    pub phi: Phi,
    /// Rollouts for the value estimate.
    #[serde(default = "default_rollouts")]
    pub n1: usize,
    /// Trajectories for the misfit batch.
    #[serde(default = "default_rollouts")]
    pub n: usize,
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
    /// User-supplied surrogate for the witness rank.
    #[serde(default = "default_kappa")]
    pub witness_rank: f64,
    #[serde(default)]
    pub successor_level: SuccessorLevel,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "crate::onemg::default_tol")]
    pub solver_tol: f64,
    #[serde(default)]
    pub execution: Execution,
}

impl AomeConfig {
    pub fn new(seed: u64) -> Self {
        AomeConfig {
            epsilon: default_epsilon(),
            p: crate::onemg::default_p(),
            kappa: default_kappa(),
            phi: Phi::Desk,
            n1: default_rollouts(),
            n: default_rollouts(),
            max_rounds: default_rounds(),
            witness_rank: 1.0,
            successor_level: SuccessorLevel::Next,
            seed,
            solver_tol: crate::onemg::default_tol(),
            execution: Execution::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(self.epsilon) || !unit(self.p) || !unit(self.kappa) {
            return Err(Error::Config("epsilon, p and kappa must lie in (0, 1]".into()));
        }
        if self.n1 == 0 || self.n == 0 || self.max_rounds == 0 {
            return Err(Error::Config("n1, n and the round cap must be positive".into()));
        }
        if !(self.witness_rank > 0.0) {
            return Err(Error::Config("witness rank surrogate must be positive".into()));
        }
        Ok(())
    }

    pub fn threshold(&self, horizon: usize) -> f64 {
        let h = horizon as f64;
        match self.phi {
            Phi::Desk => self.kappa * self.epsilon / (10.0 * h),
            Phi::Theory => self.kappa * self.epsilon / (100.0 * h * self.witness_rank.sqrt()),
            Phi::Value(v) => v,
        }
    }

    /// Theory-scale rollout counts `(n1, n)` with constant `c`:
    /// `c·H²·ln(HT/p)/ε²` and `c·H²·W·|A|·ln(T|ℳ||𝒢|/p)/(κε)²`.
    pub fn theory_rollouts(&self, c: f64, horizon: usize, n_actions: usize, n_models: usize, n_tests: usize) -> (usize, usize) {
        let h2 = (horizon * horizon) as f64;
        let t = self.max_rounds as f64;
        let n1 = c * h2 * (horizon as f64 * t / self.p).ln() / (self.epsilon * self.epsilon);
        let n = c * h2 * self.witness_rank * n_actions as f64 * (t * n_models as f64 * n_tests as f64 / self.p).ln()
            / (self.kappa * self.epsilon).powi(2);
        (n1.ceil() as usize, n.ceil() as usize)
    }
}

/// Model picks of one round.
#[derive(Debug, Clone)]
pub struct AlternatePick {
    pub m1: usize,
    pub m2: usize,
    pub pi: StochasticPolicy,
    pub nu: StochasticPolicy,
}

/// `M_1 = argmax V^M(x_1)` and `M_2 = argmin min_ν V_M^{π^{M_1},ν}(x_1)` over
/// the survivors, with `ν` player 2's best response inside `M_2`.
pub fn alternate_optimism(
    survivors: &[usize],
    models: &ModelFamily,
    solutions: &[GameSolution],
) -> Result<AlternatePick> {
    let first = *survivors.first().ok_or_else(|| Error::EmptyVersionSpace("no surviving models".into()))?;
    let mut m1 = first;
    for &i in survivors {
        if solutions[i].value() > solutions[m1].value() {
            m1 = i;
        }
    }
    let pi = solutions[m1].pi_star.clone();
    let mut best: Option<(usize, f64, StochasticPolicy)> = None;
    for &i in survivors {
        let (nu, v) = best_response_value_iteration(&models.members()[i], &pi, Player::One)?;
        if best.as_ref().is_none_or(|(_, b, _)| v < *b) {
            best = Some((i, v, nu));
        }
    }
    let (m2, _, nu) = best.unwrap_or_else(|| unreachable!());
    Ok(AlternatePick { m1, m2, pi, nu })
}

/// Mean and standard error of episode returns.
pub fn estimate_value(returns: &[f64]) -> (f64, f64) {
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    if returns.len() < 2 {
        return (mean, 0.0);
    }
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Both model predictions within `ε/2` of the estimate.
pub fn termination_test(v_hat: f64, q1: f64, q2: f64, epsilon: f64) -> bool {
    (v_hat - q1).abs().max((v_hat - q2).abs()) <= epsilon / 2.0
}

/// `(1/n) Σ_i [Q^M_h(x,a,b) − r − V^M_{h'}(x')]` over the level-`h` steps of
/// `rollouts`, with `values` the pair's values inside `M`.
pub fn empirical_bellman_error(rollouts: &[EpisodeRecord], values: &PairValues, h: usize, succ: SuccessorLevel) -> f64 {
    let horizon = values.q.shape().horizon;
    let total: f64 = rollouts
        .iter()
        .map(|ep| {
            let s = &ep.steps[h];
            let next = match succ {
                SuccessorLevel::Next => values.v(h + 1, s.x_next),
                SuccessorLevel::Same if h < horizon => values.v(h, s.x_next),
                SuccessorLevel::Same => 0.0,
            };
            values.q.get(h, s.x, s.a, s.b) - s.r - next
        })
        .sum();
    total / rollouts.len().max(1) as f64
}

/// Smallest level whose error under either model reaches `threshold`;
/// otherwise the level of largest error, flagged inconclusive.
pub fn locate_violation(errors: &[[f64; 2]], threshold: f64) -> (usize, bool) {
    let mags: Vec<f64> = errors.iter().map(|e| e[0].abs().max(e[1].abs())).collect();
    match mags.iter().position(|&m| m >= threshold) {
        Some(h) if threshold > 0.0 => (h, false),
        _ => {
            let mut best = 0;
            for (h, &m) in mags.iter().enumerate() {
                if m > mags[best] {
                    best = h;
                }
            }
            (best, threshold > 0.0)
        }
    }
}

/// `sup_g (1/n) Σ_i {E_M[g(x,a,b,·)] − g(x,a,b,r,x')}` over a batch of
/// level-`h` steps.
pub fn empirical_model_misfit(batch: &[Step], model: &MarkovGame, tests: &TestFunctionFamily) -> f64 {
    let sh = model.shape();
    let n = batch.len().max(1) as f64;
    tests
        .members()
        .iter()
        .map(|g| {
            batch
                .iter()
                .map(|s| g.model_expectation(model, s.h, s.x, s.a, s.b) - g.eval(sh, s.h, s.x, s.a, s.b, s.r, s.x_next))
                .sum::<f64>()
                / n
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRow {
    pub round: usize,
    pub m1: usize,
    pub m2: usize,
    pub v_hat: f64,
    pub v_hat_se: f64,
    pub q1: f64,
    pub q2: f64,
    pub terminated: bool,
    pub level: Option<usize>,
    pub inconclusive: bool,
    pub eliminated: usize,
    pub survivors: usize,
    pub mstar_present: Option<bool>,
    /// Largest misfit of the true model in this round's batch.
    pub mstar_misfit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Termination {
    pub round: usize,
    pub pi: Vec<f64>,
    pub nu: Vec<f64>,
    pub v_hat: f64,
    pub v_hat_se: f64,
    /// `V* − V^{π, ν*_π}` in the true game.
    pub exact_gap: f64,
    pub certified: bool,
}

#[derive(Debug, Clone)]
pub struct AomeRun {
    pub rounds: Vec<RoundRow>,
    pub termination: Option<Termination>,
    pub v_star: f64,
    pub phi: f64,
    /// Rounds where `M*` was a survivor but the exact bracket
    /// `Q^{M_1} ≥ V*`, `Q^{M_2} ≤ V^{π,ν*_π}` failed.
    pub bracket_violations: usize,
    /// Survivor sets were nested across rounds.
    pub nested: bool,
    /// Set when every model was eliminated.
    pub collapsed: bool,
}

impl AomeRun {
    pub fn mstar_never_eliminated(&self) -> Option<bool> {
        self.rounds.iter().map(|r| r.mstar_present).try_fold(true, |acc, p| p.map(|b| acc && b))
    }
}

fn rollouts(game: &MarkovGame, pi: &StochasticPolicy, nu: &StochasticPolicy, n: usize, seed: u64, tag: &str, round: usize) -> Result<Vec<EpisodeRecord>> {
    let mut g = rng::stream(seed, &[rng::label(tag), round as u64]);
    (0..n).map(|_| sample_episode(game, pi, nu, &mut g)).collect()
}

pub fn run_aome(game: &MarkovGame, models: &ModelFamily, tests: &TestFunctionFamily, config: &AomeConfig) -> Result<AomeRun> {
    config.validate()?;
    let sh = game.shape();
    if models.members()[0].shape() != sh || models.members()[0].initial_state() != game.initial_state() {
        return Err(Error::Shape("model family does not match the game".into()));
    }
    if tests.shape() != sh {
        return Err(Error::Shape("test-function family does not match the game".into()));
    }
    let phi = config.threshold(sh.horizon);
    let truth = ne_value_iteration(game, config.solver_tol)?;
    let v_star = truth.value();
    let solutions = try_map_range(config.execution, models.len(), |i| ne_value_iteration(&models.members()[i], config.solver_tol))?;
    let mstar = models.position_of(game);
    let mut survivors: Vec<usize> = (0..models.len()).collect();
    let mut rounds = Vec::new();
    let mut bracket_violations = 0;
    let mut nested = true;
    for round in 1..=config.max_rounds {
        let pick = alternate_optimism(&survivors, models, &solutions)?;
        let (m1, m2) = (&models.members()[pick.m1], &models.members()[pick.m2]);
        let q1 = evaluate_policy_pair(m1, &pick.pi, &pick.nu)?;
        let q2 = evaluate_policy_pair(m2, &pick.pi, &pick.nu)?;
        if mstar.is_some_and(|m| survivors.contains(&m)) {
            let (_, v_br) = best_response_value_iteration(game, &pick.pi, Player::One)?;
            if q1 < v_star - 1e-9 || q2 > v_br + 1e-9 {
                bracket_violations += 1;
                log::error!("round {round}: bracket failed (q1 = {q1}, V* = {v_star}, q2 = {q2}, best response = {v_br})");
            }
        }
        let eps = rollouts(game, &pick.pi, &pick.nu, config.n1, config.seed, "aome-value", round)?;
        let returns: Vec<f64> = eps.iter().map(EpisodeRecord::total_reward).collect();
        let (v_hat, se) = estimate_value(&returns);
        let mut row = RoundRow {
            round,
            m1: pick.m1,
            m2: pick.m2,
            v_hat,
            v_hat_se: se,
            q1,
            q2,
            terminated: false,
            level: None,
            inconclusive: false,
            eliminated: 0,
            survivors: survivors.len(),
            mstar_present: mstar.map(|m| survivors.contains(&m)),
            mstar_misfit: None,
        };
        if termination_test(v_hat, q1, q2, config.epsilon) {
            row.terminated = true;
            rounds.push(row);
            let (_, v_br) = best_response_value_iteration(game, &pick.pi, Player::One)?;
            let exact_gap = v_star - v_br;
            return Ok(AomeRun {
                rounds,
                termination: Some(Termination {
                    round,
                    pi: pick.pi.probs().to_vec(),
                    nu: pick.nu.probs().to_vec(),
                    v_hat,
                    v_hat_se: se,
                    exact_gap,
                    certified: exact_gap <= config.epsilon + 3.0 * se,
                }),
                v_star,
                phi,
                bracket_violations,
                nested,
                collapsed: false,
            });
        }
        let vals1 = policy_q_function(m1, &pick.pi, &pick.nu)?;
        let vals2 = policy_q_function(m2, &pick.pi, &pick.nu)?;
        let errors: Vec<[f64; 2]> = (0..sh.horizon)
            .map(|h| {
                [
                    empirical_bellman_error(&eps, &vals1, h, config.successor_level),
                    empirical_bellman_error(&eps, &vals2, h, config.successor_level),
                ]
            })
            .collect();
        let (level, inconclusive) = locate_violation(&errors, config.epsilon / (4.0 * sh.horizon as f64));
        if inconclusive {
            log::info!("round {round}: no level reached the violation threshold; using level {level}");
        }
        let batch: Vec<Step> =
            rollouts(game, &pick.pi, &pick.nu, config.n, config.seed, "aome-batch", round)?.into_iter().map(|e| e.steps[level]).collect();
        let misfits = map_range(config.execution, survivors.len(), |j| empirical_model_misfit(&batch, &models.members()[survivors[j]], tests));
        let before = survivors.len();
        row.mstar_misfit = mstar.map(|m| empirical_model_misfit(&batch, &models.members()[m], tests));
        let kept: Vec<usize> = survivors.iter().zip(&misfits).filter(|(_, &e)| e <= phi).map(|(&i, _)| i).collect();
        nested &= kept.iter().all(|i| survivors.contains(i));
        row.level = Some(level);
        row.inconclusive = inconclusive;
        row.eliminated = before - kept.len();
        row.survivors = kept.len();
        row.mstar_present = mstar.map(|m| kept.contains(&m));
        rounds.push(row);
        if kept.is_empty() {
            log::error!("round {round}: every model was eliminated");
            return Ok(AomeRun { rounds, termination: None, v_star, phi, bracket_violations, nested, collapsed: true });
        }
        survivors = kept;
    }
    Ok(AomeRun { rounds, termination: None, v_star, phi, bracket_violations, nested, collapsed: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Shape, DEFAULT_SOLVER_TOL};
    use crate::harness::generators::{indicator_tests, model_family, random_game};
    use crate::hypothesis::TestFunction;

    #[test]
    fn singleton_family_terminates_with_zero_gap() {
        let g = random_game(2, 2, 2, 1.0, 3).unwrap();
        let models = ModelFamily::new(vec![g.clone()]).unwrap();
        let tests = indicator_tests(g.shape(), (-1.0, 1.0)).unwrap();
        let run = run_aome(&g, &models, &tests, &AomeConfig { n1: 4000, ..AomeConfig::new(1) }).unwrap();
        let t = run.termination.unwrap();
        assert_eq!(t.round, 1);
        assert!(t.exact_gap.abs() < 1e-9);
        let sol = ne_value_iteration(&g, DEFAULT_SOLVER_TOL).unwrap();
        let pick = alternate_optimism(&[0], &models, std::slice::from_ref(&sol)).unwrap();
        assert_eq!((pick.m1, pick.m2), (0, 0));
        assert!(pick.pi.max_abs_diff(&sol.pi_star) == 0.0);
    }

    #[test]
    fn larger_value_model_is_optimistic_pick() {
        let g = random_game(1, 1, 2, 0.0, 2).unwrap();
        let up = MarkovGame::new(g.shape(), 0, (-1.0, 1.0), g.rewards().iter().map(|r| (r + 0.5).min(1.0)).collect(), g.transitions().to_vec())
            .unwrap();
        let models = ModelFamily::new(vec![g.clone(), up]).unwrap();
        let sols: Vec<_> = models.members().iter().map(|m| ne_value_iteration(m, 1e-9).unwrap()).collect();
        let pick = alternate_optimism(&[0, 1], &models, &sols).unwrap();
        assert_eq!((pick.m1, pick.m2), (1, 0));
    }

    #[test]
    fn termination_boundary_and_threshold_modes() {
        assert!(termination_test(0.5, 0.25, 0.75, 0.5));
        assert!(!termination_test(0.5, 0.4, 0.5, 0.1));
        let c = AomeConfig { kappa: 0.5, epsilon: 0.2, ..AomeConfig::new(0) };
        assert!((c.threshold(2) - 0.005).abs() < 1e-15);
        assert!((AomeConfig { phi: Phi::Theory, witness_rank: 4.0, ..c.clone() }.threshold(2) - 0.00025).abs() < 1e-15);
        assert_eq!("0.3".parse::<Phi>().unwrap(), Phi::Value(0.3));
    }

    #[test]
    fn violation_location() {
        assert_eq!(locate_violation(&[[0.0, 0.01], [0.3, -0.1], [0.5, 0.0]], 0.2), (1, false));
        assert_eq!(locate_violation(&[[0.0, 0.01], [0.03, -0.1], [0.05, 0.0]], 0.2), (1, true));
        assert_eq!(locate_violation(&[[0.0, 0.01], [0.03, -0.1], [0.05, 0.0]], 0.0), (1, false));
    }

    #[test]
    fn hand_misfit_and_bellman_error() {
        let sh = Shape::new(1, 2, 1, 1);
        let model = MarkovGame::new(sh, 0, (-1.0, 1.0), vec![0.5, 0.0], vec![0.25, 0.75, 1.0, 0.0]).unwrap();
        let g = TestFunction { reward_weight: 1.0, table: vec![0.0, 1.0, 0.0, 0.0] };
        let tests = TestFunctionFamily::new(sh, (-1.0, 1.0), vec![g]).unwrap();
        // E_M g = 0.5 + 0.75; observed g = 0.5 + 0 at x' = 0
        let s = Step { h: 0, x: 0, a: 0, b: 0, r: 0.5, x_next: 0 };
        assert!((empirical_model_misfit(&[s], &model, &tests) - 0.75).abs() < 1e-15);
        let zero = TestFunctionFamily::new(sh, (-1.0, 1.0), vec![TestFunction { reward_weight: 0.0, table: vec![0.0; 4] }]).unwrap();
        assert_eq!(empirical_model_misfit(&[s], &model, &zero), 0.0);
        // H = 1: mean of Q_1 − r
        let pi = StochasticPolicy::uniform(1, 2, 1);
        let vals = policy_q_function(&model, &pi, &pi).unwrap();
        let eps = vec![EpisodeRecord { steps: vec![Step { r: 0.2, ..s }] }, EpisodeRecord { steps: vec![Step { x: 1, r: -0.1, ..s }] }];
        let e = empirical_bellman_error(&eps, &vals, 0, SuccessorLevel::Next);
        assert!((e - ((0.5 - 0.2) + (0.0 + 0.1)) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn runs_are_reproducible_and_nested() {
        let g = random_game(2, 2, 2, 1.0, 5).unwrap();
        let models = model_family(&g, 4, 0.5, 5).unwrap();
        let tests = indicator_tests(g.shape(), (-1.0, 1.0)).unwrap();
        let cfg = AomeConfig::new(3);
        let a = run_aome(&g, &models, &tests, &cfg).unwrap();
        let b = run_aome(&g, &models, &tests, &AomeConfig { execution: Execution::Serial, ..cfg }).unwrap();
        assert_eq!(a.rounds, b.rounds);
        assert!(a.nested);
        assert_eq!(a.bracket_violations, 0);
    }
}
