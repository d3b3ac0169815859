//! Exact quantities computed from the true game, for checking the learner.

use crate::error::Result;
use crate::game::{
    best_response_value_iteration, occupancy, policy_q_function, GameSolution, MarkovGame, PairValues, Player,
    StochasticPolicy,
};
use crate::hypothesis::TestFunctionFamily;

/// The policy pair a model pair prescribes: `π^{M_1}` and player 2's best
/// response to it inside `M_2`.
pub fn model_pair_policies(m1: &GameSolution, m2: &MarkovGame) -> Result<(StochasticPolicy, StochasticPolicy)> {
    let pi = m1.pi_star.clone();
    let (nu, _) = best_response_value_iteration(m2, &pi, Player::One)?;
    Ok((pi, nu))
}

/// `sup_g E_{(x,a,b) ∼ d_h} [E_M g − E_{M*} g]` where `d_h` is the level-`h`
/// occupancy of `(π, ν)` in the true game.
pub fn exact_witness_misfit(
    pi: &StochasticPolicy,
    nu: &StochasticPolicy,
    model: &MarkovGame,
    h: usize,
    tests: &TestFunctionFamily,
    truth: &MarkovGame,
) -> Result<f64> {
    let sh = truth.shape();
    let occ = occupancy(truth, pi, nu, h)?;
    let mut best = f64::NEG_INFINITY;
    for g in tests.members() {
        let mut total = 0.0;
        for (c, &w) in occ.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let (x, a, b) = sh.decode_cell(c);
            total += w * (g.model_expectation(model, h, x, a, b) - g.model_expectation(truth, h, x, a, b));
        }
        best = best.max(total);
    }
    Ok(best)
}

/// Generalised Bellman error `E_{d_h}[Q^M_h − r − E_{x'∼P*} V^M_{h+1}(x')]`,
/// where `Q^M`, `V^M` are the values of `(π, ν)` inside `M`.
pub fn exact_bellman_error(
    pi: &StochasticPolicy,
    nu: &StochasticPolicy,
    model_values: &PairValues,
    h: usize,
    truth: &MarkovGame,
) -> Result<f64> {
    let sh = truth.shape();
    let occ = occupancy(truth, pi, nu, h)?;
    let mut total = 0.0;
    for (c, &w) in occ.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let (x, a, b) = sh.decode_cell(c);
        let next: f64 = truth.next_dist(h, x, a, b).iter().enumerate().map(|(y, p)| p * model_values.v(h + 1, y)).sum();
        total += w * (model_values.q.get(h, x, a, b) - truth.reward(h, x, a, b) - next);
    }
    Ok(total)
}

/// `|Q_M(x_1, π, ν) − V^{π,ν}(x_1) − Σ_h L(h)|`.
pub fn simulation_lemma_residual(
    pi: &StochasticPolicy,
    nu: &StochasticPolicy,
    model: &MarkovGame,
    truth: &MarkovGame,
) -> Result<f64> {
    let in_model = policy_q_function(model, pi, nu)?;
    let in_truth = policy_q_function(truth, pi, nu)?;
    let x1 = truth.initial_state();
    let mut sum = 0.0;
    for h in 0..truth.horizon() {
        sum += exact_bellman_error(pi, nu, &in_model, h, truth)?;
    }
    Ok((in_model.v(0, x1) - in_truth.v(0, x1) - sum).abs())
}
