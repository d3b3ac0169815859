use serde::Serialize;

use crate::error::{Error, Result};
use crate::game::{EpisodeRecord, MarkovGame, PairValues, QFunction, StochasticPolicy};

/// Tolerance for the per-step decomposition inequality.
pub const AUDIT_TOL: f64 = 1e-9;

/// Terms of the per-step regret decomposition at one realized step, all
/// computed exactly from the true game.
///
/// With `V^k_h(x) = min_ν f_h(x, π, ν)` (the value the learner plans with):
///
/// * `delta = V^k_h(x_h) − V^{π,ν}_h(x_h)`
/// * `zeta = δ_{h+1}(x_{h+1}) − E[δ_{h+1} | x_h, a_h, b_h]`
/// * `gamma = E_{a∼π}[f_h(x_h, a, b_h)] − f_h(x_h, a_h, b_h)`
/// * `gamma_hat = V^{π,ν}_h(x_h) − Q^{π,ν}_h(x_h, a_h, b_h)`
/// * `eps = f_h(x_h, a_h, b_h) − r_h − E[V^k_{h+1}]`
///
/// and the inequality is `delta ≤ delta_next − zeta + gamma − gamma_hat + eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepAudit {
    pub h: usize,
    pub delta: f64,
    pub delta_next: f64,
    pub zeta: f64,
    pub gamma: f64,
    pub gamma_hat: f64,
    pub eps: f64,
}

impl StepAudit {
    /// `rhs − lhs`; equals `f_h(x_h, π, b_h) − V^k_h(x_h) ≥ 0` analytically.
    pub fn slack(&self) -> f64 {
        self.delta_next - self.zeta + self.gamma - self.gamma_hat + self.eps - self.delta
    }
}

/// Evaluates every decomposition term along `episode` and fails with a
/// full term dump if any step violates the inequality.
pub fn decomposition_audit(
    episode: &EpisodeRecord,
    f: &QFunction,
    pi: &StochasticPolicy,
    game: &MarkovGame,
    pair: &PairValues,
) -> Result<Vec<StepAudit>> {
    let sh = game.shape();
    let s = sh.n_states;
    // V^k_h(x) = min_b π_h(x)ᵀ f_h(x, ·, b)
    let vk = |h: usize, x: usize| -> f64 {
        if h == sh.horizon {
            return 0.0;
        }
        (0..sh.n_actions2)
            .map(|b| pi.row(h, x).iter().enumerate().map(|(a, p)| p * f.get(h, x, a, b)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    };
    let delta_at = |h: usize, x: usize| vk(h, x) - pair.v(h, x);
    let mut out = Vec::with_capacity(sh.horizon);
    for st in &episode.steps {
        let (h, x, a, b) = (st.h, st.x, st.a, st.b);
        let p = game.next_dist(h, x, a, b);
        let exp_delta: f64 = (0..s).map(|y| p[y] * delta_at(h + 1, y)).sum();
        let exp_vk: f64 = (0..s).map(|y| p[y] * vk(h + 1, y)).sum();
        let delta_next = delta_at(h + 1, st.x_next);
        let f_pi_b: f64 = pi.row(h, x).iter().enumerate().map(|(i, pa)| pa * f.get(h, x, i, b)).sum();
        let rec = StepAudit {
            h,
            delta: delta_at(h, x),
            delta_next,
            zeta: delta_next - exp_delta,
            gamma: f_pi_b - f.get(h, x, a, b),
            gamma_hat: pair.v(h, x) - pair.q.get(h, x, a, b),
            eps: f.get(h, x, a, b) - st.r - exp_vk,
        };
        if rec.slack() < -AUDIT_TOL {
            return Err(Error::Audit(format!("decomposition inequality violated at step {h}: {rec:?}")));
        }
        out.push(rec);
    }
    Ok(out)
}
