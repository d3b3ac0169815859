use super::lp::{argmax_first, argmin_first};
use super::{solve_matrix_game, MarkovGame, Player, QFunction, StochasticPolicy};
use crate::error::{Error, Result};

/// Nash equilibrium of a game by backward induction.
#[derive(Debug, Clone)]
pub struct GameSolution {
    pub q_star: QFunction,
    /// `(H+1) × S`, the last row is zero.
    pub v_star: Vec<f64>,
    pub pi_star: StochasticPolicy,
    pub nu_star: StochasticPolicy,
    n_states: usize,
    initial_state: usize,
}

impl GameSolution {
    pub fn v(&self, h: usize, x: usize) -> f64 {
        self.v_star[h * self.n_states + x]
    }

    /// `V*` at the initial state.
    pub fn value(&self) -> f64 {
        self.v(0, self.initial_state)
    }
}

/// Q- and V-functions of a fixed policy pair.
#[derive(Debug, Clone)]
pub struct PairValues {
    pub q: QFunction,
    /// `(H+1) × S`, the last row is zero.
    pub v: Vec<f64>,
    n_states: usize,
}

impl PairValues {
    pub fn v(&self, h: usize, x: usize) -> f64 {
        self.v[h * self.n_states + x]
    }
}

fn expected_next(game: &MarkovGame, h: usize, x: usize, a: usize, b: usize, v_next: &[f64]) -> f64 {
    game.next_dist(h, x, a, b).iter().zip(v_next).map(|(p, v)| p * v).sum()
}

/// Backward induction with the minimax Bellman operator.
pub fn ne_value_iteration(game: &MarkovGame, tol: f64) -> Result<GameSolution> {
    let sh = game.shape();
    let s = sh.n_states;
    let mut q = QFunction::zeros(sh);
    let mut v = vec![0.0; (sh.horizon + 1) * s];
    let mut pi_rows = vec![Vec::new(); sh.horizon * s];
    let mut nu_rows = vec![Vec::new(); sh.horizon * s];
    for h in (0..sh.horizon).rev() {
        let (cur, next) = v.split_at_mut((h + 1) * s);
        let next = &next[..s];
        for x in 0..s {
            for a in 0..sh.n_actions1 {
                for b in 0..sh.n_actions2 {
                    q.set(h, x, a, b, game.reward(h, x, a, b) + expected_next(game, h, x, a, b, next));
                }
            }
            let sol = solve_matrix_game(&q.stage(h, x), tol).map_err(|e| e.at_state(h, x))?;
            cur[h * s + x] = sol.value;
            pi_rows[h * s + x] = sol.row_policy;
            nu_rows[h * s + x] = sol.col_policy;
        }
    }
    Ok(GameSolution {
        q_star: q,
        v_star: v,
        pi_star: StochasticPolicy::from_rows(sh.horizon, s, sh.n_actions1, pi_rows),
        nu_star: StochasticPolicy::from_rows(sh.horizon, s, sh.n_actions2, nu_rows),
        n_states: s,
        initial_state: game.initial_state(),
    })
}

/// Exact best response of the free player against `fixed`.
///
/// `side` names the player whose policy is fixed. Returns the deterministic
/// best response (ties to the lowest action) and `V^{π,ν}` at the initial
/// state under the resulting pair.
pub fn best_response_value_iteration(
    game: &MarkovGame,
    fixed: &StochasticPolicy,
    side: Player,
) -> Result<(StochasticPolicy, f64)> {
    let sh = game.shape();
    fixed.check_for(sh, side)?;
    let s = sh.n_states;
    let free_actions = match side {
        Player::One => sh.n_actions2,
        Player::Two => sh.n_actions1,
    };
    let mut v = vec![0.0; (sh.horizon + 1) * s];
    let mut choice = vec![0usize; sh.horizon * s];
    for h in (0..sh.horizon).rev() {
        for x in 0..s {
            let row = fixed.row(h, x);
            let vals: Vec<f64> = (0..free_actions)
                .map(|c| {
                    row.iter()
                        .enumerate()
                        .filter(|(_, p)| **p > 0.0)
                        .map(|(f, p)| {
                            let (a, b) = if side == Player::One { (f, c) } else { (c, f) };
                            p * (game.reward(h, x, a, b) + expected_next(game, h, x, a, b, &v[(h + 1) * s..(h + 2) * s]))
                        })
                        .sum()
                })
                .collect();
            let (i, val) = if side == Player::One { argmin_first(&vals) } else { argmax_first(&vals) };
            choice[h * s + x] = i;
            v[h * s + x] = val;
        }
    }
    let br = StochasticPolicy::pure(sh.horizon, s, free_actions, |h, x| choice[h * s + x]);
    Ok((br, v[game.initial_state()]))
}

/// Best response of the free player restricted, at every `(h, x)`, to the
/// rows of `candidates` (a product policy class). Ties go to the lowest
/// candidate index.
pub fn restricted_best_response(
    game: &MarkovGame,
    fixed: &StochasticPolicy,
    side: Player,
    candidates: &[StochasticPolicy],
) -> Result<(StochasticPolicy, f64)> {
    let sh = game.shape();
    fixed.check_for(sh, side)?;
    if candidates.is_empty() {
        return Err(Error::Input("empty restriction class".into()));
    }
    for c in candidates {
        c.check_for(sh, side.other())?;
    }
    let s = sh.n_states;
    let mut v = vec![0.0; (sh.horizon + 1) * s];
    let mut rows = Vec::with_capacity(sh.horizon * s);
    for h in (0..sh.horizon).rev() {
        let mut level_rows = Vec::with_capacity(s);
        for x in 0..s {
            let frow = fixed.row(h, x);
            let vals: Vec<f64> = candidates
                .iter()
                .map(|c| {
                    let crow = c.row(h, x);
                    let mut acc = 0.0;
                    for (i, &pf) in frow.iter().enumerate() {
                        for (j, &pc) in crow.iter().enumerate() {
                            if pf == 0.0 || pc == 0.0 {
                                continue;
                            }
                            let (a, b) = if side == Player::One { (i, j) } else { (j, i) };
                            acc += pf
                                * pc
                                * (game.reward(h, x, a, b) + expected_next(game, h, x, a, b, &v[(h + 1) * s..(h + 2) * s]));
                        }
                    }
                    acc
                })
                .collect();
            let (i, val) = if side == Player::One { argmin_first(&vals) } else { argmax_first(&vals) };
            v[h * s + x] = val;
            level_rows.push(candidates[i].row(h, x).to_vec());
        }
        rows.push(level_rows);
    }
    rows.reverse();
    let n_actions = candidates[0].n_actions();
    let br = StochasticPolicy::from_rows(sh.horizon, s, n_actions, rows.into_iter().flatten().collect());
    Ok((br, v[game.initial_state()]))
}

fn check_pair(game: &MarkovGame, pi: &StochasticPolicy, nu: &StochasticPolicy) -> Result<()> {
    pi.check_for(game.shape(), Player::One)?;
    nu.check_for(game.shape(), Player::Two)
}

/// State distributions `d_0, …, d_{H-1}` reached from the initial state.
fn state_distributions(game: &MarkovGame, pi: &StochasticPolicy, nu: &StochasticPolicy) -> Vec<Vec<f64>> {
    let sh = game.shape();
    let mut d = vec![0.0; sh.n_states];
    d[game.initial_state()] = 1.0;
    let mut out = Vec::with_capacity(sh.horizon);
    for h in 0..sh.horizon {
        let mut next = vec![0.0; sh.n_states];
        for (x, &dx) in d.iter().enumerate() {
            if dx == 0.0 {
                continue;
            }
            for (a, &pa) in pi.row(h, x).iter().enumerate() {
                for (b, &pb) in nu.row(h, x).iter().enumerate() {
                    let w = dx * pa * pb;
                    if w == 0.0 {
                        continue;
                    }
                    for (n, p) in next.iter_mut().zip(game.next_dist(h, x, a, b)) {
                        *n += w * p;
                    }
                }
            }
        }
        out.push(std::mem::replace(&mut d, next));
    }
    out
}

/// Exact `V^{π,ν}` at the initial state by forward propagation of the state
/// distribution.
pub fn evaluate_policy_pair(game: &MarkovGame, pi: &StochasticPolicy, nu: &StochasticPolicy) -> Result<f64> {
    check_pair(game, pi, nu)?;
    let mut total = 0.0;
    for (h, d) in state_distributions(game, pi, nu).iter().enumerate() {
        for (x, &dx) in d.iter().enumerate() {
            if dx == 0.0 {
                continue;
            }
            let stage = pi.row(h, x).iter().enumerate().fold(0.0, |acc, (a, &pa)| {
                acc + nu.row(h, x).iter().enumerate().map(|(b, &pb)| pa * pb * game.reward(h, x, a, b)).sum::<f64>()
            });
            total += dx * stage;
        }
    }
    Ok(total)
}

/// Q- and V-functions of `(π, ν)` by backward induction.
pub fn policy_q_function(game: &MarkovGame, pi: &StochasticPolicy, nu: &StochasticPolicy) -> Result<PairValues> {
    check_pair(game, pi, nu)?;
    let sh = game.shape();
    let s = sh.n_states;
    let mut q = QFunction::zeros(sh);
    let mut v = vec![0.0; (sh.horizon + 1) * s];
    for h in (0..sh.horizon).rev() {
        for x in 0..s {
            let mut vx = 0.0;
            for a in 0..sh.n_actions1 {
                for b in 0..sh.n_actions2 {
                    let qv = game.reward(h, x, a, b) + expected_next(game, h, x, a, b, &v[(h + 1) * s..(h + 2) * s]);
                    q.set(h, x, a, b, qv);
                    vx += pi.row(h, x)[a] * nu.row(h, x)[b] * qv;
                }
            }
            v[h * s + x] = vx;
        }
    }
    Ok(PairValues { q, v, n_states: s })
}

/// Exact level-`h` occupancy over `(x, a, b)` cells (layout of [`super::Shape::cell`]).
pub fn occupancy(game: &MarkovGame, pi: &StochasticPolicy, nu: &StochasticPolicy, h: usize) -> Result<Vec<f64>> {
    check_pair(game, pi, nu)?;
    let sh = game.shape();
    if h >= sh.horizon {
        return Err(Error::Input(format!("level {h} out of range 0..{}", sh.horizon)));
    }
    let d = &state_distributions(game, pi, nu)[h];
    let mut occ = vec![0.0; sh.cells()];
    for x in 0..sh.n_states {
        for a in 0..sh.n_actions1 {
            for b in 0..sh.n_actions2 {
                occ[sh.cell(x, a, b)] = d[x] * pi.row(h, x)[a] * nu.row(h, x)[b];
            }
        }
    }
    Ok(occ)
}
