//! Seeded generators for games and families.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{
    ne_value_iteration, policy_q_function, restricted_best_response, MarkovGame, Player, QFunction, Shape,
    StochasticPolicy, DEFAULT_SOLVER_TOL,
};
use crate::hypothesis::{FiniteValueFamily, ModelFamily, PolicyFamily, TestFunction, TestFunctionFamily, TruthTags};
use crate::rng::{self, StreamRng};

/// Attempts per decoy before separation is declared impossible.
pub const SEPARATION_RETRIES: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GameSpec {
    /// Pennies payoff at every state; matching moves to the next state.
    MatchingPenniesChain { horizon: usize, states: usize },
    /// Uniform rewards in `[-1, 1]`; each transition row keeps
    /// `max(1, round((1 − sparsity)·S))` successors.
    Random { horizon: usize, states: usize, actions: usize, #[serde(default)] sparsity: f64 },
    /// Player 2 is irrelevant on steps 1, 3, …; player 1 on steps 2, 4, ….
    TurnBased { horizon: usize, states: usize, actions: usize },
}

impl GameSpec {
    pub fn generate(&self, seed: u64) -> Result<MarkovGame> {
        match *self {
            GameSpec::MatchingPenniesChain { horizon, states } => matching_pennies_chain(horizon, states),
            GameSpec::Random { horizon, states, actions, sparsity } => random_game(horizon, states, actions, sparsity, seed),
            GameSpec::TurnBased { horizon, states, actions } => turn_based_game(horizon, states, actions, seed),
        }
    }
}

fn positive(what: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::Config(format!("{what} must be positive")));
    }
    Ok(())
}

pub fn matching_pennies_chain(horizon: usize, states: usize) -> Result<MarkovGame> {
    positive("horizon", horizon)?;
    positive("states", states)?;
    let sh = Shape::new(horizon, states, 2, 2);
    let mut rewards = Vec::with_capacity(sh.q_len());
    let mut transitions = Vec::with_capacity(sh.q_len() * states);
    for _ in 0..horizon {
        for x in 0..states {
            for a in 0..2 {
                for b in 0..2 {
                    rewards.push(if a == b { 1.0 } else { -1.0 });
                    let to = if a == b { (x + 1) % states } else { x };
                    transitions.extend((0..states).map(|y| if y == to { 1.0 } else { 0.0 }));
                }
            }
        }
    }
    MarkovGame::new(sh, 0, (-1.0, 1.0), rewards, transitions)
}

fn random_row(rng: &mut StreamRng, states: usize, keep: usize) -> Vec<f64> {
    let mut row = vec![0.0; states];
    for i in sample_indices(rng, states, keep).iter() {
        // (0, 1] so that kept successors have positive mass
        row[i] = 1.0 - rng.random::<f64>();
    }
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= total);
    row
}

pub fn random_game(horizon: usize, states: usize, actions: usize, sparsity: f64, seed: u64) -> Result<MarkovGame> {
    positive("horizon", horizon)?;
    positive("states", states)?;
    positive("actions", actions)?;
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::Config(format!("sparsity must lie in [0, 1], got {sparsity}")));
    }
    let keep = (((1.0 - sparsity) * states as f64).round() as usize).clamp(1, states);
    let sh = Shape::new(horizon, states, actions, actions);
    let mut rng = rng::stream(seed, &[rng::label("random-game")]);
    let mut rewards = Vec::with_capacity(sh.q_len());
    let mut transitions = Vec::with_capacity(sh.q_len() * states);
    for _ in 0..sh.q_len() {
        rewards.push(rng.random_range(-1.0..=1.0));
        transitions.extend(random_row(&mut rng, states, keep));
    }
    MarkovGame::new(sh, 0, (-1.0, 1.0), rewards, transitions)
}

pub fn turn_based_game(horizon: usize, states: usize, actions: usize, seed: u64) -> Result<MarkovGame> {
    positive("horizon", horizon)?;
    positive("states", states)?;
    positive("actions", actions)?;
    let sh = Shape::new(horizon, states, actions, actions);
    let mut rng = rng::stream(seed, &[rng::label("turn-based-game")]);
    let mut rewards = vec![0.0; sh.q_len()];
    let mut transitions = vec![0.0; sh.q_len() * states];
    for h in 0..horizon {
        let mover = if h % 2 == 0 { Player::One } else { Player::Two };
        for x in 0..states {
            for m in 0..actions {
                let r = rng.random_range(-1.0..=1.0);
                let row = random_row(&mut rng, states, states);
                for o in 0..actions {
                    let (a, b) = if mover == Player::One { (m, o) } else { (o, m) };
                    let i = sh.q_index(h, x, a, b);
                    rewards[i] = r;
                    transitions[i * states..(i + 1) * states].copy_from_slice(&row);
                }
            }
        }
    }
    MarkovGame::new(sh, 0, (-1.0, 1.0), rewards, transitions)
}

/// Random policies for one player: the first `n_pure` are deterministic,
/// the rest have uniform-random rows.
pub fn random_policies(
    horizon: usize,
    states: usize,
    actions: usize,
    count: usize,
    n_pure: usize,
    seed: u64,
) -> Result<PolicyFamily> {
    let mut rng = rng::stream(seed, &[rng::label("random-policies")]);
    let members = (0..count)
        .map(|i| {
            if i < n_pure {
                let choice: Vec<usize> = (0..horizon * states).map(|_| rng.random_range(0..actions)).collect();
                StochasticPolicy::pure(horizon, states, actions, |h, x| choice[h * states + x])
            } else {
                let rows: Vec<f64> = (0..horizon * states).flat_map(|_| random_row(&mut rng, actions, actions)).collect();
                StochasticPolicy::new(horizon, states, actions, rows).unwrap_or_else(|_| unreachable!())
            }
        })
        .collect();
    PolicyFamily::new(members)
}

/// Value range of a level-`h` Q-function when rewards lie in `range`.
pub fn value_bounds(game: &MarkovGame, h: usize) -> (f64, f64) {
    let (lo, hi) = game.reward_range();
    let remaining = (game.horizon() - h) as f64;
    (remaining * lo, remaining * hi)
}

fn perturbed(game: &MarkovGame, base: &QFunction, noise: f64, rng: &mut StreamRng) -> QFunction {
    let sh = base.shape();
    let mut q = base.clone();
    for h in 0..sh.horizon {
        let (lo, hi) = value_bounds(game, h);
        for v in &mut q.values_mut()[h * sh.cells()..(h + 1) * sh.cells()] {
            *v = (*v + rng.random_range(-noise..=noise)).clamp(lo, hi);
        }
    }
    q
}

/// `Q*` (tagged), every `Q^{π, ν_π}` for `π ∈ policies` with `ν_π` the
/// best response restricted to the same class, and `n_decoys` clamped-noise
/// perturbations of those truths, each at sup distance ≥ `noise/2` from
/// every other member.
pub fn realizable_family(
    game: &MarkovGame,
    policies: Option<&PolicyFamily>,
    n_decoys: usize,
    noise: f64,
    seed: u64,
) -> Result<FiniteValueFamily> {
    let sol = ne_value_iteration(game, DEFAULT_SOLVER_TOL)?;
    let mut members = vec![sol.q_star.clone()];
    let mut tags = vec![TruthTags { qstar: true, policy_values: vec![] }];
    if let Some(pols) = policies {
        pols.check_for(game.shape(), Player::One)?;
        for (i, pi) in pols.members().iter().enumerate() {
            let (nu, _) = restricted_best_response(game, pi, Player::One, pols.members())?;
            let q = policy_q_function(game, pi, &nu)?.q;
            match members.iter().position(|m| m.distance(&q) == 0.0) {
                Some(j) => tags[j].policy_values.push(i),
                None => {
                    members.push(q);
                    tags.push(TruthTags { qstar: false, policy_values: vec![i] });
                }
            }
        }
    }
    add_decoys(game, members, tags, n_decoys, noise, seed)
}

fn add_decoys(
    game: &MarkovGame,
    mut members: Vec<QFunction>,
    mut tags: Vec<TruthTags>,
    n_decoys: usize,
    noise: f64,
    seed: u64,
) -> Result<FiniteValueFamily> {
    if n_decoys > 0 && !(noise > 0.0) {
        return Err(Error::Config(format!("decoy noise must be positive, got {noise}")));
    }
    let n_truths = members.len();
    let mut rng = rng::stream(seed, &[rng::label("decoys")]);
    for d in 0..n_decoys {
        let base = members[d % n_truths].clone();
        let mut placed = false;
        for _ in 0..SEPARATION_RETRIES {
            let q = perturbed(game, &base, noise, &mut rng);
            if members.iter().all(|m| m.distance(&q) >= noise / 2.0) {
                members.push(q);
                tags.push(TruthTags::default());
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::Config(format!("could not separate decoy {d} after {SEPARATION_RETRIES} attempts")));
        }
    }
    FiniteValueFamily::with_tags(members, tags)
}

/// Family of `size` random tables in the value range, none equal to `Q*`.
pub fn decoy_family(game: &MarkovGame, size: usize, seed: u64) -> Result<FiniteValueFamily> {
    positive("family size", size)?;
    let sh = game.shape();
    let mut rng = rng::stream(seed, &[rng::label("decoy-family")]);
    let members = (0..size)
        .map(|_| {
            let mut vals = Vec::with_capacity(sh.q_len());
            for h in 0..sh.horizon {
                let (lo, hi) = value_bounds(game, h);
                vals.extend((0..sh.cells()).map(|_| rng.random_range(lo..=hi)));
            }
            QFunction::new(sh, vals)
        })
        .collect::<Result<Vec<_>>>()?;
    FiniteValueFamily::new(members)
}

/// The true game first, then `n_decoys` perturbed models: rewards moved by
/// up to `noise` (clamped to the range) and transition rows mixed with
/// random rows at weight `noise`.
pub fn model_family(game: &MarkovGame, n_decoys: usize, noise: f64, seed: u64) -> Result<ModelFamily> {
    if !(noise > 0.0 && noise <= 1.0) && n_decoys > 0 {
        return Err(Error::Config(format!("model noise must lie in (0, 1], got {noise}")));
    }
    let sh = game.shape();
    let (lo, hi) = game.reward_range();
    let mut rng = rng::stream(seed, &[rng::label("model-family")]);
    let mut members = vec![game.clone()];
    for _ in 0..n_decoys {
        let rewards: Vec<f64> = game.rewards().iter().map(|r| (r + rng.random_range(-noise..=noise)).clamp(lo, hi)).collect();
        let mut transitions = Vec::with_capacity(game.transitions().len());
        for row in game.transitions().chunks(sh.n_states) {
            let mix = random_row(&mut rng, sh.n_states, sh.n_states);
            let mut new: Vec<f64> = row.iter().zip(&mix).map(|(p, m)| (1.0 - noise) * p + noise * m).collect();
            let total: f64 = new.iter().sum();
            new.iter_mut().for_each(|v| *v /= total);
            transitions.extend(new);
        }
        members.push(MarkovGame::new(sh, game.initial_state(), game.reward_range(), rewards, transitions)?);
    }
    ModelFamily::new(members)
}

/// Discriminators closed under negation: `±r`, `±1[x' = y]` at each level,
/// and `±1[x' = y]` restricted to each single `(h, x, a, b)`.
pub fn indicator_tests(shape: Shape, reward_range: (f64, f64)) -> Result<TestFunctionFamily> {
    let s = shape.n_states;
    let len = shape.q_len() * s;
    let mut base = vec![TestFunction { reward_weight: 1.0, table: vec![0.0; len] }];
    for h in 0..shape.horizon {
        for y in 0..s {
            let mut table = vec![0.0; len];
            for c in 0..shape.cells() {
                table[(h * shape.cells() + c) * s + y] = 1.0;
            }
            base.push(TestFunction { reward_weight: 0.0, table });
        }
    }
    for i in 0..shape.q_len() {
        for y in 0..s {
            let mut table = vec![0.0; len];
            table[i * s + y] = 1.0;
            base.push(TestFunction { reward_weight: 0.0, table });
        }
    }
    let members = base
        .into_iter()
        .flat_map(|g| {
            let neg = TestFunction { reward_weight: -g.reward_weight, table: g.table.iter().map(|v| -v).collect() };
            [g, neg]
        })
        .collect();
    TestFunctionFamily::new(shape, reward_range, members)
}
