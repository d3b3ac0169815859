use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{MarkovGame, Player, StochasticPolicy};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub h: usize,
    pub x: usize,
    pub a: usize,
    pub b: usize,
    pub r: f64,
    pub x_next: usize,
}

/// One full trajectory; `steps[h].x_next == steps[h + 1].x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub steps: Vec<Step>,
}

impl EpisodeRecord {
    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.r).sum()
    }
}

/// Inverse-CDF draw from `probs` with a uniform `u ∈ [0, 1)`.
///
/// Falls back to the last action with positive mass when rounding leaves
/// `u` beyond the accumulated total.
pub fn sample_index(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Draws one episode. Three uniforms are consumed per step in the order
/// `a, b, x'`, so a given stream always produces the same record.
pub fn sample_episode<R: Rng + ?Sized>(
    game: &MarkovGame,
    pi: &StochasticPolicy,
    nu: &StochasticPolicy,
    rng: &mut R,
) -> Result<EpisodeRecord> {
    pi.check_for(game.shape(), Player::One)?;
    nu.check_for(game.shape(), Player::Two)?;
    let mut x = game.initial_state();
    let mut steps = Vec::with_capacity(game.horizon());
    for h in 0..game.horizon() {
        let a = sample_index(pi.row(h, x), rng.random::<f64>());
        let b = sample_index(nu.row(h, x), rng.random::<f64>());
        let x_next = sample_index(game.next_dist(h, x, a, b), rng.random::<f64>());
        steps.push(Step { h, x, a, b, r: game.reward(h, x, a, b), x_next });
        x = x_next;
    }
    Ok(EpisodeRecord { steps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Shape;
    use crate::rng;

    fn chain() -> MarkovGame {
        // two states, deterministic: (a == b) moves to state 1, otherwise stays
        let sh = Shape::new(3, 2, 2, 2);
        let mut rewards = Vec::new();
        let mut trans = Vec::new();
        for _h in 0..3 {
            for x in 0..2 {
                for a in 0..2 {
                    for b in 0..2 {
                        rewards.push(if a == b { 1.0 } else { -1.0 });
                        let to = if a == b { 1 } else { x };
                        trans.extend(if to == 0 { [1.0, 0.0] } else { [0.0, 1.0] });
                    }
                }
            }
        }
        MarkovGame::new(sh, 0, (-1.0, 1.0), rewards, trans).unwrap()
    }

    #[test]
    fn deterministic_game_and_pure_policies_give_unique_trajectory() {
        let g = chain();
        let pi = StochasticPolicy::pure(3, 2, 2, |_, _| 0);
        let nu = StochasticPolicy::pure(3, 2, 2, |h, _| h % 2);
        let ep = sample_episode(&g, &pi, &nu, &mut rng::stream(1, &[0])).unwrap();
        let xs: Vec<_> = ep.steps.iter().map(|s| (s.x, s.a, s.b, s.x_next)).collect();
        assert_eq!(xs, vec![(0, 0, 0, 1), (1, 0, 1, 1), (1, 0, 0, 1)]);
        assert_eq!(ep.total_reward(), 1.0);
    }

    #[test]
    fn same_stream_same_record_and_chained_states() {
        let g = chain();
        let u = StochasticPolicy::uniform(3, 2, 2);
        let a = sample_episode(&g, &u, &u, &mut rng::stream(9, &[4])).unwrap();
        let b = sample_episode(&g, &u, &u, &mut rng::stream(9, &[4])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.steps[0].x, g.initial_state());
        for w in a.steps.windows(2) {
            assert_eq!(w[0].x_next, w[1].x);
        }
    }

    #[test]
    fn sample_index_skips_zero_mass() {
        assert_eq!(sample_index(&[0.0, 1.0, 0.0], 0.999_999), 1);
        assert_eq!(sample_index(&[0.5, 0.5], 0.25), 0);
        assert_eq!(sample_index(&[0.5, 0.5, 0.0], 1.0), 1);
    }
}
