//! Game definition files.
//!
//! ```json
//! { "horizon": 2, "states": 1, "actions1": 2, "actions2": 2, "initial_state": 0,
//!   "reward_range": [-1, 1],
//!   "rewards":     [[[[1, -1], [-1, 1]]], …],          // H × S × A1 × A2
//!   "transitions": [[[[[1], [1]], [[1], [1]]]], …] }  // H × S × A1 × A2 × S
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GameSolution, MarkovGame, Shape};
use crate::hypothesis::nested::{nest3, nest4, N3, N4};
use crate::error::{Error, Result};
use crate::fileio;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub horizon: usize,
    pub states: usize,
    pub actions1: usize,
    pub actions2: usize,
    pub initial_state: usize,
    #[serde(default = "default_range")]
    pub reward_range: [f64; 2],
    pub rewards: Vec<Vec<Vec<Vec<f64>>>>,
    pub transitions: Vec<Vec<Vec<Vec<Vec<f64>>>>>,
}

fn default_range() -> [f64; 2] {
    [-1.0, 1.0]
}

fn check_len(what: &str, got: usize, want: usize, at: &str) -> Result<()> {
    if got != want {
        return Err(Error::Shape(format!("{what}{at}: expected {want} entries, got {got}")));
    }
    Ok(())
}

impl GameFile {
    pub fn into_game(self) -> Result<MarkovGame> {
        let shape = Shape::new(self.horizon, self.states, self.actions1, self.actions2);
        check_len("rewards", self.rewards.len(), shape.horizon, "")?;
        check_len("transitions", self.transitions.len(), shape.horizon, "")?;
        let mut rewards = Vec::with_capacity(shape.q_len());
        let mut transitions = Vec::with_capacity(shape.q_len() * shape.n_states);
        for h in 0..shape.horizon {
            check_len("rewards", self.rewards[h].len(), shape.n_states, &format!("[{h}]"))?;
            check_len("transitions", self.transitions[h].len(), shape.n_states, &format!("[{h}]"))?;
            for x in 0..shape.n_states {
                check_len("rewards", self.rewards[h][x].len(), shape.n_actions1, &format!("[{h}][{x}]"))?;
                check_len("transitions", self.transitions[h][x].len(), shape.n_actions1, &format!("[{h}][{x}]"))?;
                for a in 0..shape.n_actions1 {
                    check_len("rewards", self.rewards[h][x][a].len(), shape.n_actions2, &format!("[{h}][{x}][{a}]"))?;
                    check_len("transitions", self.transitions[h][x][a].len(), shape.n_actions2, &format!("[{h}][{x}][{a}]"))?;
                    rewards.extend_from_slice(&self.rewards[h][x][a]);
                    for b in 0..shape.n_actions2 {
                        let row = &self.transitions[h][x][a][b];
                        check_len("transitions", row.len(), shape.n_states, &format!("[{h}][{x}][{a}][{b}]"))?;
                        transitions.extend_from_slice(row);
                    }
                }
            }
        }
        MarkovGame::new(shape, self.initial_state, (self.reward_range[0], self.reward_range[1]), rewards, transitions)
    }

    pub fn from_game(game: &MarkovGame) -> Self {
        let sh = game.shape();
        let (lo, hi) = game.reward_range();
        GameFile {
            horizon: sh.horizon,
            states: sh.n_states,
            actions1: sh.n_actions1,
            actions2: sh.n_actions2,
            initial_state: game.initial_state(),
            reward_range: [lo, hi],
            rewards: (0..sh.horizon)
                .map(|h| {
                    (0..sh.n_states)
                        .map(|x| (0..sh.n_actions1).map(|a| (0..sh.n_actions2).map(|b| game.reward(h, x, a, b)).collect()).collect())
                        .collect()
                })
                .collect(),
            transitions: (0..sh.horizon)
                .map(|h| {
                    (0..sh.n_states)
                        .map(|x| {
                            (0..sh.n_actions1)
                                .map(|a| (0..sh.n_actions2).map(|b| game.next_dist(h, x, a, b).to_vec()).collect())
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

pub fn load_game(path: impl AsRef<Path>) -> Result<MarkovGame> {
    let path = path.as_ref();
    let file: GameFile = fileio::read_json(path)?;
    file.into_game().map_err(|e| Error::Parse { path: path.display().to_string(), message: e.to_string() })
}

pub fn save_game(path: impl AsRef<Path>, game: &MarkovGame) -> Result<()> {
    fileio::write_json(path, &GameFile::from_game(game))
}

/// Equilibrium of a game as written by `solve-ne`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionFile {
    pub value: f64,
    /// `(H+1) × S`.
    pub v_star: Vec<Vec<f64>>,
    pub pi_star: N3,
    pub nu_star: N3,
    pub q_star: N4,
}

impl SolutionFile {
    pub fn from_solution(sol: &GameSolution) -> Self {
        let sh = sol.q_star.shape();
        let s = sh.n_states;
        SolutionFile {
            value: sol.value(),
            v_star: sol.v_star.chunks(s).map(<[f64]>::to_vec).collect(),
            pi_star: nest3(sol.pi_star.probs(), [sh.horizon, s, sh.n_actions1]),
            nu_star: nest3(sol.nu_star.probs(), [sh.horizon, s, sh.n_actions2]),
            q_star: nest4(sol.q_star.values(), [sh.horizon, s, sh.n_actions1, sh.n_actions2]),
        }
    }
}

pub fn save_solution(path: impl AsRef<Path>, sol: &GameSolution) -> Result<()> {
    fileio::write_json(path, &SolutionFile::from_solution(sol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_first_violation() {
        let g = MarkovGame::new(Shape::new(1, 2, 1, 2), 1, (-1.0, 1.0), vec![0.5, -0.5, 0.25, 0.0], vec![1.0, 0.0, 0.3, 0.7, 0.0, 1.0, 0.5, 0.5])
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.json");
        save_game(&p, &g).unwrap();
        assert_eq!(load_game(&p).unwrap(), g);

        let mut f = GameFile::from_game(&g);
        f.transitions[0][1][0][1] = vec![0.5, 0.6];
        let err = f.into_game().unwrap_err().to_string();
        assert!(err.contains("h=0, x=1, a=0, b=1"), "{err}");

        let mut f = GameFile::from_game(&g);
        f.rewards[0][1][0].pop();
        assert!(f.into_game().unwrap_err().to_string().contains("rewards[0][1][0]"));
    }
}
