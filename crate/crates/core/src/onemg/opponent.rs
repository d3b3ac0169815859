use crate::error::{Error, Result};
use crate::game::{best_response_value_iteration, GameSolution, MarkovGame, Player, StochasticPolicy};

/// Player 2's behaviour in the decoupled setting. The learner never sees
/// the policy, only the sampled actions.
#[derive(Debug, Clone, PartialEq)]
pub enum Opponent {
    /// Exact best response to the learner's current policy.
    BestResponse,
    /// The true game's equilibrium policy `ν*`.
    SelfNash,
    Fixed(StochasticPolicy),
    /// Policy `k` in episode `k`. Running past the end is a configuration
    /// error unless `cycle` is set.
    Schedule { policies: Vec<StochasticPolicy>, cycle: bool },
}

impl Opponent {
    pub fn kind(&self) -> &'static str {
        match self {
            Opponent::BestResponse => "best-response",
            Opponent::SelfNash => "self-nash",
            Opponent::Fixed(_) => "fixed",
            Opponent::Schedule { cycle: false, .. } => "schedule",
            Opponent::Schedule { cycle: true, .. } => "cycle",
        }
    }

    /// Policies carried by the opponent (for saving alongside a run).
    pub fn policies(&self) -> &[StochasticPolicy] {
        match self {
            Opponent::Fixed(p) => std::slice::from_ref(p),
            Opponent::Schedule { policies, .. } => policies,
            _ => &[],
        }
    }

    /// Rebuilds an opponent from [`Opponent::kind`] and [`Opponent::policies`].
    pub fn from_parts(kind: &str, policies: Vec<StochasticPolicy>) -> Result<Self> {
        let need = |p: &Vec<StochasticPolicy>| {
            if p.is_empty() {
                Err(Error::Config(format!("opponent `{kind}` needs at least one policy")))
            } else {
                Ok(())
            }
        };
        match kind {
            "best-response" => Ok(Opponent::BestResponse),
            "self-nash" => Ok(Opponent::SelfNash),
            "fixed" => {
                need(&policies)?;
                Ok(Opponent::Fixed(policies.into_iter().next().unwrap_or_else(|| unreachable!())))
            }
            "schedule" | "cycle" => {
                need(&policies)?;
                Ok(Opponent::Schedule { policies, cycle: kind == "cycle" })
            }
            other => Err(Error::Config(format!(
                "unknown opponent `{other}` (expected best-response, self-nash, fixed, schedule or cycle)"
            ))),
        }
    }

    pub fn check(&self, game: &MarkovGame) -> Result<()> {
        for p in self.policies() {
            p.check_for(game.shape(), Player::Two)?;
        }
        Ok(())
    }

    /// Player 2's policy in episode `k` (0-based) against `pi`.
    pub fn policy(
        &self,
        k: usize,
        pi: &StochasticPolicy,
        game: &MarkovGame,
        solution: &GameSolution,
    ) -> Result<StochasticPolicy> {
        match self {
            Opponent::BestResponse => Ok(best_response_value_iteration(game, pi, Player::One)?.0),
            Opponent::SelfNash => Ok(solution.nu_star.clone()),
            Opponent::Fixed(p) => Ok(p.clone()),
            Opponent::Schedule { policies, cycle } => {
                if k < policies.len() {
                    Ok(policies[k].clone())
                } else if *cycle {
                    Ok(policies[k % policies.len()].clone())
                } else {
                    Err(Error::Config(format!("opponent schedule of length {} exhausted at episode {}", policies.len(), k + 1)))
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{evaluate_policy_pair, ne_value_iteration, tests::pennies, DEFAULT_SOLVER_TOL};

    #[test]
    fn best_response_against_equilibrium_attains_value() {
        let g = pennies();
        let sol = ne_value_iteration(&g, DEFAULT_SOLVER_TOL).unwrap();
        let nu = Opponent::BestResponse.policy(0, &sol.pi_star, &g, &sol).unwrap();
        assert!((evaluate_policy_pair(&g, &sol.pi_star, &nu).unwrap() - sol.value()).abs() < 1e-9);
    }

    #[test]
    fn fixed_is_episode_independent_and_schedule_cycles() {
        let g = pennies();
        let sol = ne_value_iteration(&g, DEFAULT_SOLVER_TOL).unwrap();
        let p0 = StochasticPolicy::pure(1, 1, 2, |_, _| 0);
        let p1 = StochasticPolicy::pure(1, 1, 2, |_, _| 1);
        let f = Opponent::Fixed(p1.clone());
        assert_eq!(f.policy(0, &p0, &g, &sol).unwrap(), f.policy(17, &p1, &g, &sol).unwrap());
        let c = Opponent::Schedule { policies: vec![p0.clone(), p1.clone()], cycle: true };
        let seq: Vec<_> = (0..5).map(|k| c.policy(k, &p0, &g, &sol).unwrap()).collect();
        assert_eq!(seq, vec![p0.clone(), p1.clone(), p0.clone(), p1.clone(), p0.clone()]);
        let s = Opponent::Schedule { policies: vec![p0.clone()], cycle: false };
        assert!(matches!(s.policy(1, &p0, &g, &sol), Err(Error::Config(_))));
    }

    #[test]
    fn parts_round_trip() {
        let p = StochasticPolicy::uniform(1, 1, 2);
        for o in [
            Opponent::BestResponse,
            Opponent::SelfNash,
            Opponent::Fixed(p.clone()),
            Opponent::Schedule { policies: vec![p.clone(), p.clone()], cycle: true },
        ] {
            assert_eq!(Opponent::from_parts(o.kind(), o.policies().to_vec()).unwrap(), o);
        }
        assert!(Opponent::from_parts("fixed", vec![]).is_err());
        assert!(Opponent::from_parts("nope", vec![]).is_err());
    }
}
