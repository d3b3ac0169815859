use super::PolicyFamily;
use crate::error::{Error, Result};
use crate::game::argmin_first;
use crate::game::{solve_matrix_game, QFunction, StochasticPolicy};

/// The max-min pair a hypothesis induces and its stage-game values.
#[derive(Debug, Clone)]
pub struct SolvedHypothesis {
    pub pi: StochasticPolicy,
    pub nu: StochasticPolicy,
    /// `H × S` matrix-game values of `f_h(x, ·, ·)`.
    pub values: Vec<f64>,
    n_states: usize,
}

impl SolvedHypothesis {
    /// `f_h(x, π_f, ν_f)`.
    pub fn value(&self, h: usize, x: usize) -> f64 {
        self.values[h * self.n_states + x]
    }
}

/// Saddle point of every stage game `f_h(x, ·, ·)`.
pub fn induced_max_min_policy(f: &QFunction, tol: f64) -> Result<SolvedHypothesis> {
    let sh = f.shape();
    let n = sh.horizon * sh.n_states;
    let mut pi_rows = Vec::with_capacity(n);
    let mut nu_rows = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for h in 0..sh.horizon {
        for x in 0..sh.n_states {
            let sol = solve_matrix_game(&f.stage(h, x), tol).map_err(|e| e.at_state(h, x))?;
            pi_rows.push(sol.row_policy);
            nu_rows.push(sol.col_policy);
            values.push(sol.value);
        }
    }
    Ok(SolvedHypothesis {
        pi: StochasticPolicy::from_rows(sh.horizon, sh.n_states, sh.n_actions1, pi_rows),
        nu: StochasticPolicy::from_rows(sh.horizon, sh.n_states, sh.n_actions2, nu_rows),
        values,
        n_states: sh.n_states,
    })
}

/// Matrix-game value of `f_h(x, ·, ·)`.
pub fn hypothesis_ne_value(f: &QFunction, h: usize, x: usize, tol: f64) -> Result<f64> {
    Ok(solve_matrix_game(&f.stage(h, x), tol).map_err(|e| e.at_state(h, x))?.value)
}

/// `f_h(x, π_row, ·)` as a vector over player-2 actions.
pub(crate) fn column_values(f: &QFunction, h: usize, x: usize, pi_row: &[f64]) -> Vec<f64> {
    let sh = f.shape();
    let mut out = vec![0.0; sh.n_actions2];
    for (a, &p) in pi_row.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for (b, o) in out.iter_mut().enumerate() {
            *o += p * f.get(h, x, a, b);
        }
    }
    out
}

/// Among the rows of `candidates` at `(h, x)`, the one minimising
/// `f_h(x, π_row, ν)`. Returns the candidate index and the value.
pub fn restricted_stage_response(
    f: &QFunction,
    h: usize,
    x: usize,
    pi_row: &[f64],
    candidates: &[StochasticPolicy],
) -> (usize, f64) {
    let cols = column_values(f, h, x, pi_row);
    let vals: Vec<f64> = candidates.iter().map(|c| c.row(h, x).iter().zip(&cols).map(|(p, v)| p * v).sum()).collect();
    argmin_first(&vals)
}

/// Player 2's response to `pi` under `f`, either the pointwise argmin
/// column or, when `restrict` is given, the best member row of the class.
pub fn induced_best_response(
    f: &QFunction,
    pi: &StochasticPolicy,
    restrict: Option<&PolicyFamily>,
) -> Result<StochasticPolicy> {
    let sh = f.shape();
    pi.check_for(sh, crate::game::Player::One)?;
    if let Some(r) = restrict {
        r.check_for(sh, crate::game::Player::Two)?;
    }
    let mut rows = Vec::with_capacity(sh.horizon * sh.n_states);
    for h in 0..sh.horizon {
        for x in 0..sh.n_states {
            match restrict {
                Some(r) => {
                    let (i, _) = restricted_stage_response(f, h, x, pi.row(h, x), r.members());
                    rows.push(r.members()[i].row(h, x).to_vec());
                }
                None => {
                    let (b, _) = argmin_first(&column_values(f, h, x, pi.row(h, x)));
                    let mut row = vec![0.0; sh.n_actions2];
                    row[b] = 1.0;
                    rows.push(row);
                }
            }
        }
    }
    Ok(StochasticPolicy::from_rows(sh.horizon, sh.n_states, sh.n_actions2, rows))
}

/// What a family's covering number is computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyCover {
    Finite { size: usize },
    /// Bound `d · ln(1 + 2R/ε)` for a radius-`R` ball in `R^d`.
    Linear { dim: usize, radius: f64 },
}

/// Log covering number at scale `eps`.
pub fn covering_log(cover: FamilyCover, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Input(format!("covering scale must be positive, got {eps}")));
    }
    match cover {
        FamilyCover::Finite { size: 0 } => Err(Error::Input("empty family".into())),
        FamilyCover::Finite { size } => Ok((size as f64).ln()),
        FamilyCover::Linear { dim, radius } => Ok(dim as f64 * (1.0 + 2.0 * radius / eps).ln()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{Matrix, Shape, DEFAULT_SOLVER_TOL};
    use proptest::prelude::*;

    fn pennies_q(h: usize, s: usize) -> QFunction {
        let sh = Shape::new(h, s, 2, 2);
        let vals = (0..sh.q_len()).map(|i| if (i % 4 == 0) || (i % 4 == 3) { 1.0 } else { -1.0 }).collect();
        QFunction::new(sh, vals).unwrap()
    }

    #[test]
    fn pennies_everywhere_gives_uniform() {
        let f = pennies_q(2, 3);
        let s = induced_max_min_policy(&f, DEFAULT_SOLVER_TOL).unwrap();
        assert!(s.pi.max_abs_diff(&StochasticPolicy::uniform(2, 3, 2)) < 1e-9);
        assert!(s.nu.max_abs_diff(&StochasticPolicy::uniform(2, 3, 2)) < 1e-9);
        assert!(s.values.iter().all(|v| v.abs() < 1e-9));
        assert!(hypothesis_ne_value(&f, 1, 2, DEFAULT_SOLVER_TOL).unwrap().abs() < 1e-9);
    }

    #[test]
    fn constant_table() {
        let sh = Shape::new(1, 1, 3, 2);
        let f = QFunction::new(sh, vec![0.4; 6]).unwrap();
        let s = induced_max_min_policy(&f, DEFAULT_SOLVER_TOL).unwrap();
        assert!((s.value(0, 0) - 0.4).abs() < 1e-12);
        assert!((s.pi.row(0, 0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unrestricted_response_reads_argmin_column() {
        let sh = Shape::new(1, 1, 2, 2);
        let f = QFunction::new(sh, vec![0.2, 0.9, -1.0, -2.0]).unwrap();
        let pi = StochasticPolicy::pure(1, 1, 2, |_, _| 0);
        let nu = induced_best_response(&f, &pi, None).unwrap();
        assert_eq!(nu.row(0, 0), &[1.0, 0.0]);
    }

    #[test]
    fn singleton_restriction_is_returned() {
        let sh = Shape::new(2, 2, 2, 2);
        let f = pennies_q(2, 2);
        let u = StochasticPolicy::uniform(2, 2, 2);
        let r = PolicyFamily::new(vec![u.clone()]).unwrap();
        let pi = StochasticPolicy::pure(2, 2, 2, |_, _| 1);
        assert_eq!(induced_best_response(&f, &pi, Some(&r)).unwrap(), u);
        let _ = sh;
    }

    #[test]
    fn covering_logs() {
        assert!((covering_log(FamilyCover::Finite { size: 8 }, 0.1).unwrap() - 8f64.ln()).abs() < 1e-15);
        assert_eq!(covering_log(FamilyCover::Finite { size: 1 }, 0.1).unwrap(), 0.0);
        let r = 3f64.sqrt();
        let want = 3.0 * (1.0 + 2.0 * r / 0.01).ln();
        assert!((covering_log(FamilyCover::Linear { dim: 3, radius: r }, 0.01).unwrap() - want).abs() < 1e-12);
        assert!(covering_log(FamilyCover::Finite { size: 3 }, 0.0).is_err());
    }

    fn grid_value(m: &Matrix) -> f64 {
        // 3 rows: simplex grid at 1e-3 resolution over the first two weights,
        // exact inner min over pure columns
        let n = 200;
        let mut best = f64::NEG_INFINITY;
        for i in 0..=n {
            for j in 0..=(n - i) {
                let p = [i as f64 / n as f64, j as f64 / n as f64, (n - i - j) as f64 / n as f64];
                let v = m.mul_row(&p).into_iter().fold(f64::INFINITY, f64::min);
                best = best.max(v);
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn saddle_consistency(vals in proptest::collection::vec(-1.0f64..1.0, 2 * 2 * 3 * 3)) {
            let sh = Shape::new(2, 2, 3, 3);
            let f = QFunction::new(sh, vals).unwrap();
            let s = induced_max_min_policy(&f, DEFAULT_SOLVER_TOL).unwrap();
            for h in 0..2 {
                for x in 0..2 {
                    let m = f.stage(h, x);
                    prop_assert!((m.bilinear(s.pi.row(h, x), s.nu.row(h, x)) - s.value(h, x)).abs() < 1e-9);
                    // coarse grid is a lower bound within its resolution
                    let g = grid_value(&m);
                    prop_assert!(g <= s.value(h, x) + 1e-9);
                    prop_assert!(s.value(h, x) - g < 2.0 * 2.0 / 200.0 + 1e-9);
                }
            }
        }

        #[test]
        fn restricted_response_dominates_members(
            vals in proptest::collection::vec(-1.0f64..1.0, 2 * 2 * 2 * 3),
            cands in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 2 * 2 * 3), 1..5),
        ) {
            let sh = Shape::new(2, 2, 2, 3);
            let f = QFunction::new(sh, vals).unwrap();
            let members: Vec<StochasticPolicy> = cands
                .into_iter()
                .map(|raw| {
                    let probs: Vec<f64> = raw.chunks(3).flat_map(|c| {
                        let s: f64 = c.iter().sum();
                        c.iter().map(move |v| v / s).collect::<Vec<_>>()
                    }).collect();
                    StochasticPolicy::new(2, 2, 3, probs).unwrap()
                })
                .collect();
            let fam = PolicyFamily::new(members).unwrap();
            let pi = StochasticPolicy::uniform(2, 2, 2);
            let br = induced_best_response(&f, &pi, Some(&fam)).unwrap();
            for h in 0..2 {
                for x in 0..2 {
                    let cols = column_values(&f, h, x, pi.row(h, x));
                    let val = |row: &[f64]| row.iter().zip(&cols).map(|(p, v)| p * v).sum::<f64>();
                    let got = val(br.row(h, x));
                    // exhaustive oracle, lowest index on ties
                    let mut best = (0, f64::INFINITY);
                    for (i, m) in fam.members().iter().enumerate() {
                        let v = val(m.row(h, x));
                        prop_assert!(got <= v + 1e-12);
                        if v < best.1 { best = (i, v); }
                    }
                    prop_assert_eq!(br.row(h, x), fam.members()[best.0].row(h, x));
                }
            }
        }
    }
}
