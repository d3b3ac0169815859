use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LinearState;
use crate::error::{Error, Result};
use crate::exec::{map_range, Execution};
use crate::game::{solve_matrix_game, QFunction, Shape, StochasticPolicy};
use crate::hypothesis::LinearFeatures;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlanMode {
    /// Per-coordinate upper bounds; requires one-hot features.
    #[default]
    DiagExact,
    /// Coordinate ascent over the ellipsoids with random restarts.
    Search,
}

impl std::str::FromStr for PlanMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diag-exact" => Ok(PlanMode::DiagExact),
            "search" => Ok(PlanMode::Search),
            other => Err(Error::Config(format!("unknown plan mode `{other}` (expected diag-exact or search)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSettings {
    pub restarts: usize,
    pub sweeps: usize,
    pub initial_step: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        SearchSettings { restarts: 16, sweeps: 3, initial_step: 0.5 }
    }
}

/// Parameters, clamped Q-values, per-state equilibria and values of a plan.
#[derive(Debug, Clone)]
pub struct OptimisticPlan {
    pub w: Vec<DVector<f64>>,
    pub theta: Vec<DVector<f64>>,
    pub q: QFunction,
    /// `(H+1) × S`, last row zero.
    pub v: Vec<f64>,
    pub pi: StochasticPolicy,
    pub nu: StochasticPolicy,
    n_states: usize,
    initial_state: usize,
}

impl OptimisticPlan {
    pub fn v(&self, h: usize, x: usize) -> f64 {
        self.v[h * self.n_states + x]
    }

    /// `V_1(x_1)`.
    pub fn value(&self) -> f64 {
        self.v(0, self.initial_state)
    }
}

/// Everything the planner reads.
pub struct PlanInput<'a> {
    pub state: &'a LinearState,
    pub features: &'a LinearFeatures,
    /// Confidence radius `R` of `‖θ_h − w_h‖_{Λ_h} ≤ R`.
    pub radius: f64,
    /// `value_bounds[h]` clamps `Q_h`.
    pub value_bounds: &'a [(f64, f64)],
    pub initial_state: usize,
    pub solver_tol: f64,
}

/// How `θ_h` is placed relative to `w_h`.
enum Offset<'a> {
    Box,
    /// `θ_h = w_h + R · L_h^{-T} u_h` with `‖u_h‖ ≤ 1`.
    Ellipsoid(&'a [DVector<f64>]),
}

fn backward(input: &PlanInput, offset: &Offset) -> Result<OptimisticPlan> {
    let sh: Shape = input.features.shape();
    let s = sh.n_states;
    let mut v = vec![0.0; (sh.horizon + 1) * s];
    let mut q = QFunction::zeros(sh);
    let mut w_all = vec![DVector::zeros(0); sh.horizon];
    let mut theta_all = vec![DVector::zeros(0); sh.horizon];
    let mut pi_rows = vec![Vec::new(); sh.horizon * s];
    let mut nu_rows = vec![Vec::new(); sh.horizon * s];
    for h in (0..sh.horizon).rev() {
        let v_next = (h + 1 < sh.horizon).then(|| v[(h + 1) * s..(h + 2) * s].to_vec());
        let w = input.state.ridge_update(h, v_next.as_deref())?;
        let gram = input.state.gram(h);
        let theta = match offset {
            Offset::Box => DVector::from_fn(w.len(), |i, _| w[i] + input.radius / gram[(i, i)].sqrt()),
            Offset::Ellipsoid(u) => {
                let chol =
                    gram.clone().cholesky().ok_or_else(|| Error::Numerical("Gram matrix is not positive definite".into()))?;
                let z = chol.l().transpose().solve_upper_triangular(&u[h]).ok_or_else(|| Error::Numerical("singular factor".into()))?;
                &w + z * input.radius
            }
        };
        let (lo, hi) = input.value_bounds[h];
        for x in 0..s {
            for a in 0..sh.n_actions1 {
                for b in 0..sh.n_actions2 {
                    let phi = input.features.phi(h, x, a, b);
                    let val: f64 = phi.iter().zip(theta.iter()).map(|(p, t)| p * t).sum();
                    q.set(h, x, a, b, val.clamp(lo, hi));
                }
            }
            let sol = solve_matrix_game(&q.stage(h, x), input.solver_tol).map_err(|e| e.at_state(h, x))?;
            v[h * s + x] = sol.value;
            pi_rows[h * s + x] = sol.row_policy;
            nu_rows[h * s + x] = sol.col_policy;
        }
        w_all[h] = w;
        theta_all[h] = theta;
    }
    Ok(OptimisticPlan {
        w: w_all,
        theta: theta_all,
        q,
        v,
        pi: StochasticPolicy::from_rows(sh.horizon, s, sh.n_actions1, pi_rows),
        nu: StochasticPolicy::from_rows(sh.horizon, s, sh.n_actions2, nu_rows),
        n_states: s,
        initial_state: input.initial_state,
    })
}

/// Per-coordinate upper bounds `θ_i = w_i + R / √Λ_ii`, then backward
/// induction. Exact for the box around the ellipsoid when every `Λ_h` is
/// diagonal, since the matrix-game value is monotone in the payoffs.
pub fn plan_diag_exact(input: &PlanInput) -> Result<OptimisticPlan> {
    if !input.features.is_one_hot() {
        return Err(Error::Config("diag-exact planning requires one-hot features".into()));
    }
    backward(input, &Offset::Box)
}

fn project(u: &mut DVector<f64>) {
    let n = u.norm();
    if n > 1.0 {
        *u /= n;
    }
}

fn ascend(input: &PlanInput, mut u: Vec<DVector<f64>>, settings: &SearchSettings) -> Result<(Vec<DVector<f64>>, OptimisticPlan)> {
    let mut best = backward(input, &Offset::Ellipsoid(&u))?;
    let mut step = settings.initial_step;
    for _ in 0..settings.sweeps {
        for h in (0..u.len()).rev() {
            for i in 0..u[h].len() {
                for sign in [1.0, -1.0] {
                    let mut cand = u.clone();
                    cand[h][i] += sign * step;
                    project(&mut cand[h]);
                    let plan = backward(input, &Offset::Ellipsoid(&cand))?;
                    if plan.value() > best.value() + 1e-12 {
                        best = plan;
                        u = cand;
                    }
                }
            }
        }
        step /= 2.0;
    }
    Ok((u, best))
}

/// Coordinate ascent over `u_h` in the unit ball. Restart 0 starts at
/// `θ = w`; the others at uniform points of the ball. The best objective
/// wins, ties to the lowest restart.
pub fn plan_search(input: &PlanInput, settings: &SearchSettings, seed: u64, exec: Execution) -> Result<OptimisticPlan> {
    let horizon = input.features.shape().horizon;
    let d = input.features.dim();
    let results = map_range(exec, settings.restarts.max(1), |r| {
        let start: Vec<DVector<f64>> = if r == 0 {
            vec![DVector::zeros(d); horizon]
        } else {
            let mut g = rng::stream(seed, &[rng::label("plan-restart"), r as u64]);
            (0..horizon)
                .map(|_| {
                    let dir = DVector::from_fn(d, |_, _| {
                        // Box–Muller
                        let (u1, u2): (f64, f64) = (1.0 - g.random::<f64>(), g.random());
                        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
                    });
                    let n = dir.norm().max(f64::MIN_POSITIVE);
                    dir * (g.random::<f64>().powf(1.0 / d as f64) / n)
                })
                .collect()
        };
        ascend(input, start, settings).map(|(_, p)| p)
    });
    let mut best: Option<OptimisticPlan> = None;
    for r in results {
        let p = r?;
        if best.as_ref().is_none_or(|b| p.value() > b.value()) {
            best = Some(p);
        }
    }
    best.ok_or_else(|| Error::Numerical("no planner restarts ran".into()))
}
