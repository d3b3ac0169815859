//! Brute-force complexity measures of finite hypothesis families on small
//! games, and exact checks of the realizability and completeness
//! assumptions.

mod eluder;

pub use eluder::{
    de_dimension, expectation, is_eps_independent, verify_witness, EluderResult, ScaleReading, SearchMode,
    DEFAULT_MEASURE_CAP,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::aove::restricted_values;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::game::{
    ne_value_iteration, occupancy, policy_q_function, restricted_best_response, MarkovGame, Player, StochasticPolicy,
    DEFAULT_SOLVER_TOL,
};
use crate::hypothesis::{hypothesis_ne_value, induced_best_response, FiniteValueFamily, PolicyFamily};

/// Tolerance for table membership.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// One residual `f_h − T_h f_{h+1}` over the cells of a level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub member: usize,
    pub policy: Option<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResidualFamily {
    pub level: usize,
    pub residuals: Vec<Residual>,
}

impl ResidualFamily {
    /// Distinct residual tables, in first-seen order.
    pub fn distinct_tables(&self) -> Vec<Vec<f64>> {
        dedup(self.residuals.iter().map(|r| r.values.clone()))
    }
}

fn dedup(items: impl Iterator<Item = Vec<f64>>) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in items {
        if !out.iter().any(|o| o.iter().zip(&v).all(|(a, b)| a.to_bits() == b.to_bits())) {
            out.push(v);
        }
    }
    out
}

/// `r_h + E_{x'}[succ(x')]` over the cells of level `h`.
fn backup(game: &MarkovGame, h: usize, succ: Option<&[f64]>) -> Vec<f64> {
    let sh = game.shape();
    let mut out = vec![0.0; sh.cells()];
    for x in 0..sh.n_states {
        for a in 0..sh.n_actions1 {
            for b in 0..sh.n_actions2 {
                let next = succ.map_or(0.0, |v| game.next_dist(h, x, a, b).iter().zip(v).map(|(p, s)| p * s).sum());
                out[sh.cell(x, a, b)] = game.reward(h, x, a, b) + next;
            }
        }
    }
    out
}

/// `T_h f_{h+1}`: reward plus the expected matrix-game value of `f_{h+1}`.
pub fn bellman_backup(game: &MarkovGame, f: &crate::game::QFunction, h: usize, tol: f64) -> Result<Vec<f64>> {
    let sh = game.shape();
    let succ = if h + 1 < sh.horizon {
        Some((0..sh.n_states).map(|x| hypothesis_ne_value(f, h + 1, x, tol)).collect::<Result<Vec<f64>>>()?)
    } else {
        None
    };
    Ok(backup(game, h, succ.as_deref()))
}

/// `T^π_h f_{h+1}`: the successor value is `min_{ν∈Π} f_{h+1}(x', π, ν)`.
pub fn restricted_backup(
    game: &MarkovGame,
    f: &crate::game::QFunction,
    pi: &StochasticPolicy,
    class: &PolicyFamily,
    h: usize,
) -> Vec<f64> {
    let sh = game.shape();
    let rv = restricted_values(f, pi, class);
    let succ = (h + 1 < sh.horizon).then(|| &rv[(h + 1) * sh.n_states..(h + 2) * sh.n_states]);
    backup(game, h, succ)
}

fn minus(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `{f_h − T_h f_{h+1} : f ∈ F}`.
pub fn bellman_residuals(game: &MarkovGame, family: &FiniteValueFamily, h: usize) -> Result<ResidualFamily> {
    family.check_game(game)?;
    check_level(game, h)?;
    let residuals = family
        .members()
        .iter()
        .enumerate()
        .map(|(i, f)| Ok(Residual { member: i, policy: None, values: minus(f.level(h), &bellman_backup(game, f, h, DEFAULT_SOLVER_TOL)?) }))
        .collect::<Result<_>>()?;
    Ok(ResidualFamily { level: h, residuals })
}

/// `{f_h − T^π_h f_{h+1} : f ∈ F, π ∈ Π}`.
pub fn restricted_residuals(
    game: &MarkovGame,
    family: &FiniteValueFamily,
    policies: &PolicyFamily,
    h: usize,
) -> Result<ResidualFamily> {
    family.check_game(game)?;
    policies.check_for(game.shape(), Player::One)?;
    check_level(game, h)?;
    let mut residuals = Vec::new();
    for (i, f) in family.members().iter().enumerate() {
        for (p, pi) in policies.members().iter().enumerate() {
            residuals.push(Residual { member: i, policy: Some(p), values: minus(f.level(h), &restricted_backup(game, f, pi, policies, h)) });
        }
    }
    Ok(ResidualFamily { level: h, residuals })
}

fn check_level(game: &MarkovGame, h: usize) -> Result<()> {
    if h >= game.horizon() {
        return Err(Error::Input(format!("level {h} out of range 0..{}", game.horizon())));
    }
    Ok(())
}

/// Measures over the cells `(x, a, b)` of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureFamily {
    pub measures: Vec<Vec<f64>>,
}

impl MeasureFamily {
    pub fn dirac(cells: usize) -> Self {
        MeasureFamily { measures: (0..cells).map(|i| (0..cells).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect() }
    }

    /// Distinct probability vectors; each must sum to one within `1e-12`.
    pub fn from_vectors(vectors: Vec<Vec<f64>>) -> Result<Self> {
        let len = vectors.first().map_or(0, Vec::len);
        for (i, v) in vectors.iter().enumerate() {
            let s: f64 = v.iter().sum();
            if v.len() != len || v.iter().any(|p| !(*p >= 0.0)) || (s - 1.0).abs() > 1e-12 {
                return Err(Error::Input(format!("measure {i} is not a probability vector over {len} cells")));
            }
        }
        Ok(MeasureFamily { measures: dedup(vectors.into_iter()) })
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }
}

/// Per state, the class row maximising `min_{ν∈Π} f_h(x, π, ν)`.
pub fn class_max_min_policy(f: &crate::game::QFunction, class: &PolicyFamily) -> StochasticPolicy {
    let sh = f.shape();
    let per_member: Vec<Vec<f64>> = class.members().iter().map(|pi| restricted_values(f, pi, class)).collect();
    let mut rows = Vec::with_capacity(sh.horizon * sh.n_states);
    for h in 0..sh.horizon {
        for x in 0..sh.n_states {
            let idx = h * sh.n_states + x;
            let mut best = 0;
            for (p, v) in per_member.iter().enumerate() {
                if v[idx] > per_member[best][idx] {
                    best = p;
                }
            }
            rows.push(class.members()[best].row(h, x).to_vec());
        }
    }
    StochasticPolicy::from_rows(sh.horizon, sh.n_states, sh.n_actions1, rows)
}

/// Level-`h` occupancies of `(π_f, ν_{π_f}^g)` for all `f, g ∈ F`.
pub fn occupancy_measures(
    game: &MarkovGame,
    family: &FiniteValueFamily,
    policies: &PolicyFamily,
    h: usize,
) -> Result<MeasureFamily> {
    let mut out = Vec::new();
    for f in family.members() {
        let pi = class_max_min_policy(f, policies);
        for g in family.members() {
            let nu = induced_best_response(g, &pi, Some(policies))?;
            out.push(occupancy(game, &pi, &nu, h)?);
        }
    }
    Ok(MeasureFamily { measures: dedup(out.into_iter()) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Decoupled,
    Coordinated,
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decoupled" => Ok(Variant::Decoupled),
            "coordinated" => Ok(Variant::Coordinated),
            t => Err(Error::Config(format!("variant must be decoupled or coordinated, got `{t}`"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Decoupled => "decoupled",
            Variant::Coordinated => "coordinated",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelDimension {
    pub level: usize,
    pub residuals: usize,
    pub dirac: EluderResult,
    /// Coordinated variant only.
    pub occupancy: Option<EluderResult>,
    pub occupancy_measures: usize,
    pub dimension: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EluderReport {
    pub eps: f64,
    pub mode: SearchMode,
    pub reading: ScaleReading,
    pub variant: Variant,
    pub levels: Vec<LevelDimension>,
    pub dimension: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct EluderSettings {
    pub mode: SearchMode,
    pub reading: ScaleReading,
    pub cap: usize,
    pub execution: Execution,
}

impl Default for EluderSettings {
    fn default() -> Self {
        EluderSettings {
            mode: SearchMode::Exact,
            reading: ScaleReading::Shared,
            cap: DEFAULT_MEASURE_CAP,
            execution: Execution::default(),
        }
    }
}

/// Max over levels of the Eluder dimension of the residual class. The
/// coordinated variant uses class-restricted residuals and takes the smaller
/// of the Dirac and occupancy-measure dimensions at each level.
pub fn minimax_eluder_dimension(
    game: &MarkovGame,
    family: &FiniteValueFamily,
    policies: Option<&PolicyFamily>,
    eps: f64,
    settings: EluderSettings,
) -> Result<EluderReport> {
    let sh = game.shape();
    let variant = if policies.is_some() { Variant::Coordinated } else { Variant::Decoupled };
    let dirac = MeasureFamily::dirac(sh.cells());
    let mut levels = Vec::with_capacity(sh.horizon);
    for h in 0..sh.horizon {
        let res = match policies {
            Some(p) => restricted_residuals(game, family, p, h)?,
            None => bellman_residuals(game, family, h)?,
        };
        let tables = res.distinct_tables();
        let dim = |m: &MeasureFamily| de_dimension(&tables, &m.measures, eps, settings.mode, settings.reading, settings.cap, settings.execution);
        let on_dirac = dim(&dirac)?;
        let (occ, n_occ) = match policies {
            Some(p) => {
                let m = occupancy_measures(game, family, p, h)?;
                (Some(dim(&m)?), m.len())
            }
            None => (None, 0),
        };
        let dimension = occ.as_ref().map_or(on_dirac.dimension, |o| o.dimension.min(on_dirac.dimension));
        levels.push(LevelDimension { level: h, residuals: tables.len(), dirac: on_dirac, occupancy: occ, occupancy_measures: n_occ, dimension });
    }
    let dimension = levels.iter().map(|l| l.dimension).max().unwrap_or(0);
    Ok(EluderReport { eps, mode: settings.mode, reading: settings.reading, variant, levels, dimension })
}

/// Violation of a membership assumption.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub member: Option<usize>,
    pub level: usize,
    pub policy: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// `Q*_h ∈ F_h` at every level.
    pub realizable: bool,
    pub realizability_violations: Vec<Violation>,
    /// `T_h f_{h+1} ∈ F_h` for every member and level.
    pub complete: bool,
    pub completeness_violations: Vec<Violation>,
    /// `Q^{π,ν_π} ∈ F` for every class member, checked levelwise.
    pub policy_realizable: Option<bool>,
    pub policy_realizability_violations: Vec<Violation>,
    /// `T^π_h f_{h+1} ∈ F_h` for every member, level and class member.
    pub policy_complete: Option<bool>,
    pub policy_completeness_violations: Vec<Violation>,
}

/// Dimension report with optional assumption checks, as written by the CLI.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub eluder: EluderReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub assumptions: Option<AssumptionReport>,
}

fn in_level(family: &FiniteValueFamily, h: usize, table: &[f64]) -> bool {
    family.members().iter().any(|m| m.level(h).iter().zip(table).all(|(a, b)| (a - b).abs() <= MEMBERSHIP_TOL))
}

/// Exact membership checks. `F_h` is the set of level-`h` tables of the
/// members.
pub fn check_assumptions(
    game: &MarkovGame,
    family: &FiniteValueFamily,
    policies: Option<&PolicyFamily>,
) -> Result<AssumptionReport> {
    family.check_game(game)?;
    let sh = game.shape();
    let sol = ne_value_iteration(game, DEFAULT_SOLVER_TOL)?;
    let realizability_violations: Vec<Violation> = (0..sh.horizon)
        .filter(|&h| !in_level(family, h, sol.q_star.level(h)))
        .map(|h| Violation { member: None, level: h, policy: None })
        .collect();
    let mut completeness_violations = Vec::new();
    for (i, f) in family.members().iter().enumerate() {
        for h in 0..sh.horizon {
            if !in_level(family, h, &bellman_backup(game, f, h, DEFAULT_SOLVER_TOL)?) {
                completeness_violations.push(Violation { member: Some(i), level: h, policy: None });
            }
        }
    }
    let (mut pr, mut pc) = (Vec::new(), Vec::new());
    if let Some(class) = policies {
        class.check_for(sh, Player::One)?;
        for (p, pi) in class.members().iter().enumerate() {
            let (nu, _) = restricted_best_response(game, pi, Player::One, class.members())?;
            let q = policy_q_function(game, pi, &nu)?.q;
            for h in 0..sh.horizon {
                if !in_level(family, h, q.level(h)) {
                    pr.push(Violation { member: None, level: h, policy: Some(p) });
                }
            }
            for (i, f) in family.members().iter().enumerate() {
                for h in 0..sh.horizon {
                    if !in_level(family, h, &restricted_backup(game, f, pi, class, h)) {
                        pc.push(Violation { member: Some(i), level: h, policy: Some(p) });
                    }
                }
            }
        }
    }
    Ok(AssumptionReport {
        realizable: realizability_violations.is_empty(),
        realizability_violations,
        complete: completeness_violations.is_empty(),
        completeness_violations,
        policy_realizable: policies.map(|_| pr.is_empty()),
        policy_realizability_violations: pr,
        policy_complete: policies.map(|_| pc.is_empty()),
        policy_completeness_violations: pc,
    })
}
