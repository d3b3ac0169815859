//! Hypothesis families and the policies a hypothesis induces.

mod files;
mod induced;
pub mod nested;

pub use files::{
    load_features, load_models, load_policies, load_tests, load_values, save_features, save_models, save_policies,
    save_tests, save_values,
};
pub use induced::{
    covering_log, hypothesis_ne_value, induced_best_response, induced_max_min_policy, restricted_stage_response,
    FamilyCover, SolvedHypothesis,
};

use crate::error::{Error, Result};
use crate::game::{MarkovGame, Player, QFunction, Shape, StochasticPolicy};

/// Default cardinality above which product expansion logs a warning.
pub const DEFAULT_PRODUCT_CAP: usize = 100_000;

/// Which truths a family member is known to equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TruthTags {
    /// Equals the game's `Q*`.
    #[serde(default)]
    pub qstar: bool,
    /// Equals `Q^{π,ν_π}` for these indices of a companion policy family.
    #[serde(default)]
    pub policy_values: Vec<usize>,
}

/// An explicit list of complete Q-tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteValueFamily {
    shape: Shape,
    members: Vec<QFunction>,
    tags: Vec<TruthTags>,
    tagged: bool,
}

impl FiniteValueFamily {
    pub fn new(members: Vec<QFunction>) -> Result<Self> {
        let n = members.len();
        Self::build(members, vec![TruthTags::default(); n], false)
    }

    pub fn with_tags(members: Vec<QFunction>, tags: Vec<TruthTags>) -> Result<Self> {
        Self::build(members, tags, true)
    }

    fn build(members: Vec<QFunction>, tags: Vec<TruthTags>, tagged: bool) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::Input("value family must be nonempty".into()))?;
        let shape = first.shape();
        if let Some(i) = members.iter().position(|m| m.shape() != shape) {
            return Err(Error::Shape(format!("member {i} has shape {:?}, member 0 has {shape:?}", members[i].shape())));
        }
        if tags.len() != members.len() {
            return Err(Error::Shape(format!("{} tags for {} members", tags.len(), members.len())));
        }
        Ok(FiniteValueFamily { shape, members, tags, tagged })
    }

    /// Expands per-step component lists into every tuple of the product
    /// `F_1 × ⋯ × F_H`. Components are level tables laid out `[x][a][b]`.
    pub fn from_product(shape: Shape, per_step: &[Vec<Vec<f64>>], cap: usize) -> Result<Self> {
        if per_step.len() != shape.horizon {
            return Err(Error::Shape(format!("{} step lists for horizon {}", per_step.len(), shape.horizon)));
        }
        for (h, comps) in per_step.iter().enumerate() {
            if comps.is_empty() {
                return Err(Error::Input(format!("step {h} has no components")));
            }
            if let Some(c) = comps.iter().find(|c| c.len() != shape.cells()) {
                return Err(Error::Shape(format!("step {h}: component has {} entries, expected {}", c.len(), shape.cells())));
            }
        }
        let total = per_step.iter().try_fold(1usize, |acc, c| acc.checked_mul(c.len()));
        match total {
            Some(n) if n > cap => log::warn!("product family has {n} members, above the cap of {cap}"),
            None => return Err(Error::Input("product family cardinality overflows".into())),
            _ => {}
        }
        let total = total.unwrap_or(0);
        let mut members = Vec::with_capacity(total);
        for mut idx in 0..total {
            let mut values = vec![0.0; shape.q_len()];
            // the last step varies fastest
            for h in (0..shape.horizon).rev() {
                let n = per_step[h].len();
                let c = &per_step[h][idx % n];
                idx /= n;
                values[h * shape.cells()..(h + 1) * shape.cells()].copy_from_slice(c);
            }
            members.push(QFunction::new(shape, values)?);
        }
        Self::new(members)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[QFunction] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &QFunction {
        &self.members[i]
    }

    pub fn tags(&self) -> &[TruthTags] {
        &self.tags
    }

    /// Whether truth tags were supplied (by a generator or a file).
    pub fn is_tagged(&self) -> bool {
        self.tagged
    }

    pub fn qstar_index(&self) -> Option<usize> {
        if !self.tagged {
            return None;
        }
        self.tags.iter().position(|t| t.qstar)
    }

    /// Index of the member tagged as `Q^{π_i, ν_{π_i}}`.
    pub fn policy_value_index(&self, policy: usize) -> Option<usize> {
        self.tags.iter().position(|t| t.policy_values.contains(&policy))
    }

    pub fn check_game(&self, game: &MarkovGame) -> Result<()> {
        if self.shape != game.shape() {
            return Err(Error::Shape(format!("family shape {:?} does not match game shape {:?}", self.shape, game.shape())));
        }
        Ok(())
    }

    /// Every member seen from player 2's side (see [`QFunction::swap_negate`]).
    pub fn swap_negate(&self) -> FiniteValueFamily {
        FiniteValueFamily {
            shape: self.shape.swapped(),
            members: self.members.iter().map(QFunction::swap_negate).collect(),
            tags: self.tags.clone(),
            tagged: self.tagged,
        }
    }
}

/// Feature map `φ_h(x, a, b) ∈ R^d` with `‖φ‖₂ ≤ 1` and parameter radius `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFeatures {
    shape: Shape,
    dim: usize,
    radius: f64,
    phi: Vec<f64>,
}

impl LinearFeatures {
    /// `phi` is laid out `[h][x][a][b][d]`. `radius` defaults to `√d`.
    pub fn new(shape: Shape, dim: usize, phi: Vec<f64>, radius: Option<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Input("feature dimension must be positive".into()));
        }
        if phi.len() != shape.q_len() * dim {
            return Err(Error::Shape(format!("features: expected {} entries, got {}", shape.q_len() * dim, phi.len())));
        }
        let f = LinearFeatures { shape, dim, radius: radius.unwrap_or((dim as f64).sqrt()), phi };
        for h in 0..shape.horizon {
            for c in 0..shape.cells() {
                let (x, a, b) = shape.decode_cell(c);
                let v = f.phi(h, x, a, b);
                let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
                if !norm.is_finite() || norm > 1.0 + 1e-12 {
                    return Err(Error::Input(format!("feature norm {norm} > 1 at (h={h}, x={x}, a={a}, b={b})")));
                }
            }
        }
        Ok(f)
    }

    /// One coordinate per `(x, a, b)` cell, shared across steps.
    pub fn one_hot(shape: Shape) -> Self {
        let d = shape.cells();
        let mut phi = vec![0.0; shape.q_len() * d];
        for h in 0..shape.horizon {
            for c in 0..d {
                phi[(h * d + c) * d + c] = 1.0;
            }
        }
        LinearFeatures { shape, dim: d, radius: (d as f64).sqrt(), phi }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn raw(&self) -> &[f64] {
        &self.phi
    }

    #[inline]
    pub fn phi(&self, h: usize, x: usize, a: usize, b: usize) -> &[f64] {
        let i = self.shape.q_index(h, x, a, b) * self.dim;
        &self.phi[i..i + self.dim]
    }

    /// Whether each step's features are distinct standard basis vectors,
    /// which makes every Gram matrix diagonal.
    pub fn is_one_hot(&self) -> bool {
        (0..self.shape.horizon).all(|h| {
            let mut seen = vec![false; self.dim];
            (0..self.shape.cells()).all(|c| {
                let (x, a, b) = self.shape.decode_cell(c);
                let v = self.phi(h, x, a, b);
                let ones: Vec<usize> = (0..self.dim).filter(|&i| v[i] == 1.0).collect();
                let zeros = v.iter().filter(|&&t| t == 0.0).count();
                if ones.len() == 1 && zeros == self.dim - 1 && !seen[ones[0]] {
                    seen[ones[0]] = true;
                    true
                } else {
                    false
                }
            })
        })
    }
}

/// A finite class of one player's policies.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyFamily {
    members: Vec<StochasticPolicy>,
}

impl PolicyFamily {
    pub fn new(members: Vec<StochasticPolicy>) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::Input("policy family must be nonempty".into()))?;
        let dims = (first.horizon(), first.n_states(), first.n_actions());
        if let Some(i) = members.iter().position(|m| (m.horizon(), m.n_states(), m.n_actions()) != dims) {
            return Err(Error::Shape(format!("policy {i} differs in shape from policy 0")));
        }
        Ok(PolicyFamily { members })
    }

    pub fn members(&self) -> &[StochasticPolicy] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn check_for(&self, shape: Shape, player: Player) -> Result<()> {
        self.members[0].check_for(shape, player)
    }

    /// `d(π, π') = max_h max_{f, x, b} |f_h(x, π, b) − f_h(x, π', b)|` over the
    /// members of `values`.
    pub fn distance(&self, i: usize, j: usize, values: &FiniteValueFamily) -> f64 {
        let (p, q) = (&self.members[i], &self.members[j]);
        let sh = values.shape();
        let mut d: f64 = 0.0;
        for f in values.members() {
            for h in 0..sh.horizon {
                for x in 0..sh.n_states {
                    for b in 0..sh.n_actions2 {
                        let diff: f64 = (0..sh.n_actions1).map(|a| (p.row(h, x)[a] - q.row(h, x)[a]) * f.get(h, x, a, b)).sum();
                        d = d.max(diff.abs());
                    }
                }
            }
        }
        d
    }
}

/// Candidate models sharing the true game's shape and initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFamily {
    members: Vec<MarkovGame>,
}

impl ModelFamily {
    pub fn new(members: Vec<MarkovGame>) -> Result<Self> {
        let first = members.first().ok_or_else(|| Error::Input("model family must be nonempty".into()))?;
        let key = (first.shape(), first.initial_state());
        if let Some(i) = members.iter().position(|m| (m.shape(), m.initial_state()) != key) {
            return Err(Error::Shape(format!("model {i} differs in shape or initial state from model 0")));
        }
        Ok(ModelFamily { members })
    }

    pub fn members(&self) -> &[MarkovGame] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Index of a member identical to `game`, if any.
    pub fn position_of(&self, game: &MarkovGame) -> Option<usize> {
        self.members.iter().position(|m| m == game)
    }
}

/// Bound on `‖g‖∞` for discriminators.
pub const TEST_FUNCTION_BOUND: f64 = 2.0;

/// Discriminator `g(x, a, b, r, x') = table_h[x][a][b][x'] + w · r`.
///
/// Because rewards are deterministic, the expectation under a model is the
/// exact finite sum `w · r^M(x,a,b) + Σ_{x'} P^M(x'|x,a,b) · table[x'] `.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub reward_weight: f64,
    /// `[h][x][a][b][x']`
    pub table: Vec<f64>,
}

impl TestFunction {
    #[inline]
    pub fn eval(&self, shape: Shape, h: usize, x: usize, a: usize, b: usize, r: f64, x_next: usize) -> f64 {
        self.table[shape.q_index(h, x, a, b) * shape.n_states + x_next] + self.reward_weight * r
    }

    /// `E_{(r, x') ∼ M}[g(x, a, b, r, x')]`.
    pub fn model_expectation(&self, model: &MarkovGame, h: usize, x: usize, a: usize, b: usize) -> f64 {
        let sh = model.shape();
        let i = sh.q_index(h, x, a, b) * sh.n_states;
        let tab = &self.table[i..i + sh.n_states];
        self.reward_weight * model.reward(h, x, a, b) + model.next_dist(h, x, a, b).iter().zip(tab).map(|(p, t)| p * t).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionFamily {
    shape: Shape,
    members: Vec<TestFunction>,
}

impl TestFunctionFamily {
    /// Validates shapes and `sup |g| ≤ 2` over rewards in `reward_range`.
    pub fn new(shape: Shape, reward_range: (f64, f64), members: Vec<TestFunction>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Input("test-function family must be nonempty".into()));
        }
        let rmax = reward_range.0.abs().max(reward_range.1.abs());
        for (i, g) in members.iter().enumerate() {
            if g.table.len() != shape.q_len() * shape.n_states {
                return Err(Error::Shape(format!("test function {i}: table has {} entries", g.table.len())));
            }
            let sup = g.table.iter().fold(0.0f64, |m, v| m.max(v.abs())) + g.reward_weight.abs() * rmax;
            if !sup.is_finite() || sup > TEST_FUNCTION_BOUND + 1e-12 {
                return Err(Error::Input(format!("test function {i} has sup norm {sup} > {TEST_FUNCTION_BOUND}")));
            }
        }
        Ok(TestFunctionFamily { shape, members })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn members(&self) -> &[TestFunction] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_expansion_enumerates_tuples() {
        let sh = Shape::new(2, 1, 1, 1);
        let fam = FiniteValueFamily::from_product(sh, &[vec![vec![1.0], vec![2.0]], vec![vec![10.0], vec![20.0], vec![30.0]]], 10)
            .unwrap();
        assert_eq!(fam.len(), 6);
        assert_eq!(fam.member(0).values(), &[1.0, 10.0]);
        assert_eq!(fam.member(1).values(), &[1.0, 20.0]);
        assert_eq!(fam.member(5).values(), &[2.0, 30.0]);
    }

    #[test]
    fn empty_families_rejected() {
        assert!(FiniteValueFamily::new(vec![]).is_err());
        assert!(PolicyFamily::new(vec![]).is_err());
        assert!(ModelFamily::new(vec![]).is_err());
    }

    #[test]
    fn one_hot_detection() {
        let sh = Shape::new(2, 2, 2, 1);
        assert!(LinearFeatures::one_hot(sh).is_one_hot());
        let phi = vec![0.6; sh.q_len() * 2];
        let f = LinearFeatures::new(sh, 2, phi, None).unwrap();
        assert!(!f.is_one_hot());
        assert!(LinearFeatures::new(sh, 2, vec![0.8; sh.q_len() * 2], None).is_err());
    }

    #[test]
    fn test_function_bound_checked() {
        let sh = Shape::new(1, 1, 1, 1);
        let ok = TestFunction { reward_weight: 1.0, table: vec![1.0] };
        assert!(TestFunctionFamily::new(sh, (-1.0, 1.0), vec![ok]).is_ok());
        let bad = TestFunction { reward_weight: 1.0, table: vec![1.5] };
        assert!(TestFunctionFamily::new(sh, (-1.0, 1.0), vec![bad]).is_err());
    }

    #[test]
    fn policy_metric_axioms() {
        let sh = Shape::new(2, 2, 3, 3);
        let pols = PolicyFamily::new(vec![
            StochasticPolicy::uniform(2, 2, 3),
            StochasticPolicy::pure(2, 2, 3, |h, x| (h + x) % 3),
            StochasticPolicy::pure(2, 2, 3, |_, _| 1),
        ])
        .unwrap();
        let vals = FiniteValueFamily::new(vec![
            QFunction::new(sh, (0..sh.q_len()).map(|i| ((i * 7) % 5) as f64 / 5.0).collect()).unwrap(),
            QFunction::new(sh, (0..sh.q_len()).map(|i| ((i * 3) % 4) as f64 / 4.0 - 0.5).collect()).unwrap(),
        ])
        .unwrap();
        for i in 0..3 {
            assert_eq!(pols.distance(i, i, &vals), 0.0);
            for j in 0..3 {
                assert_eq!(pols.distance(i, j, &vals), pols.distance(j, i, &vals));
                for k in 0..3 {
                    assert!(pols.distance(i, k, &vals) <= pols.distance(i, j, &vals) + pols.distance(j, k, &vals) + 1e-15);
                }
            }
        }
    }
}
