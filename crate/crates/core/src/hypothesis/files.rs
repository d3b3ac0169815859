//! Definition files for families. All use JSON with nested dense arrays in
//! the same layout as game files.
//!
//! * values: `{horizon, states, actions1, actions2, members: [{values: H×S×A1×A2, tags?}]}`
//! * features: `{horizon, states, actions1, actions2, dim, radius?, features: H×S×A1×A2×d}`
//! * policies: `{horizon, states, actions, members: [H×S×A]}`
//! * models: `{members: [<game file>]}`
//! * tests: `{horizon, states, actions1, actions2, reward_range?, members: [{reward_weight, table: H×S×A1×A2×S}]}`

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::nested::{flatten3, flatten4, flatten5, nest3, nest4, nest5, N3, N4, N5};
use super::{FiniteValueFamily, LinearFeatures, ModelFamily, PolicyFamily, TestFunction, TestFunctionFamily, TruthTags};
use crate::error::Result;
use crate::fileio::{read_json, write_json};
use crate::game::{GameFile, QFunction, Shape, StochasticPolicy};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValueMember {
    values: N4,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tags: Option<TruthTags>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValuesFile {
    horizon: usize,
    states: usize,
    actions1: usize,
    actions2: usize,
    members: Vec<ValueMember>,
}

fn dims4(sh: Shape) -> [usize; 4] {
    [sh.horizon, sh.n_states, sh.n_actions1, sh.n_actions2]
}

pub fn load_values(path: impl AsRef<Path>) -> Result<FiniteValueFamily> {
    let f: ValuesFile = read_json(path)?;
    let sh = Shape::new(f.horizon, f.states, f.actions1, f.actions2);
    sh.validate()?;
    let tagged = f.members.iter().any(|m| m.tags.is_some());
    let mut members = Vec::with_capacity(f.members.len());
    let mut tags = Vec::with_capacity(f.members.len());
    for (i, m) in f.members.into_iter().enumerate() {
        members.push(QFunction::new(sh, flatten4(&format!("members[{i}].values"), &m.values, dims4(sh))?)?);
        tags.push(m.tags.unwrap_or_default());
    }
    if tagged {
        FiniteValueFamily::with_tags(members, tags)
    } else {
        FiniteValueFamily::new(members)
    }
}

pub fn save_values(path: impl AsRef<Path>, family: &FiniteValueFamily) -> Result<()> {
    let sh = family.shape();
    let members = family
        .members()
        .iter()
        .zip(family.tags())
        .map(|(q, t)| ValueMember { values: nest4(q.values(), dims4(sh)), tags: family.is_tagged().then(|| t.clone()) })
        .collect();
    let f = ValuesFile { horizon: sh.horizon, states: sh.n_states, actions1: sh.n_actions1, actions2: sh.n_actions2, members };
    write_json(path, &f)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeaturesFile {
    horizon: usize,
    states: usize,
    actions1: usize,
    actions2: usize,
    dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
    features: N5,
}

pub fn load_features(path: impl AsRef<Path>) -> Result<LinearFeatures> {
    let f: FeaturesFile = read_json(path)?;
    let sh = Shape::new(f.horizon, f.states, f.actions1, f.actions2);
    sh.validate()?;
    let phi = flatten5("features", &f.features, [sh.horizon, sh.n_states, sh.n_actions1, sh.n_actions2, f.dim])?;
    LinearFeatures::new(sh, f.dim, phi, f.radius)
}

pub fn save_features(path: impl AsRef<Path>, features: &LinearFeatures) -> Result<()> {
    let sh = features.shape();
    let d = features.dim();
    let f = FeaturesFile {
        horizon: sh.horizon,
        states: sh.n_states,
        actions1: sh.n_actions1,
        actions2: sh.n_actions2,
        dim: d,
        radius: Some(features.radius()),
        features: nest5(features.raw(), [sh.horizon, sh.n_states, sh.n_actions1, sh.n_actions2, d]),
    };
    write_json(path, &f)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoliciesFile {
    horizon: usize,
    states: usize,
    actions: usize,
    members: Vec<N3>,
}

pub fn load_policies(path: impl AsRef<Path>) -> Result<PolicyFamily> {
    let f: PoliciesFile = read_json(path)?;
    let d = [f.horizon, f.states, f.actions];
    let members = f
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| StochasticPolicy::new(f.horizon, f.states, f.actions, flatten3(&format!("members[{i}]"), m, d)?))
        .collect::<Result<Vec<_>>>()?;
    PolicyFamily::new(members)
}

pub fn save_policies(path: impl AsRef<Path>, family: &PolicyFamily) -> Result<()> {
    let p0 = &family.members()[0];
    let d = [p0.horizon(), p0.n_states(), p0.n_actions()];
    let f = PoliciesFile {
        horizon: d[0],
        states: d[1],
        actions: d[2],
        members: family.members().iter().map(|p| nest3(p.probs(), d)).collect(),
    };
    write_json(path, &f)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelsFile {
    members: Vec<GameFile>,
}

pub fn load_models(path: impl AsRef<Path>) -> Result<ModelFamily> {
    let f: ModelsFile = read_json(path)?;
    ModelFamily::new(f.members.into_iter().map(GameFile::into_game).collect::<Result<Vec<_>>>()?)
}

pub fn save_models(path: impl AsRef<Path>, family: &ModelFamily) -> Result<()> {
    write_json(path, &ModelsFile { members: family.members().iter().map(GameFile::from_game).collect() })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestMember {
    reward_weight: f64,
    table: N5,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestsFile {
    horizon: usize,
    states: usize,
    actions1: usize,
    actions2: usize,
    #[serde(default = "default_range")]
    reward_range: [f64; 2],
    members: Vec<TestMember>,
}

fn default_range() -> [f64; 2] {
    [-1.0, 1.0]
}

pub fn load_tests(path: impl AsRef<Path>) -> Result<TestFunctionFamily> {
    let f: TestsFile = read_json(path)?;
    let sh = Shape::new(f.horizon, f.states, f.actions1, f.actions2);
    sh.validate()?;
    let d = [sh.horizon, sh.n_states, sh.n_actions1, sh.n_actions2, sh.n_states];
    let members = f
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| Ok(TestFunction { reward_weight: m.reward_weight, table: flatten5(&format!("members[{i}].table"), &m.table, d)? }))
        .collect::<Result<Vec<_>>>()?;
    TestFunctionFamily::new(sh, (f.reward_range[0], f.reward_range[1]), members)
}

pub fn save_tests(path: impl AsRef<Path>, family: &TestFunctionFamily, reward_range: (f64, f64)) -> Result<()> {
    let sh = family.shape();
    let d = [sh.horizon, sh.n_states, sh.n_actions1, sh.n_actions2, sh.n_states];
    let f = TestsFile {
        horizon: sh.horizon,
        states: sh.n_states,
        actions1: sh.n_actions1,
        actions2: sh.n_actions2,
        reward_range: [reward_range.0, reward_range.1],
        members: family.members().iter().map(|g| TestMember { reward_weight: g.reward_weight, table: nest5(&g.table, d) }).collect(),
    };
    write_json(path, &f)
}
