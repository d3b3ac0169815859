//! Experiment configuration (TOML).
//!
//! ```toml
//! algorithm = "onemg"          # onemg | linear | aome | aove
//! seeds = [0, 1, 2]
//! out = "onemg-demo"           # joined to $MGLAB_OUT when relative
//!
//! [game]
//! source = "generate"          # or source = "file", path = "game.json"
//! seed = 0
//! spec = { kind = "random", horizon = 3, states = 3, actions = 2 }
//!
//! [values]                     # onemg, aove
//! source = "realizable"        # or "decoys" { size, seed } or "file" { path }
//! decoys = 7
//! noise = 0.6
//! seed = 1
//!
//! [opponent]                   # onemg, linear
//! kind = "best-response"       # self-nash | fixed | schedule | cycle need `policies`
//!
//! [onemg]
//! episodes = 200
//! ```
//!
//! `aove` also reads `[policies]` and, for `role = "both"`, `[values_p2]`
//! (player 2's family in the original orientation; a `realizable` source is
//! generated on the swapped game). `aome` reads `[models]` and `[tests]`,
//! `linear` reads `[features]`. Relative paths resolve against the
//! directory of the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::generators::{decoy_family, indicator_tests, model_family, random_policies, realizable_family, GameSpec};
use crate::aome::AomeConfig;
use crate::aove::{AoveConfig, Role};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::game::{load_game, MarkovGame};
use crate::hypothesis::{
    load_features, load_models, load_policies, load_tests, load_values, FiniteValueFamily, LinearFeatures, ModelFamily,
    PolicyFamily, TestFunctionFamily,
};
use crate::linear::LinearConfig;
use crate::onemg::{Opponent, OnemgConfig};

/// Environment variable naming the root of all output directories.
pub const OUTPUT_ROOT_VAR: &str = "MGLAB_OUT";
pub const DEFAULT_OUTPUT_ROOT: &str = "mglab-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Onemg,
    Linear,
    Aome,
    Aove,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Onemg => "onemg",
            Algorithm::Linear => "linear",
            Algorithm::Aome => "aome",
            Algorithm::Aove => "aove",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GameSource {
    File { path: PathBuf },
    Generate { #[serde(default)] seed: u64, spec: GameSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ValueSource {
    File { path: PathBuf },
    /// Truths plus separated decoys; for `aove` the truths include the
    /// value of every class member against its restricted best response.
    Realizable { decoys: usize, noise: f64, #[serde(default)] seed: u64 },
    Decoys { size: usize, #[serde(default)] seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySource {
    File { path: PathBuf },
    Random { count: usize, #[serde(default)] pure: usize, #[serde(default)] seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelSource {
    File { path: PathBuf },
    /// The true game first, then perturbed copies.
    Generate { decoys: usize, noise: f64, #[serde(default)] seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TestSource {
    File { path: PathBuf },
    Indicators,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FeatureSource {
    File { path: PathBuf },
    OneHot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpponentConfig {
    pub kind: String,
    #[serde(default)]
    pub policies: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Parallelism across seeds.
    #[serde(default)]
    pub execution: Execution,
    pub game: GameSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<ValueSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values_p2: Option<ValueSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policies: Option<PolicySource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<ModelSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tests: Option<TestSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opponent: Option<OpponentConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub onemg: Option<OnemgConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<LinearConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aome: Option<AomeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aove: Option<AoveConfig>,
}

fn missing(what: &str, algo: Algorithm) -> Error {
    Error::Config(format!("algorithm `{}` needs a [{what}] section", algo.name()))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config, resolving relative paths against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.algorithm;
        if self.seeds.is_empty() {
            return Err(Error::Config("`seeds` must list at least one seed".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::Config("`seeds` contains duplicates".into()));
        }
        match a {
            Algorithm::Onemg => {
                self.values.as_ref().ok_or_else(|| missing("values", a))?;
                self.onemg.as_ref().ok_or_else(|| missing("onemg", a))?;
            }
            Algorithm::Linear => {
                self.features.as_ref().ok_or_else(|| missing("features", a))?;
                self.linear.as_ref().ok_or_else(|| missing("linear", a))?;
            }
            Algorithm::Aome => {
                self.models.as_ref().ok_or_else(|| missing("models", a))?;
                self.tests.as_ref().ok_or_else(|| missing("tests", a))?;
                self.aome.as_ref().ok_or_else(|| missing("aome", a))?;
            }
            Algorithm::Aove => {
                self.values.as_ref().ok_or_else(|| missing("values", a))?;
                self.policies.as_ref().ok_or_else(|| missing("policies", a))?;
                let cfg = self.aove.as_ref().ok_or_else(|| missing("aove", a))?;
                if cfg.role == Role::Both && self.values_p2.is_none() {
                    return Err(Error::Config("aove role `both` needs a [values_p2] section".into()));
                }
            }
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let GameSource::File { path } = &mut self.game {
            fix(path);
        }
        for v in [&mut self.values, &mut self.values_p2].into_iter().flatten() {
            if let ValueSource::File { path } = v {
                fix(path);
            }
        }
        if let Some(PolicySource::File { path }) = &mut self.policies {
            fix(path);
        }
        if let Some(ModelSource::File { path }) = &mut self.models {
            fix(path);
        }
        if let Some(TestSource::File { path }) = &mut self.tests {
            fix(path);
        }
        if let Some(FeatureSource::File { path }) = &mut self.features {
            fix(path);
        }
        if let Some(OpponentConfig { policies: Some(path), .. }) = &mut self.opponent {
            fix(path);
        }
    }
}

/// Output directory: `explicit`, else the config's `out`, joined to the
/// root from [`OUTPUT_ROOT_VAR`] when relative.
pub fn output_dir(explicit: Option<&Path>, configured: Option<&Path>, default_name: &str) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    let root = std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT), PathBuf::from);
    match configured {
        Some(p) if p.is_absolute() => p.to_path_buf(),
        Some(p) => root.join(p),
        None => root.join(default_name),
    }
}

/// Everything a run needs, built once per sweep.
#[derive(Debug, Clone)]
pub struct Instance {
    pub game: MarkovGame,
    pub values: Option<FiniteValueFamily>,
    pub values_p2: Option<FiniteValueFamily>,
    pub policies: Option<PolicyFamily>,
    pub models: Option<ModelFamily>,
    pub tests: Option<TestFunctionFamily>,
    pub features: Option<LinearFeatures>,
    pub opponent: Opponent,
}

fn build_values(src: &ValueSource, game: &MarkovGame, policies: Option<&PolicyFamily>) -> Result<FiniteValueFamily> {
    match src {
        ValueSource::File { path } => load_values(path),
        ValueSource::Realizable { decoys, noise, seed } => realizable_family(game, policies, *decoys, *noise, *seed),
        ValueSource::Decoys { size, seed } => decoy_family(game, *size, *seed),
    }
}

impl Instance {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let game = match &cfg.game {
            GameSource::File { path } => load_game(path)?,
            GameSource::Generate { seed, spec } => spec.generate(*seed)?,
        };
        let sh = game.shape();
        let policies = match &cfg.policies {
            None => None,
            Some(PolicySource::File { path }) => Some(load_policies(path)?),
            Some(PolicySource::Random { count, pure, seed }) => {
                Some(random_policies(sh.horizon, sh.n_states, sh.n_actions1, *count, *pure, *seed)?)
            }
        };
        let class = if cfg.algorithm == Algorithm::Aove { policies.as_ref() } else { None };
        let values = cfg.values.as_ref().map(|v| build_values(v, &game, class)).transpose()?;
        let values_p2 = match &cfg.values_p2 {
            None => None,
            Some(ValueSource::File { path }) => Some(load_values(path)?),
            Some(src) => Some(build_values(src, &game.swap_negate(), class)?.swap_negate()),
        };
        let models = match &cfg.models {
            None => None,
            Some(ModelSource::File { path }) => Some(load_models(path)?),
            Some(ModelSource::Generate { decoys, noise, seed }) => Some(model_family(&game, *decoys, *noise, *seed)?),
        };
        let tests = match &cfg.tests {
            None => None,
            Some(TestSource::File { path }) => Some(load_tests(path)?),
            Some(TestSource::Indicators) => Some(indicator_tests(sh, game.reward_range())?),
        };
        let features = match &cfg.features {
            None => None,
            Some(FeatureSource::File { path }) => Some(load_features(path)?),
            Some(FeatureSource::OneHot) => Some(LinearFeatures::one_hot(sh)),
        };
        let opponent = match &cfg.opponent {
            None => Opponent::BestResponse,
            Some(o) => {
                let pols = match &o.policies {
                    Some(p) => load_policies(p)?.members().to_vec(),
                    None => Vec::new(),
                };
                Opponent::from_parts(&o.kind, pols)?
            }
        };
        opponent.check(&game)?;
        Ok(Instance { game, values, values_p2, policies, models, tests, features, opponent })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONEMG: &str = r#"
algorithm = "onemg"
seeds = [0, 1]

[game]
source = "generate"
spec = { kind = "random", horizon = 2, states = 2, actions = 2 }

[values]
source = "realizable"
decoys = 3
noise = 0.5

[onemg]
episodes = 5
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = ExperimentConfig::parse(ONEMG).unwrap();
        assert_eq!(cfg.algorithm, Algorithm::Onemg);
        let inst = Instance::build(&cfg).unwrap();
        assert_eq!(inst.values.unwrap().len(), 4);
        assert_eq!(inst.opponent, Opponent::BestResponse);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::parse(ONEMG).unwrap();
        assert_eq!(ExperimentConfig::parse(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_missing_sections() {
        let bad = ONEMG.replace("seeds = [0, 1]", "seeds = [0, 1]\ncolour = 3");
        assert!(ExperimentConfig::parse(&bad).is_err());
        let bad = ONEMG.replace("decoys = 3", "decoys = 3\nextra = 1");
        assert!(ExperimentConfig::parse(&bad).is_err());
        let bad = ONEMG.replace("episodes = 5", "episodes = 5\nbogus = true");
        assert!(ExperimentConfig::parse(&bad).is_err());
        let bad = ONEMG.replace("[onemg]\nepisodes = 5", "");
        assert!(ExperimentConfig::parse(&bad).unwrap_err().to_string().contains("[onemg]"));
        assert!(ExperimentConfig::parse(&ONEMG.replace("[0, 1]", "[]")).is_err());
        assert!(ExperimentConfig::parse(&ONEMG.replace("[0, 1]", "[1, 1]")).is_err());
    }

    #[test]
    fn output_dir_precedence() {
        let explicit = Path::new("/tmp/x");
        assert_eq!(output_dir(Some(explicit), Some(Path::new("y")), "z"), explicit);
        assert_eq!(output_dir(None, Some(Path::new("/abs")), "z"), Path::new("/abs"));
    }
}
