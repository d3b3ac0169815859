use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mglab::aome::{AomeConfig, Phi, SuccessorLevel};
use mglab::aove::{AoveConfig, Role};
use mglab::complexity::{check_assumptions, ComplexityReport, minimax_eluder_dimension, EluderSettings, ScaleReading, SearchMode, Variant};
use mglab::fileio::{to_json_string, write_json};
use mglab::game::{load_game, ne_value_iteration, save_game, save_solution, SolutionFile};
use mglab::harness::config::{
    Algorithm, ExperimentConfig, FeatureSource, GameSource, ModelSource, OpponentConfig, PolicySource, TestSource,
    ValueSource,
};
use mglab::harness::generators::{
    decoy_family, indicator_tests, model_family, random_policies, realizable_family, GameSpec,
};
use mglab::harness::sweep::describe;
use mglab::harness::{audit_dir, output_dir, run_sweep};
use mglab::hypothesis::{load_policies, load_values, save_features, save_models, save_policies, save_tests, save_values, LinearFeatures};
use mglab::linear::{LinearConfig, PlanMode};
use mglab::onemg::{Beta, OnemgConfig};
use mglab::Execution;

#[derive(Parser)]
#[command(name = "mglab", version, about = "Learning and solving two-player zero-sum episodic Markov games")]
struct Cli {
    /// Run seeds and inner loops serially.
    #[arg(long, global = true)]
    serial: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a game exactly by backward induction.
    SolveNe {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Write the solution as JSON here instead of printing a digest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimistic value elimination against an opponent.
    RunOnemg(OnemgArgs),
    /// Optimistic least-squares planning with linear features.
    RunLinear(LinearArgs),
    /// Model elimination with alternate optimism.
    RunAome(AomeArgs),
    /// Value elimination over policy/hypothesis pairs.
    RunAove(AoveArgs),
    /// Minimax Eluder dimension of a finite family.
    EluderDim(EluderArgs),
    /// Write games and families.
    Generate {
        #[command(subcommand)]
        what: Generate,
    },
    /// Run every seed of an experiment config.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute the per-run CSVs of an output directory and diff them.
    Audit {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    game: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (default: $MGLAB_OUT/<algorithm>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OpponentArgs {
    /// best-response, self-nash, fixed, schedule or cycle.
    #[arg(long, default_value = "best-response")]
    opponent: String,
    /// Policy file for fixed and scheduled opponents.
    #[arg(long)]
    opponent_policies: Option<PathBuf>,
}

#[derive(Args)]
struct OnemgArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    values: PathBuf,
    #[arg(long)]
    episodes: usize,
    /// `auto`, `inf` or a number.
    #[arg(long, default_value = "auto")]
    beta: Beta,
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    #[arg(long, default_value_t = 0.05)]
    p: f64,
    /// Check the per-step regret decomposition on every episode.
    #[arg(long)]
    audit: bool,
    #[command(flatten)]
    opponent: OpponentArgs,
}

#[derive(Args)]
struct LinearArgs {
    #[command(flatten)]
    common: Common,
    /// Feature file; one-hot features when omitted.
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long)]
    episodes: usize,
    /// diag-exact or search.
    #[arg(long, default_value = "diag-exact")]
    mode: PlanMode,
    #[arg(long, default_value_t = 1.0)]
    c_beta: f64,
    #[arg(long, default_value_t = 1.0)]
    c_width: f64,
    #[arg(long, default_value_t = 0.05)]
    p: f64,
    #[command(flatten)]
    opponent: OpponentArgs,
}

#[derive(Args)]
struct AomeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    models: PathBuf,
    /// Test-function file; reward and indicator tests when omitted.
    #[arg(long)]
    tests: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 500)]
    n1: usize,
    #[arg(long, default_value_t = 500)]
    n: usize,
    /// `auto`, `theory` or a number.
    #[arg(long, default_value = "auto")]
    phi: Phi,
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    #[arg(long, default_value_t = 50)]
    max_rounds: usize,
    /// Successor level in the Bellman error: next or same.
    #[arg(long, default_value = "next")]
    successor: String,
}

#[derive(Args)]
struct AoveArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    policies: PathBuf,
    #[arg(long)]
    values: PathBuf,
    /// Player 2's family in the original orientation (role `both`).
    #[arg(long)]
    values_p2: Option<PathBuf>,
    #[arg(long)]
    episodes: usize,
    #[arg(long, default_value = "auto")]
    beta: Beta,
    #[arg(long, default_value = "p1")]
    role: Role,
}

#[derive(Args)]
struct EluderArgs {
    #[arg(long)]
    game: PathBuf,
    #[arg(long)]
    family: PathBuf,
    /// Policy class; required by the coordinated variant.
    #[arg(long)]
    policies: Option<PathBuf>,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value = "decoupled")]
    variant: Variant,
    #[arg(long, default_value = "exact")]
    mode: SearchMode,
    /// Let every element pick its own scale.
    #[arg(long)]
    per_step: bool,
    #[arg(long, default_value_t = mglab::complexity::DEFAULT_MEASURE_CAP)]
    cap: usize,
    /// Also report the realizability and completeness checks.
    #[arg(long)]
    assumptions: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Generate {
    /// A game from a built-in family.
    Game {
        /// random, matching-pennies-chain or turn-based.
        #[arg(long, default_value = "random")]
        kind: String,
        #[arg(long)]
        horizon: usize,
        #[arg(long)]
        states: usize,
        #[arg(long, default_value_t = 2)]
        actions: usize,
        #[arg(long, default_value_t = 0.0)]
        sparsity: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// A tagged value family: truths plus separated decoys.
    Values {
        #[arg(long)]
        game: PathBuf,
        #[arg(long, default_value_t = 0)]
        decoys: usize,
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
        /// Also insert the value of each class member against its best
        /// response in the class.
        #[arg(long)]
        policies: Option<PathBuf>,
        /// Generate player 2's family (via the swapped game).
        #[arg(long)]
        player2: bool,
        /// Random tables only, without the truths.
        #[arg(long)]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random policies for player 1.
    Policies {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        count: usize,
        /// How many of them are deterministic.
        #[arg(long, default_value_t = 0)]
        pure: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// The game followed by perturbed copies.
    Models {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        decoys: usize,
        #[arg(long, default_value_t = 0.5)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reward and indicator test functions.
    Tests {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// One-hot features.
    Features {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Prints to stdout, treating a closed pipe as success.
fn emit(text: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn execution(serial: bool) -> Execution {
    if serial {
        Execution::Serial
    } else {
        Execution::Parallel
    }
}

fn file(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}

fn base_config(algorithm: Algorithm, common: &Common, exec: Execution) -> ExperimentConfig {
    ExperimentConfig {
        algorithm,
        seeds: vec![common.seed],
        out: None,
        execution: exec,
        game: GameSource::File { path: file(&common.game) },
        values: None,
        values_p2: None,
        policies: None,
        models: None,
        tests: None,
        features: None,
        opponent: None,
        onemg: None,
        linear: None,
        aome: None,
        aove: None,
    }
}

fn opponent(o: &OpponentArgs) -> Option<OpponentConfig> {
    Some(OpponentConfig { kind: o.opponent.clone(), policies: o.opponent_policies.as_deref().map(file) })
}

fn sweep(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExitCode> {
    let dir = output_dir(out, cfg.out.as_deref(), cfg.algorithm.name());
    let summary = run_sweep(cfg, &dir)?;
    print!("{}", describe(&summary));
    println!("wrote {}", dir.display());
    if summary.passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} hard failures, {} failed seeds", summary.hard_failures, summary.errors);
        Ok(ExitCode::from(2))
    }
}

fn generate(what: Generate) -> Result<()> {
    match what {
        Generate::Game { kind, horizon, states, actions, sparsity, seed, out } => {
            let spec = match kind.as_str() {
                "random" => GameSpec::Random { horizon, states, actions, sparsity },
                "matching-pennies-chain" => GameSpec::MatchingPenniesChain { horizon, states },
                "turn-based" => GameSpec::TurnBased { horizon, states, actions },
                other => bail!("unknown game kind `{other}`"),
            };
            save_game(&out, &spec.generate(seed)?)?;
        }
        Generate::Values { game, decoys, noise, policies, player2, random, seed, out } => {
            let mut g = load_game(&game)?;
            if player2 {
                g = g.swap_negate();
            }
            let class = policies.map(load_policies).transpose()?;
            let mut fam = match random {
                Some(n) => decoy_family(&g, n, seed)?,
                None => realizable_family(&g, class.as_ref(), decoys, noise, seed)?,
            };
            if player2 {
                fam = fam.swap_negate();
            }
            save_values(&out, &fam)?;
        }
        Generate::Policies { game, count, pure, seed, out } => {
            let sh = load_game(&game)?.shape();
            save_policies(&out, &random_policies(sh.horizon, sh.n_states, sh.n_actions1, count, pure, seed)?)?;
        }
        Generate::Models { game, decoys, noise, seed, out } => {
            save_models(&out, &model_family(&load_game(&game)?, decoys, noise, seed)?)?;
        }
        Generate::Tests { game, out } => {
            let g = load_game(&game)?;
            save_tests(&out, &indicator_tests(g.shape(), g.reward_range())?, g.reward_range())?;
        }
        Generate::Features { game, out } => {
            save_features(&out, &LinearFeatures::one_hot(load_game(&game)?.shape()))?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let exec = execution(cli.serial);
    match cli.command {
        Command::SolveNe { game, tol, out } => {
            let g = load_game(&game)?;
            let sol = ne_value_iteration(&g, tol)?;
            match out {
                Some(p) => {
                    save_solution(&p, &sol)?;
                    println!("V* = {:.10}; wrote {}", sol.value(), p.display());
                }
                None => emit(&to_json_string(&SolutionFile::from_solution(&sol))?),
            }
        }
        Command::RunOnemg(a) => {
            let mut cfg = base_config(Algorithm::Onemg, &a.common, exec);
            cfg.values = Some(ValueSource::File { path: file(&a.values) });
            cfg.opponent = opponent(&a.opponent);
            cfg.onemg = Some(OnemgConfig { beta: a.beta, c: a.c, p: a.p, audit: a.audit, execution: exec, ..OnemgConfig::new(a.episodes, a.common.seed) });
            return sweep(&cfg, a.common.out.as_deref());
        }
        Command::RunLinear(a) => {
            let mut cfg = base_config(Algorithm::Linear, &a.common, exec);
            cfg.features = Some(match &a.features {
                Some(p) => FeatureSource::File { path: file(p) },
                None => FeatureSource::OneHot,
            });
            cfg.opponent = opponent(&a.opponent);
            cfg.linear = Some(LinearConfig {
                mode: a.mode,
                c_beta: a.c_beta,
                c_width: a.c_width,
                p: a.p,
                execution: exec,
                ..LinearConfig::new(a.episodes, a.common.seed)
            });
            return sweep(&cfg, a.common.out.as_deref());
        }
        Command::RunAome(a) => {
            let successor = match a.successor.as_str() {
                "next" => SuccessorLevel::Next,
                "same" => SuccessorLevel::Same,
                other => bail!("successor must be next or same, got `{other}`"),
            };
            let mut cfg = base_config(Algorithm::Aome, &a.common, exec);
            cfg.models = Some(ModelSource::File { path: file(&a.models) });
            cfg.tests = Some(match &a.tests {
                Some(p) => TestSource::File { path: file(p) },
                None => TestSource::Indicators,
            });
            cfg.aome = Some(AomeConfig {
                epsilon: a.epsilon,
                n1: a.n1,
                n: a.n,
                phi: a.phi,
                kappa: a.kappa,
                max_rounds: a.max_rounds,
                successor_level: successor,
                execution: exec,
                ..AomeConfig::new(a.common.seed)
            });
            return sweep(&cfg, a.common.out.as_deref());
        }
        Command::RunAove(a) => {
            let mut cfg = base_config(Algorithm::Aove, &a.common, exec);
            cfg.policies = Some(PolicySource::File { path: file(&a.policies) });
            cfg.values = Some(ValueSource::File { path: file(&a.values) });
            cfg.values_p2 = a.values_p2.as_deref().map(|p| ValueSource::File { path: file(p) });
            cfg.aove = Some(AoveConfig { beta: a.beta, role: a.role, execution: exec, ..AoveConfig::new(a.episodes, a.common.seed) });
            cfg.validate()?;
            return sweep(&cfg, a.common.out.as_deref());
        }
        Command::EluderDim(a) => {
            let g = load_game(&a.game)?;
            let fam = load_values(&a.family)?;
            let pols = a.policies.as_ref().map(load_policies).transpose()?;
            if a.variant == Variant::Coordinated && pols.is_none() {
                bail!("the coordinated variant needs --policies");
            }
            let class = if a.variant == Variant::Coordinated { pols.as_ref() } else { None };
            let settings = EluderSettings {
                mode: a.mode,
                reading: if a.per_step { ScaleReading::PerStep } else { ScaleReading::Shared },
                cap: a.cap,
                execution: exec,
            };
            let report = minimax_eluder_dimension(&g, &fam, class, a.eps, settings)?;
            let assumptions = if a.assumptions { Some(check_assumptions(&g, &fam, pols.as_ref())?) } else { None };
            let out = ComplexityReport { eluder: report, assumptions };
            match &a.out {
                Some(p) => {
                    write_json(p, &out)?;
                    println!("dimension {}; wrote {}", out.eluder.dimension, p.display());
                }
                None => emit(&to_json_string(&out)?),
            }
        }
        Command::Generate { what } => generate(what)?,
        Command::Sweep { config, out } => {
            let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if cli.serial {
                cfg.execution = Execution::Serial;
            }
            return sweep(&cfg, out.as_deref());
        }
        Command::Audit { dir } => {
            let report = audit_dir(&dir)?;
            for e in &report.entries {
                match e.first_difference {
                    None => println!("ok    {} ({})", e.file, e.how),
                    Some(l) => println!("DIFF  {} at line {l} ({})", e.file, e.how),
                }
            }
            if !report.passed() {
                return Ok(ExitCode::from(2));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
