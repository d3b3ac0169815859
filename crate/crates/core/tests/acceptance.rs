//! Acceptance suite: one test and one report line per criterion.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture
//! --test-threads 1` to see the report in order.

use std::fs;
use std::path::Path;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use rand::Rng;

use mglab::aome::{run_aome, simulation_lemma_residual, AomeConfig};
use mglab::aove::{run_aove, AoveConfig, Role};
use mglab::complexity::{
    de_dimension, minimax_eluder_dimension, verify_witness, EluderSettings, ScaleReading, SearchMode,
};
use mglab::exec::{map_range, Execution};
use mglab::game::{
    best_response_value_iteration, exploitability, ne_value_iteration, solve_matrix_game, Matrix, MarkovGame, Player, Shape,
    StochasticPolicy, DEFAULT_SOLVER_TOL,
};
use mglab::harness::generators::{
    decoy_family, indicator_tests, model_family, random_game, random_policies, realizable_family,
};
use mglab::harness::stats::{mean_trace, sublinearity_test};
use mglab::harness::{run_sweep, ExperimentConfig};
use mglab::hypothesis::{hypothesis_ne_value, FiniteValueFamily, LinearFeatures};
use mglab::linear::{run_linear, LinearConfig};
use mglab::onemg::{fixed_policy_regret, run as run_onemg, Opponent, OnemgConfig};
use mglab::rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(elapsed: Duration, limit_s: u64) -> bool {
    elapsed <= Duration::from_secs(limit_s)
}

// ---------------------------------------------------------------------------
// 1. matrix games

/// `max_t min_j (c_j + t d_j)` over `t ∈ [0, r]`: the minimum of lines is
/// concave, so its maximum sits at an endpoint or a pairwise crossing.
fn max_min_lines(c: &[f64], d: &[f64], r: f64) -> f64 {
    let eval = |t: f64| c.iter().zip(d).map(|(c, d)| c + t * d).fold(f64::INFINITY, f64::min);
    let mut best = eval(0.0).max(eval(r));
    for i in 0..c.len() {
        for j in i + 1..c.len() {
            let dd = d[i] - d[j];
            if dd.abs() > 1e-15 {
                let t = (c[j] - c[i]) / dd;
                if t > 0.0 && t < r {
                    best = best.max(eval(t));
                }
            }
        }
    }
    best
}

/// Row player's max-min by brute force for up to four rows: a grid of step
/// `1/n` over all but the last two rows, and an exact search over the split
/// of the remaining mass between them.
fn grid_value(m: &Matrix, n: usize) -> f64 {
    let (rows, cols) = (m.rows(), m.cols());
    assert!(rows <= 4 && cols <= 4);
    if rows == 1 {
        return m.row(0).iter().copied().fold(f64::INFINITY, f64::min);
    }
    let step = 1.0 / n as f64;
    let (k0_max, k1_max) = match rows {
        2 => (0, 0),
        3 => (n, 0),
        _ => (n, n),
    };
    let (lo, hi) = (rows - 2, rows - 1);
    let mut d = [0.0; 4];
    for j in 0..cols {
        d[j] = m.get(hi, j) - m.get(lo, j);
    }
    let mut best = f64::NEG_INFINITY;
    let mut c = [0.0; 4];
    for k0 in 0..=k0_max {
        for k1 in 0..=k1_max.min(n - k0) {
            let (p0, p1) = (k0 as f64 * step, k1 as f64 * step);
            let r = (n - k0 - k1) as f64 * step;
            for j in 0..cols {
                let head = if rows > 2 { p0 * m.get(0, j) } else { 0.0 } + if rows > 3 { p1 * m.get(1, j) } else { 0.0 };
                c[j] = head + r * m.get(lo, j);
            }
            best = best.max(max_min_lines(&c[..cols], &d[..cols], r));
        }
    }
    best
}

fn matrix_solver() -> Outcome {
    let start = Instant::now();
    let mut g = rng::stream(11, &[rng::label("acceptance-matrices")]);
    let (mut worst_oracle, mut worst_expl, mut worst_dual) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..200 {
        let rows = g.random_range(1..=4);
        let cols = g.random_range(1..=4);
        // entries in [0, 1] keep the grid error of the oracle below its step
        let data: Vec<f64> = (0..rows * cols).map(|_| g.random_range(0.0..=1.0)).collect();
        let m = Matrix::new(rows, cols, data).unwrap();
        let s = solve_matrix_game(&m, 1e-9).unwrap();
        worst_oracle = worst_oracle.max((s.value - grid_value(&m, 1000)).abs());
        let (er, ec) = exploitability(&m, &s.row_policy, &s.col_policy);
        worst_expl = worst_expl.max(er.max(ec));
        let max_min = m.mul_row(&s.row_policy).into_iter().fold(f64::INFINITY, f64::min);
        let min_max = m.mul_col(&s.col_policy).into_iter().fold(f64::NEG_INFINITY, f64::max);
        worst_dual = worst_dual.max((max_min - min_max).abs());
    }
    let t = start.elapsed();
    outcome(
        worst_oracle <= 1e-3 && worst_expl <= 1e-6 && worst_dual <= 1e-9 && within(t, 5),
        format!("oracle gap {worst_oracle:.2e}, exploitability {worst_expl:.2e}, max-min vs min-max {worst_dual:.2e}, {t:.2?}"),
    )
}

// ---------------------------------------------------------------------------
// 2. NE sandwich

fn random_stochastic(g: &mut impl Rng, h: usize, s: usize, a: usize) -> StochasticPolicy {
    let probs: Vec<f64> = (0..h * s)
        .flat_map(|_| {
            let w: Vec<f64> = (0..a).map(|_| g.random_range(0.0..1.0f64) + 1e-3).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(move |v| v / total)
        })
        .collect();
    StochasticPolicy::new(h, s, a, probs).unwrap()
}

fn ne_sandwich() -> Outcome {
    let start = Instant::now();
    let mut g = rng::stream(12, &[rng::label("acceptance-sandwich")]);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..500u64 {
        let (h, s) = (g.random_range(1..=3), g.random_range(1..=3));
        let (a1, a2) = (g.random_range(1..=3), g.random_range(1..=3));
        let game = random_game_asym(h, s, a1, a2, i);
        let v_star = ne_value_iteration(&game, DEFAULT_SOLVER_TOL).unwrap().value();
        let pi = random_stochastic(&mut g, h, s, a1);
        let nu = random_stochastic(&mut g, h, s, a2);
        let lower = best_response_value_iteration(&game, &pi, Player::One).unwrap().1;
        let upper = best_response_value_iteration(&game, &nu, Player::Two).unwrap().1;
        worst = worst.max(lower - v_star).max(v_star - upper);
    }
    let t = start.elapsed();
    outcome(worst <= 1e-6 && within(t, 30), format!("largest violation {worst:.2e}, {t:.2?}"))
}

/// Random game with possibly unequal action counts, built directly.
fn random_game_asym(h: usize, s: usize, a1: usize, a2: usize, seed: u64) -> MarkovGame {
    let mut g = rng::stream(seed, &[rng::label("acceptance-game")]);
    let cells = h * s * a1 * a2;
    let rewards: Vec<f64> = (0..cells).map(|_| g.random_range(-1.0..=1.0)).collect();
    let transitions: Vec<f64> = (0..cells)
        .flat_map(|_| {
            let w: Vec<f64> = (0..s).map(|_| g.random_range(0.0..1.0f64) + 1e-3).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(move |v| v / total)
        })
        .collect();
    MarkovGame::new(Shape::new(h, s, a1, a2), 0, (-1.0, 1.0), rewards, transitions).unwrap()
}

// ---------------------------------------------------------------------------
// 3. simulation lemma

fn simulation_lemma() -> Outcome {
    let start = Instant::now();
    let mut g = rng::stream(13, &[rng::label("acceptance-simulation")]);
    let (mut worst, mut triples) = (0.0f64, 0);
    for f in 0..20u64 {
        let truth = random_game(3, 2, 2, 0.0, 100 + f).unwrap();
        let models = model_family(&truth, 2, 0.5, f).unwrap();
        let mut pairs: Vec<(StochasticPolicy, StochasticPolicy)> = models
            .members()
            .iter()
            .map(|m| {
                let sol = ne_value_iteration(m, DEFAULT_SOLVER_TOL).unwrap();
                (sol.pi_star, sol.nu_star)
            })
            .collect();
        for _ in 0..3 {
            pairs.push((random_stochastic(&mut g, 3, 2, 2), random_stochastic(&mut g, 3, 2, 2)));
        }
        for model in models.members() {
            for (pi, nu) in &pairs {
                worst = worst.max(simulation_lemma_residual(pi, nu, model, &truth).unwrap().abs());
                triples += 1;
            }
        }
    }
    let t = start.elapsed();
    outcome(worst <= 1e-9 && within(t, 10), format!("{triples} triples, largest residual {worst:.2e}, {t:.2?}"))
}

// ---------------------------------------------------------------------------
// 4–6. ONEMG

fn onemg_instance() -> (MarkovGame, FiniteValueFamily) {
    let game = random_game(3, 3, 2, 0.0, 0).unwrap();
    let family = realizable_family(&game, None, 7, 0.6, 1).unwrap();
    assert_eq!(family.len(), 8);
    (game, family)
}

fn qstar_retention() -> Outcome {
    let (game, family) = onemg_instance();
    let runs = map_range(Execution::Parallel, 100, |s| {
        run_onemg(&game, &family, &OnemgConfig::new(200, s as u64), &Opponent::BestResponse).unwrap()
    });
    let kept = runs.iter().filter(|r| r.qstar_retained() == Some(true)).count();
    outcome(kept >= 95, format!("Q* kept in {kept}/100 seeds (K = 200, β = {:.2})", runs[0].beta))
}

struct LongOnemg {
    traces: Vec<Vec<f64>>,
    optimism_failures: usize,
    audited_steps: usize,
    min_slack: f64,
    errors: Vec<String>,
}

fn long_onemg_runs() -> (LongOnemg, Duration) {
    let (game, family) = onemg_instance();
    let start = Instant::now();
    let x1 = game.initial_state();
    let v_star = ne_value_iteration(&game, DEFAULT_SOLVER_TOL).unwrap().value();
    let values: Vec<f64> =
        family.members().iter().map(|f| hypothesis_ne_value(f, 0, x1, DEFAULT_SOLVER_TOL).unwrap()).collect();
    let results = map_range(Execution::Parallel, 20, |s| {
        let cfg = OnemgConfig { audit: true, ..OnemgConfig::new(2000, s as u64) };
        run_onemg(&game, &family, &cfg, &Opponent::BestResponse)
    });
    let mut out =
        LongOnemg { traces: vec![], optimism_failures: 0, audited_steps: 0, min_slack: f64::INFINITY, errors: vec![] };
    for (s, r) in results.into_iter().enumerate() {
        match r {
            Ok(run) => {
                let mut alive = true;
                for row in &run.rows {
                    if alive && values[row.chosen] < v_star - 1e-9 {
                        out.optimism_failures += 1;
                    }
                    alive = row.qstar_alive.unwrap_or(false);
                    out.min_slack = out.min_slack.min(row.audit_min_slack.unwrap_or(f64::NEG_INFINITY));
                }
                out.audited_steps += run.rows.len() * game.horizon();
                out.optimism_failures += run.optimism_violations;
                out.traces.push(run.rows.iter().map(|r| r.cum_regret).collect());
            }
            Err(e) => out.errors.push(format!("seed {s}: {e}")),
        }
    }
    (out, start.elapsed())
}

fn onemg_sublinearity(runs: &LongOnemg, elapsed: Duration) -> Outcome {
    if !runs.errors.is_empty() {
        return outcome(false, runs.errors.join("; "));
    }
    let (game, _) = onemg_instance();
    let mean = mean_trace(&runs.traces);
    let sub = sublinearity_test(&mean, None).unwrap();
    // always playing action 0: a pure policy the best response exploits
    let fixed = StochasticPolicy::pure(game.horizon(), game.n_states(), 2, |_, _| 0);
    let baseline = *fixed_policy_regret(&game, &fixed, &Opponent::BestResponse, 2000, DEFAULT_SOLVER_TOL)
        .unwrap()
        .last()
        .unwrap();
    let reg = *mean.last().unwrap();
    outcome(
        sub.ratio_pass && sub.alpha <= 0.75 && reg < baseline && within(elapsed, 300),
        format!(
            "ratio {:.3}, α {:.3}, Reg(2000) {reg:.1} vs fixed-policy baseline {baseline:.1}, {elapsed:.2?}",
            sub.ratio, sub.alpha
        ),
    )
}

fn onemg_optimism(runs: &LongOnemg) -> Outcome {
    if !runs.errors.is_empty() {
        return outcome(false, runs.errors.join("; "));
    }
    outcome(
        runs.optimism_failures == 0 && runs.min_slack >= -1e-9,
        format!(
            "{} optimism failures, {} audited steps, smallest audit slack {:.2e}",
            runs.optimism_failures, runs.audited_steps, runs.min_slack
        ),
    )
}

// ---------------------------------------------------------------------------
// 7. linear ONEMG

fn linear_onemg() -> Outcome {
    let (game, _) = onemg_instance();
    let features = LinearFeatures::one_hot(game.shape());
    let cfg = |k, s| LinearConfig { c_beta: 0.2, ..LinearConfig::new(k, s) };
    let short = map_range(Execution::Parallel, 100, |s| {
        run_linear(&game, &features, &cfg(200, s as u64), &Opponent::BestResponse).unwrap()
    });
    let feasible = short.iter().filter(|r| r.theta_always_feasible() == Some(true)).count();
    let optimism: usize = short.iter().map(|r| r.optimism_violations).sum();
    let potential_short = short.iter().all(|r| r.potential_ok);
    let long = map_range(Execution::Parallel, 5, |s| {
        run_linear(&game, &features, &cfg(2000, s as u64), &Opponent::BestResponse).unwrap()
    });
    let potential = potential_short && long.iter().all(|r| r.potential_ok);
    let optimism = optimism + long.iter().map(|r| r.optimism_violations).sum::<usize>();
    let mean = mean_trace(&long.iter().map(|r| r.rows.iter().map(|x| x.cum_regret).collect()).collect::<Vec<_>>());
    let sub = sublinearity_test(&mean, None).unwrap();
    outcome(
        feasible >= 95 && optimism == 0 && potential && sub.ratio_pass,
        format!(
            "θ* feasible in {feasible}/100 seeds, {optimism} optimism failures, potential {}, ratio {:.3} at K = 2000",
            if potential { "holds" } else { "violated" },
            sub.ratio
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. AOME

fn aome_contract() -> Outcome {
    let game = random_game(2, 2, 2, 1.0, 0).unwrap();
    let models = model_family(&game, 4, 0.5, 0).unwrap();
    let tests = indicator_tests(game.shape(), game.reward_range()).unwrap();
    let runs = map_range(Execution::Parallel, 100, |s| run_aome(&game, &models, &tests, &AomeConfig::new(s as u64)).unwrap());
    let terminated: Vec<_> = runs.iter().filter_map(|r| r.termination.as_ref()).collect();
    let certified = terminated.iter().filter(|t| t.exact_gap <= 0.1 + 3.0 * t.v_hat_se).count();
    let kept = runs.iter().filter(|r| r.mstar_never_eliminated() == Some(true)).count();
    outcome(
        terminated.len() >= 95 && certified == terminated.len() && kept >= 95,
        format!(
            "terminated {}/100 within 50 rounds, {certified}/{} certified, M* kept in {kept}/100",
            terminated.len(),
            terminated.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. AOVE

fn aove_contract() -> Outcome {
    let game = random_game(3, 3, 2, 0.0, 1).unwrap();
    let policies = random_policies(3, 3, 2, 4, 2, 1).unwrap();
    let truths = realizable_family(&game, Some(&policies), 0, 0.6, 1).unwrap().len();
    let family = realizable_family(&game, Some(&policies), 8 - truths, 0.6, 1).unwrap();
    let runs = map_range(Execution::Parallel, 100, |s| run_aove(&game, &policies, &family, &AoveConfig::new(1000, s as u64)).unwrap());
    let kept = runs.iter().filter(|r| r.truth_retention() == Some(1.0)).count();
    let bracket: usize = runs.iter().map(|r| r.bracket_violations).sum();
    let mean = mean_trace(&runs.iter().map(|r| r.rows.iter().map(|x| x.cum_regret).collect()).collect::<Vec<_>>());
    let sub = sublinearity_test(&mean, None).unwrap();
    let symmetric = (0..5u64).all(|s| {
        let cfg = AoveConfig::new(200, s);
        let a = run_aove(&game, &policies, &family, &cfg).unwrap();
        let b = run_aove(&game.swap_negate(), &policies, &family.swap_negate(), &AoveConfig { role: Role::P2, ..cfg })
            .unwrap();
        a.rows == b.rows
    });
    outcome(
        family.len() == 8 && kept >= 95 && bracket == 0 && sub.ratio_pass && symmetric,
        format!(
            "|F| = {}, truths kept in {kept}/100, {bracket} bracket violations, ratio {:.3}, role swap {}",
            family.len(),
            sub.ratio,
            if symmetric { "identical" } else { "differs" }
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. Eluder dimension

fn random_instance(g: &mut impl Rng, cells: usize, n_res: usize, n_meas: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let residuals = (0..n_res).map(|_| (0..cells).map(|_| g.random_range(-1.0..=1.0)).collect()).collect();
    let measures = (0..n_meas)
        .map(|_| {
            let w: Vec<f64> = (0..cells).map(|_| g.random_range(0.0..1.0f64)).collect();
            let total: f64 = w.iter().sum();
            w.into_iter().map(|v| v / total).collect()
        })
        .collect();
    (residuals, measures)
}

fn eluder_checks() -> Outcome {
    let start = Instant::now();
    let exec = Execution::Parallel;
    let mut notes = Vec::new();
    let mut pass = true;

    // zero residuals: Q* alone is closed under the minimax backup
    let game = random_game(2, 2, 2, 0.0, 3).unwrap();
    let qstar_only = realizable_family(&game, None, 0, 0.6, 0).unwrap();
    let zero = minimax_eluder_dimension(&game, &qstar_only, None, 0.1, EluderSettings::default()).unwrap().dimension;
    let dirac: Vec<Vec<f64>> = (0..4).map(|c| (0..4).map(|i| f64::from(u8::from(i == c))).collect()).collect();
    let zero_table = de_dimension(&vec![vec![0.0; 4]; 3], &dirac, 0.1, SearchMode::Exact, ScaleReading::Shared, 64, exec).unwrap().dimension;
    pass &= zero == 0 && zero_table == 0;
    notes.push(format!("zero residuals {zero}/{zero_table}"));

    // one residual supported on one cell, two Dirac measures: by hand the
    // first Dirac is independent of the empty prefix, the second sees a
    // zero expectation, so the longest sequence has length 1
    let atom = de_dimension(&[vec![1.0, 0.0]], &[vec![1.0, 0.0], vec![0.0, 1.0]], 0.5, SearchMode::Exact, ScaleReading::Shared, 64, exec).unwrap();
    pass &= atom.dimension == 1 && atom.witness == vec![0];
    notes.push(format!("single atom {}", atom.dimension));

    let mut g = rng::stream(14, &[rng::label("acceptance-eluder")]);
    let (mut greedy_ok, mut mono_ok, mut witness_ok) = (true, true, true);
    for _ in 0..50 {
        let cells = g.random_range(2..=5);
        let (n_res, n_meas) = (g.random_range(1..=6), g.random_range(1..=10));
        let (res, meas) = random_instance(&mut g, cells, n_res, n_meas);
        let eps = g.random_range(0.05..0.5);
        for reading in [ScaleReading::Shared, ScaleReading::PerStep] {
            let ex = de_dimension(&res, &meas, eps, SearchMode::Exact, reading, 64, exec).unwrap();
            let gr = de_dimension(&res, &meas, eps, SearchMode::Greedy, reading, 64, exec).unwrap();
            greedy_ok &= gr.dimension <= ex.dimension;
            if reading == ScaleReading::Shared {
                witness_ok &= verify_witness(&res, &meas, &ex, eps);
            }
        }
        let mut last = usize::MAX;
        for k in 1..=12 {
            let d = de_dimension(&res, &meas, 0.05 * k as f64, SearchMode::Exact, ScaleReading::Shared, 64, exec).unwrap().dimension;
            mono_ok &= d <= last;
            last = d;
        }
    }
    pass &= greedy_ok && mono_ok && witness_ok;
    notes.push(format!(
        "greedy ≤ exact {greedy_ok}, monotone in ε {mono_ok}, witnesses replay {witness_ok}"
    ));

    // tabular bound on random games and families
    let mut bound_ok = true;
    for s in 0..10u64 {
        let game = random_game(2, 2, 2, 0.0, 200 + s).unwrap();
        let fam = decoy_family(&game, 6, s).unwrap();
        let rep = minimax_eluder_dimension(&game, &fam, None, 0.05, EluderSettings::default()).unwrap();
        bound_ok &= rep.levels.iter().all(|l| l.dirac.dimension <= game.shape().cells());
    }
    pass &= bound_ok;
    notes.push(format!("Dirac bound {bound_ok}"));

    // full cap: 64 Dirac measures
    let big_start = Instant::now();
    let big = random_game(1, 4, 4, 0.0, 9).unwrap();
    let fam = decoy_family(&big, 12, 9).unwrap();
    let rep = minimax_eluder_dimension(&big, &fam, None, 0.1, EluderSettings::default()).unwrap();
    let big_t = big_start.elapsed();
    pass &= rep.dimension <= 64;
    notes.push(format!("64-measure instance dim {} in {big_t:.2?}", rep.dimension));

    let t = start.elapsed();
    outcome(pass && within(t, 60), format!("{}, {t:.2?}", notes.join(", ")))
}

// ---------------------------------------------------------------------------
// 11. determinism

fn sweep_configs() -> Vec<String> {
    let game = r#"
[game]
source = "generate"
seed = 0
spec = { kind = "random", horizon = 2, states = 2, actions = 2 }
"#;
    vec![
        format!(
            "algorithm = \"onemg\"\nseeds = [0, 1, 2]\n{game}\n[values]\nsource = \"realizable\"\ndecoys = 5\nnoise = 0.6\nseed = 1\n\n[opponent]\nkind = \"best-response\"\n\n[onemg]\nepisodes = 60\n"
        ),
        format!(
            "algorithm = \"linear\"\nseeds = [0, 1]\n{game}\n[features]\nsource = \"one-hot\"\n\n[opponent]\nkind = \"best-response\"\n\n[linear]\nepisodes = 40\nc_beta = 0.2\n"
        ),
        format!(
            "algorithm = \"aome\"\nseeds = [0, 1]\n{game}\n[models]\nsource = \"generate\"\ndecoys = 3\nnoise = 0.5\nseed = 0\n\n[tests]\nsource = \"indicators\"\n\n[aome]\nn1 = 100\nn = 100\n"
        ),
        format!(
            "algorithm = \"aove\"\nseeds = [0, 1]\n{game}\n[policies]\nsource = \"random\"\ncount = 3\npure = 1\nseed = 0\n\n[values]\nsource = \"realizable\"\ndecoys = 3\nnoise = 0.6\nseed = 0\n\n[aove]\nepisodes = 60\n"
        ),
    ]
}

fn with_execution(text: &str, exec: &str) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::parse(text).unwrap();
    let e = if exec == "serial" { Execution::Serial } else { Execution::Parallel };
    cfg.execution = e;
    if let Some(c) = cfg.onemg.as_mut() {
        c.execution = e;
    }
    if let Some(c) = cfg.linear.as_mut() {
        c.execution = e;
    }
    if let Some(c) = cfg.aome.as_mut() {
        c.execution = e;
    }
    if let Some(c) = cfg.aove.as_mut() {
        c.execution = e;
    }
    cfg
}

fn output_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "svg" | "json" | "jsonl")))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let mut compared = 0;
    let mut diffs = Vec::new();
    for (i, text) in sweep_configs().iter().enumerate() {
        let runs: Vec<Vec<(String, Vec<u8>)>> = ["serial", "parallel", "parallel"]
            .iter()
            .enumerate()
            .map(|(j, exec)| {
                let dir = root.path().join(format!("{i}-{j}"));
                run_sweep(&with_execution(text, exec), &dir).unwrap();
                output_files(&dir)
            })
            .collect();
        let algo = ExperimentConfig::parse(text).unwrap().algorithm.name();
        if runs[0].is_empty() {
            diffs.push(format!("{algo}: no output"));
        }
        for other in &runs[1..] {
            if other != &runs[0] {
                diffs.push(algo.to_string());
            }
        }
        compared += runs[0].len();
    }
    outcome(
        diffs.is_empty(),
        if diffs.is_empty() {
            format!("{compared} files identical across serial, parallel and rerun")
        } else {
            format!("differences in {}", diffs.join(", "))
        },
    )
}

// ---------------------------------------------------------------------------

static SERIAL: Mutex<()> = Mutex::new(());
static LONG_ONEMG: OnceLock<(LongOnemg, Duration)> = OnceLock::new();

/// Runs one criterion alone (timings are part of several criteria) and
/// prints its report line.
fn check(n: usize, name: &str, f: impl FnOnce() -> Outcome) {
    let _guard = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let o = f();
    println!("[{}] {n:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    assert!(o.pass, "criterion {n} ({name}) failed: {}", o.detail);
}

fn long_onemg() -> &'static (LongOnemg, Duration) {
    LONG_ONEMG.get_or_init(long_onemg_runs)
}

#[test]
fn c01_matrix_solver() {
    check(1, "matrix-game solver", matrix_solver);
}

#[test]
fn c02_ne_sandwich() {
    check(2, "NE sandwich", ne_sandwich);
}

#[test]
fn c03_simulation_lemma() {
    check(3, "simulation lemma", simulation_lemma);
}

#[test]
fn c04_qstar_retention() {
    check(4, "Q* retention", qstar_retention);
}

#[test]
fn c05_onemg_sublinearity() {
    check(5, "ONEMG sublinearity", || {
        let (runs, t) = long_onemg();
        onemg_sublinearity(runs, *t)
    });
}

#[test]
fn c06_onemg_optimism_and_audit() {
    check(6, "per-episode optimism and audit", || onemg_optimism(&long_onemg().0));
}

#[test]
fn c07_linear_onemg() {
    check(7, "linear ONEMG", linear_onemg);
}

#[test]
fn c08_aome_contract() {
    check(8, "AOME termination contract", aome_contract);
}

#[test]
fn c09_aove_contract() {
    check(9, "AOVE retention, bracket, regret, symmetry", aove_contract);
}

#[test]
fn c10_eluder_calculators() {
    check(10, "Eluder calculators", eluder_checks);
}

#[test]
fn c11_determinism() {
    check(11, "determinism", determinism);
}
